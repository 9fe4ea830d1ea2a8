"""WAV reading and writing, resampling, and clean/degraded pairing."""

from __future__ import annotations

import struct
import warnings
from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.io import wavfile
from scipy import signal as sps

from .errors import AudioIOError, ValidationError

# Kaiser design targets for the anti-aliasing filter.
STOPBAND_DB = 80.0
TRANSITION_FRACTION = 0.05


class LengthMismatchWarning(UserWarning):
    """Clean and degraded signals differ in length by more than 1%."""


@dataclass(eq=False)
class AudioSignal:
    """Mono waveform with its sampling rate in Hz."""

    samples: np.ndarray
    sample_rate: float

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64).ravel()
        if not self.sample_rate > 0:
            raise ValidationError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.size == 0:
            raise ValidationError("zero-length audio")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("audio contains non-finite samples")

    def __len__(self):
        return self.samples.size

    @property
    def duration(self):
        return self.samples.size / self.sample_rate

    def with_samples(self, samples):
        return AudioSignal(samples, self.sample_rate)


def _to_float(data):
    kind = data.dtype.kind
    if kind == "f":
        return data.astype(np.float64)
    if kind == "u":
        # 8-bit WAV is unsigned with a 128 offset
        half = 2.0 ** (8 * data.dtype.itemsize - 1)
        return (data.astype(np.float64) - half) / half
    if kind == "i":
        # scipy returns left-justified integers, so 24-bit lands in int32
        return data.astype(np.float64) / 2.0 ** (8 * data.dtype.itemsize - 1)
    raise AudioIOError(f"unsupported encoding: {data.dtype}")


def load_audio(path):
    """Read a PCM or IEEE-float WAV file as a mono ``AudioSignal``.

    Integer formats are scaled to [-1, 1]; multichannel files are
    averaged across channels.
    """
    try:
        rate, data = wavfile.read(str(path))
    except FileNotFoundError as exc:
        raise AudioIOError(f"unreadable file: {path}: no such file") from exc
    except (ValueError, OSError, EOFError, struct.error) as exc:
        raise AudioIOError(f"unreadable file: {path}: {exc}") from exc
    samples = _to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if samples.size == 0:
        raise ValidationError(f"zero-length audio: {path}")
    return AudioSignal(samples, float(rate))


def save_audio(path, signal):
    """Write ``signal`` as a 32-bit float WAV file."""
    rate = int(round(signal.sample_rate))
    try:
        wavfile.write(str(path), rate, signal.samples.astype(np.float32))
    except OSError as exc:
        raise AudioIOError(f"cannot write {path}: {exc}") from exc


def _ratio(source_rate, target_rate):
    frac = Fraction(target_rate).limit_denominator(10_000) / Fraction(
        source_rate
    ).limit_denominator(10_000)
    return frac.numerator, frac.denominator


def design_antialias(up, down):
    """Kaiser-windowed sinc lowpass for polyphase ``up/down`` conversion.

    Cutoff sits half a transition band below the lower Nyquist frequency,
    so the stopband starts at that frequency. Unit DC gain;
    ``resample_poly`` applies the factor ``up`` itself.
    """
    # normalized to the Nyquist frequency of the upsampled stream
    nyq = 1.0 / max(up, down)
    width = TRANSITION_FRACTION * nyq
    numtaps, beta = sps.kaiserord(STOPBAND_DB, width)
    numtaps |= 1
    return sps.firwin(numtaps, nyq - width / 2, window=("kaiser", beta))


def resample(signal, target_rate):
    """Resample with a polyphase windowed-sinc filter.

    Returns the input object unchanged when the rates already match.
    """
    if not target_rate > 0:
        raise ValidationError(f"target_rate must be positive, got {target_rate}")
    if signal.sample_rate == target_rate:
        return signal
    up, down = _ratio(signal.sample_rate, target_rate)
    taps = design_antialias(up, down)
    out = sps.resample_poly(signal.samples, up, down, window=taps)
    return AudioSignal(out, float(target_rate))


def align_pair(clean, degraded):
    """Truncate both signals to the shorter length.

    No delay compensation is attempted; inputs are assumed sample-aligned.
    """
    if clean.sample_rate != degraded.sample_rate:
        raise ValidationError(
            f"sample-rate mismatch: {clean.sample_rate} vs {degraded.sample_rate}"
        )
    n_clean, n_deg = len(clean), len(degraded)
    if n_clean == n_deg:
        return clean, degraded
    longer = max(n_clean, n_deg)
    if abs(n_clean - n_deg) > 0.01 * longer:
        warnings.warn(
            f"clean/degraded lengths differ by more than 1% ({n_clean} vs {n_deg}); "
            "truncating to the shorter",
            LengthMismatchWarning,
            stacklevel=2,
        )
    n = min(n_clean, n_deg)
    return clean.with_samples(clean.samples[:n]), degraded.with_samples(degraded.samples[:n])
