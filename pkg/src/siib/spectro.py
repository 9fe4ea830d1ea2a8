"""Auditory log-spectrogram front end.

A waveform becomes a sequence of J-dimensional log band energies: STFT
with a periodic Hann window, power spectra weighted by gammatone
magnitude responses spaced uniformly on the ERB-rate scale, natural log
with an energy floor, and a forward-masking running maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.signal import get_window

from .errors import ValidationError

DEFAULT_FFT_SIZE = 400
DEFAULT_NUM_FILTERS = 28
DEFAULT_F_LO = 100.0
DEFAULT_F_HI = 6500.0
DEFAULT_ENERGY_FLOOR = 1e-12
DEFAULT_MASKING_DECAY_DB = 5.0

# Gammatone bandwidth relative to the equivalent rectangular bandwidth
GAMMATONE_B = 1.019
GAMMATONE_ORDER = 4


@dataclass(eq=False)
class StftFrames:
    frames: np.ndarray  # (T, fft_size // 2 + 1) complex
    fft_size: int
    hop: int
    sample_rate: float
    window: str = "hann (periodic)"

    @property
    def num_bins(self):
        return self.frames.shape[1]


@dataclass(eq=False)
class FilterbankMatrix:
    weights: np.ndarray  # (J, N), non-negative
    center_freqs: np.ndarray  # (J,) Hz


@dataclass(eq=False)
class LogSpectrogram:
    vectors: np.ndarray  # (T, J) natural-log energies
    frame_rate: float

    @property
    def num_frames(self):
        return self.vectors.shape[0]


def stft(signal, fft_size=DEFAULT_FFT_SIZE, hop=None):
    """One-sided STFT; frame ``t`` covers samples ``[t*hop, t*hop + fft_size)``.

    ``hop`` defaults to ``fft_size // 2``. No padding is applied, so the
    trailing partial frame is dropped.
    """
    hop = fft_size // 2 if hop is None else hop
    if not 0 < hop <= fft_size:
        raise ValidationError(f"hop must be in (0, fft_size], got {hop}")
    x = signal.samples
    if x.size < fft_size:
        raise ValidationError(f"signal too short for STFT ({x.size} < {fft_size} samples)")
    window = get_window("hann", fft_size, fftbins=True)
    frames = np.lib.stride_tricks.sliding_window_view(x, fft_size)[::hop]
    spectra = np.fft.rfft(frames * window, axis=1)
    return StftFrames(spectra, fft_size, hop, signal.sample_rate)


def erb_rate(frequency):
    """Glasberg-Moore ERB-rate (ERB number) of ``frequency`` in Hz."""
    return 21.4 * np.log10(0.00437 * np.asarray(frequency, dtype=np.float64) + 1.0)


def inverse_erb_rate(erbs):
    return (10.0 ** (np.asarray(erbs, dtype=np.float64) / 21.4) - 1.0) / 0.00437


def erb_bandwidth(frequency):
    """Equivalent rectangular bandwidth in Hz at ``frequency``."""
    return 24.7 * (0.00437 * np.asarray(frequency, dtype=np.float64) + 1.0)


@lru_cache(maxsize=32)
def _filterbank_arrays(num_filters, fft_size, sample_rate, f_lo, f_hi):
    erbs = np.linspace(erb_rate(f_lo), erb_rate(f_hi), num_filters)
    centers = inverse_erb_rate(erbs)
    # pin the endpoints so the round trip cannot drift
    centers[0], centers[-1] = f_lo, f_hi
    freqs = np.fft.rfftfreq(fft_size, 1.0 / sample_rate)
    bw = GAMMATONE_B * erb_bandwidth(centers)
    z = (freqs[None, :] - centers[:, None]) / bw[:, None]
    # power response of an order-4 gammatone: |1 + jz|^(-2*order)
    weights = (1.0 + z**2) ** (-GAMMATONE_ORDER)
    weights /= weights.max(axis=1, keepdims=True)
    weights.setflags(write=False)
    centers.setflags(write=False)
    return weights, centers


def gammatone_filterbank(num_filters=DEFAULT_NUM_FILTERS, fft_size=DEFAULT_FFT_SIZE,
                         sample_rate=16000.0, f_lo=DEFAULT_F_LO, f_hi=DEFAULT_F_HI):
    """Gammatone power responses sampled at the one-sided FFT bins.

    Center frequencies are equally spaced in ERB-rate between ``f_lo`` and
    ``f_hi``; each row is scaled so its largest sampled value is 1. The
    returned arrays are cached and read-only.
    """
    if num_filters < 2:
        raise ValidationError(f"need at least 2 filters, got {num_filters}")
    if not 0 <= f_lo < f_hi < sample_rate / 2:
        raise ValidationError(
            f"need 0 <= f_lo < f_hi < fs/2, got f_lo={f_lo}, f_hi={f_hi}, fs={sample_rate}"
        )
    weights, centers = _filterbank_arrays(
        int(num_filters), int(fft_size), float(sample_rate), float(f_lo), float(f_hi)
    )
    return FilterbankMatrix(weights, centers)


def band_energies(frames, fb):
    if fb.weights.shape[1] != frames.num_bins:
        raise ValidationError(
            f"filterbank has {fb.weights.shape[1]} bins, frames have {frames.num_bins}"
        )
    power = frames.frames.real**2 + frames.frames.imag**2
    return power @ fb.weights.T


def auditory_log_spectrogram(frames, fb, energy_floor=DEFAULT_ENERGY_FLOOR):
    """Natural-log filterbank energies of each STFT frame.

    Energies are floored at ``energy_floor`` times the largest band energy
    of the whole utterance before taking the log.
    """
    energy = band_energies(frames, fb)
    floor = max(energy_floor * energy.max(initial=0.0), np.finfo(np.float64).tiny)
    log_energy = np.log(np.maximum(energy, floor))
    return LogSpectrogram(log_energy, frames.sample_rate / frames.hop)


def apply_forward_masking(spec, decay_db_per_frame=DEFAULT_MASKING_DECAY_DB):
    """Per-channel running maximum with exponential decay.

    The masker decays by ``decay_db_per_frame`` (energy dB) each frame and
    is replaced by the current energy when that is larger. Evaluated in
    the log domain, where the decay is a subtraction.
    """
    if not decay_db_per_frame > 0:
        raise ValidationError(f"decay must be positive, got {decay_db_per_frame}")
    step = decay_db_per_frame * np.log(10.0) / 10.0
    x = spec.vectors
    out = np.empty_like(x)
    if x.shape[0]:
        out[0] = x[0]
        for t in range(1, x.shape[0]):
            np.maximum(x[t], out[t - 1] - step, out=out[t])
    return LogSpectrogram(out, spec.frame_rate)


def log_spectrogram(signal, fft_size=DEFAULT_FFT_SIZE, hop=None,
                    num_filters=DEFAULT_NUM_FILTERS, f_lo=DEFAULT_F_LO, f_hi=DEFAULT_F_HI,
                    energy_floor=DEFAULT_ENERGY_FLOOR,
                    masking_decay_db=DEFAULT_MASKING_DECAY_DB):
    """Full front end: STFT, gammatone log energies, forward masking."""
    frames = stft(signal, fft_size, hop)
    fb = gammatone_filterbank(num_filters, fft_size, signal.sample_rate, f_lo, f_hi)
    spec = auditory_log_spectrogram(frames, fb, energy_floor)
    return apply_forward_masking(spec, masking_decay_db)
