"""Synthetic degradation channels and test stimuli.

Everything here is seeded: the same seed gives bit-identical output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as sps

from .audio_io import AudioSignal
from .errors import ValidationError

KINDS = ("additive_ssn", "additive_white", "gain_mask", "passthrough")
ALIASES = {"ssn": "additive_ssn", "white": "additive_white", "ibm": "gain_mask"}

LTAS_SEGMENT = 1024


@dataclass(frozen=True)
class ChannelSpec:
    """A degradation channel.

    ``gain_mask`` mixes SSN at ``snr_db`` and then applies an ideal binary
    mask (keep time-frequency bins where speech dominates the noise).
    """

    kind: str
    snr_db: float = 0.0
    seed: int = 0

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ValidationError(
                f"unsupported channel kind {self.kind!r}; choose from {', '.join(KINDS)}"
            )
        object.__setattr__(self, "kind", kind)
        if kind != "passthrough" and not np.isfinite(self.snr_db):
            raise ValidationError(f"snr_db must be finite for {kind}")


def speech_shaped_noise(reference, seed=0):
    """Gaussian noise colored by the long-term spectrum of ``reference``.

    White noise is shaped in the FFT domain by the square root of the
    reference's Welch power spectrum, then scaled to the reference power.
    """
    x = reference.samples
    n = x.size
    rng = np.random.default_rng(seed)
    white = rng.standard_normal(n)
    nperseg = min(LTAS_SEGMENT, n)
    freqs, psd = sps.welch(x, fs=reference.sample_rate, nperseg=nperseg)
    bins = np.fft.rfftfreq(n, 1.0 / reference.sample_rate)
    shape = np.sqrt(np.interp(bins, freqs, psd))
    noise = np.fft.irfft(np.fft.rfft(white) * shape, n)
    p_noise = np.mean(noise**2)
    if p_noise > 0:
        noise *= np.sqrt(np.mean(x**2) / p_noise)
    return reference.with_samples(noise)


def white_noise(reference, seed=0):
    rng = np.random.default_rng(seed)
    return reference.with_samples(rng.standard_normal(len(reference)))


def mix_at_snr(clean, noise, snr_db):
    """Return ``clean + alpha * noise`` at the requested full-signal SNR."""
    if len(clean) != len(noise) or clean.sample_rate != noise.sample_rate:
        raise ValidationError("clean and noise must have equal length and rate")
    p_clean = np.mean(clean.samples**2)
    p_noise = np.mean(noise.samples**2)
    if p_clean == 0 or p_noise == 0:
        raise ValidationError("zero-power clean or noise signal")
    alpha = np.sqrt(p_clean / (p_noise * 10.0 ** (snr_db / 10.0)))
    return clean.with_samples(clean.samples + alpha * noise.samples)


def ideal_binary_mask(clean, noise, snr_db, nperseg=512):
    """Mix at ``snr_db`` and keep only STFT bins where speech dominates."""
    mixture = mix_at_snr(clean, noise, snr_db)
    scaled_noise = mixture.samples - clean.samples
    fs = clean.sample_rate
    _, _, S = sps.stft(clean.samples, fs, nperseg=nperseg)
    _, _, N = sps.stft(scaled_noise, fs, nperseg=nperseg)
    _, _, Y = sps.stft(mixture.samples, fs, nperseg=nperseg)
    mask = np.abs(S) > np.abs(N)
    _, y = sps.istft(Y * mask, fs, nperseg=nperseg)
    return clean.with_samples(y[: len(clean)])


def apply_channel(clean, spec, noise_reference=None):
    """Degrade ``clean`` according to ``spec``.

    SSN is shaped by ``noise_reference`` when given, else by ``clean``.
    """
    if spec.kind == "passthrough":
        return clean
    if spec.kind == "additive_white":
        return mix_at_snr(clean, white_noise(clean, spec.seed), spec.snr_db)
    ref = clean if noise_reference is None else noise_reference
    noise = speech_shaped_noise(ref, spec.seed)
    if len(noise) != len(clean):
        reps = int(np.ceil(len(clean) / len(noise)))
        noise = clean.with_samples(np.tile(noise.samples, reps)[: len(clean)])
    if spec.kind == "additive_ssn":
        return mix_at_snr(clean, noise, spec.snr_db)
    return ideal_binary_mask(clean, noise, spec.snr_db)


def _resonator(freq, bandwidth, fs):
    r = np.exp(-np.pi * bandwidth / fs)
    theta = 2.0 * np.pi * freq / fs
    a = [1.0, -2.0 * r * np.cos(theta), r * r]
    return [sum(a)], a


def synthetic_speech(duration, sample_rate=16000.0, seed=0, pause_probability=0.15):
    """Crude speech-like test signal built from formant-filtered syllables.

    Each syllable (120-320 ms) is a glottal pulse train with a drifting F0,
    optionally mixed with a noisy fricative onset, passed through three
    random formant resonators and a raised-cosine envelope. Occasional
    pauses give the VAD something to remove.
    """
    if not duration > 0:
        raise ValidationError("duration must be positive")
    rng = np.random.default_rng(seed)
    fs = float(sample_rate)
    total = int(round(duration * fs))
    out = np.zeros(total)
    pos = 0
    while pos < total:
        if rng.random() < pause_probability:
            pos += int(rng.uniform(0.08, 0.4) * fs)
            continue
        n = int(rng.uniform(0.12, 0.32) * fs)
        t = np.arange(n) / fs
        f0 = rng.uniform(90, 240) * (1.0 + rng.uniform(-0.15, 0.15) * t / t[-1])
        phase = np.cumsum(f0) / fs
        source = np.diff(np.floor(phase), prepend=0.0) * 4.0
        source += 0.02 * rng.standard_normal(n)
        if rng.random() < 0.35:
            k = int(n * rng.uniform(0.2, 0.5))
            hiss = rng.standard_normal(k) * rng.uniform(0.1, 0.3)
            cutoff = min(rng.uniform(2500, 5000), 0.4 * fs)
            b, a = sps.butter(2, cutoff / (fs / 2), "high")
            source[:k] = source[:k] * 0.2 + sps.lfilter(b, a, hiss)
        y = source
        for lo, hi, bw in ((300, 900, 80), (900, 2400, 120), (2300, 3600, 180)):
            b, a = _resonator(rng.uniform(lo, hi), bw, fs)
            y = sps.lfilter(b, a, y)
        env = np.sin(np.pi * np.arange(n) / n) ** 0.7
        y = y * env * 10.0 ** (rng.uniform(-12, 0) / 20.0)
        end = min(total, pos + n)
        out[pos:end] += y[: end - pos]
        pos += int(n * rng.uniform(0.85, 1.0))
    peak = np.max(np.abs(out))
    if peak > 0:
        out *= 0.5 / peak
    return AudioSignal(out, fs)
