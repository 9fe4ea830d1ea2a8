"""SIIB: speech intelligibility in bits per second.

The score is the frame rate over the stack size times the sum, over all
KLT dimensions, of the smaller of the production-channel cap and the
clean/degraded mutual information of that dimension.
"""

from __future__ import annotations

import hashlib
import json
import warnings
from dataclasses import asdict, dataclass, field, fields, replace

import numpy as np

from . import audio_io, features, mi_estimator, spectro, vad
from .errors import ValidationError

MIN_RECOMMENDED_SECONDS = 20.0


@dataclass(frozen=True)
class SiibConfig:
    """Every tunable of the pipeline. Defaults are the published setup."""

    sample_rate: float = 16000.0
    vad_db: float = vad.DEFAULT_THRESHOLD_DB
    vad_frame_seconds: float = vad.DEFAULT_FRAME_SECONDS
    fft_size: int = spectro.DEFAULT_FFT_SIZE
    hop: int = spectro.DEFAULT_FFT_SIZE // 2
    num_filters: int = spectro.DEFAULT_NUM_FILTERS
    f_lo: float = spectro.DEFAULT_F_LO
    f_hi: float = spectro.DEFAULT_F_HI
    masking_decay_db: float = spectro.DEFAULT_MASKING_DECAY_DB
    energy_floor: float = spectro.DEFAULT_ENERGY_FLOOR
    stack: int = features.DEFAULT_STACK
    knn_k: int = mi_estimator.DEFAULT_K
    r: float = 0.75
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.r < 1:
            raise ValidationError(f"r must be in [0, 1), got {self.r}")
        if self.stack < 1 or self.num_filters < 1 or self.knn_k < 1:
            raise ValidationError("stack, num_filters and knn_k must be >= 1")
        if not self.frame_rate > 0:
            raise ValidationError("frame rate must be positive")

    @property
    def frame_rate(self):
        return self.sample_rate / self.hop

    @property
    def cap_bits(self):
        return production_channel_cap(self.r)

    @property
    def max_score(self):
        return self.frame_rate * self.num_filters * self.cap_bits

    def to_dict(self):
        return asdict(self)

    def digest(self):
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    @classmethod
    def from_mapping(cls, mapping):
        """Build a config from ``mapping``, ignoring ``None`` values."""
        names = {f.name: f.type for f in fields(cls)}
        unknown = set(mapping) - set(names)
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(sorted(unknown))}")
        base = cls()
        values = {}
        for key, value in mapping.items():
            if value is None:
                continue
            current = getattr(base, key)
            values[key] = type(current)(value)
        return replace(base, **values)


@dataclass
class SiibScore:
    bits_per_second: float
    cap_bits: float
    per_dimension_mi: list = field(default_factory=list)
    per_dimension_capped: list = field(default_factory=list)
    frame_rate: float = 0.0
    num_vectors: int = 0
    config_digest: str = ""

    def to_dict(self):
        return {
            "bits_per_second": self.bits_per_second,
            "cap_bits": self.cap_bits,
            "config_digest": self.config_digest,
            "frame_rate": self.frame_rate,
            "num_vectors": self.num_vectors,
            "per_dimension_mi": list(self.per_dimension_mi),
            "capped": list(self.per_dimension_capped),
        }

    def to_json(self, **kwargs):
        return json.dumps(self.to_dict(), **kwargs)


def production_channel_cap(r):
    """Information rate per dimension, in bits, of the speech production channel."""
    if not 0 <= r < 1:
        raise ValidationError(f"production noise correlation must be in [0, 1), got {r}")
    return float(-0.5 * np.log2(1.0 - r * r))


def transformed_features(clean, degraded, config=None):
    """Run the front end and return KLT-domain ``(clean, degraded, basis)``."""
    config = config or SiibConfig()
    clean = audio_io.resample(clean, config.sample_rate)
    degraded = audio_io.resample(degraded, config.sample_rate)
    clean, degraded = audio_io.align_pair(clean, degraded)
    clean, degraded = vad.remove_silence(
        clean, degraded, config.vad_db, config.vad_frame_seconds
    )
    if clean.duration < MIN_RECOMMENDED_SECONDS:
        warnings.warn(
            f"only {clean.duration:.1f} s of active speech; SIIB is unreliable "
            f"below {MIN_RECOMMENDED_SECONDS:.0f} s",
            features.ShortInputWarning,
            stacklevel=2,
        )
    front = dict(
        fft_size=config.fft_size,
        hop=config.hop,
        num_filters=config.num_filters,
        f_lo=config.f_lo,
        f_hi=config.f_hi,
        energy_floor=config.energy_floor,
        masking_decay_db=config.masking_decay_db,
    )
    X = spectro.log_spectrogram(clean, **front)
    Y = spectro.log_spectrogram(degraded, **front)
    if X.num_frames < config.stack:
        raise ValidationError(
            f"too few frames after silence removal: {X.num_frames} < K={config.stack}"
        )
    Xk = features.stack_frames(X, config.stack)
    Yk = features.stack_frames(Y, config.stack)
    basis = features.fit_klt(Xk)
    return features.apply_klt(basis, Xk), features.apply_klt(basis, Yk), basis


def score_from_mi(mi_bits, config):
    """Combine per-dimension MI estimates (bits) into a ``SiibScore``."""
    mi = np.asarray(mi_bits, dtype=np.float64)
    cap = config.cap_bits
    capped = mi >= cap
    terms = np.minimum(np.maximum(mi, 0.0), cap)
    value = float(config.frame_rate / config.stack * terms.sum())
    bound = config.max_score
    assert 0.0 <= value <= bound * (1 + 1e-12), (value, bound)
    return SiibScore(
        bits_per_second=value,
        cap_bits=cap,
        per_dimension_mi=mi.tolist(),
        per_dimension_capped=capped.tolist(),
        frame_rate=config.frame_rate,
        config_digest=config.digest(),
    )


def siib(clean, degraded, config=None, jobs=None):
    """Intelligibility of ``degraded`` relative to ``clean`` in bits/s.

    Parameters
    ----------
    clean, degraded : AudioSignal
        Time-aligned signals; resampled to ``config.sample_rate`` if needed.
    config : SiibConfig, optional
    jobs : int, optional
        Threads for the per-dimension MI estimates.

    Returns
    -------
    SiibScore
    """
    config = config or SiibConfig()
    Xt, Yt, _ = transformed_features(clean, degraded, config)
    estimates = mi_estimator.mi_per_dimension(
        Xt, Yt, k=config.knn_k, seed=config.seed, jobs=jobs
    )
    score = score_from_mi([e.value for e in estimates], config)
    score.num_vectors = len(Xt)
    return score
