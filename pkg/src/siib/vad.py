"""Energy-based removal of silent segments.

The activity mask is computed on the clean signal only and the same mask
is applied to both signals, which keeps their samples in correspondence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_THRESHOLD_DB = 40.0
DEFAULT_FRAME_SECONDS = 0.025


@dataclass(eq=False)
class ActivityMask:
    active: np.ndarray
    frame_length: int
    hop: int

    @property
    def num_active(self):
        return int(np.count_nonzero(self.active))


def num_frames(length, frame_length, hop):
    if length < frame_length:
        return 0
    return (length - frame_length) // hop + 1


def frame_energies(samples, frame_length, hop):
    n = num_frames(samples.size, frame_length, hop)
    if n == 0:
        return np.zeros(0)
    windows = np.lib.stride_tricks.sliding_window_view(samples**2, frame_length)
    return windows[::hop][:n].sum(axis=1)


def compute_activity_mask(clean, frame_length, hop=None, threshold_db=DEFAULT_THRESHOLD_DB):
    """Mark frames within ``threshold_db`` of the loudest clean frame.

    Frame energy is the sum of squared samples; zero-energy frames are
    never active.
    """
    hop = frame_length if hop is None else hop
    if frame_length <= 0 or not 0 < hop <= frame_length:
        raise ValidationError(f"invalid framing: frame_length={frame_length}, hop={hop}")
    if not threshold_db > 0:
        raise ValidationError(f"threshold_db must be positive, got {threshold_db}")
    if len(clean) < frame_length:
        raise ValidationError(
            f"signal shorter than one VAD frame ({len(clean)} < {frame_length} samples)"
        )
    energy = frame_energies(clean.samples, frame_length, hop)
    with np.errstate(divide="ignore"):
        level = 10.0 * np.log10(energy)
    active = level > level.max() - threshold_db
    if not active.any():
        raise ValidationError("no active frames (all-silence input)")
    return ActivityMask(active, frame_length, hop)


def apply_mask(signal, mask):
    """Concatenate the hop-sized segments of active frames."""
    expected = num_frames(len(signal), mask.frame_length, mask.hop)
    if expected != mask.active.size:
        raise ValidationError(
            f"mask has {mask.active.size} frames but signal of length {len(signal)} "
            f"gives {expected}"
        )
    idx = np.flatnonzero(mask.active)
    segments = signal.samples[: expected * mask.hop].reshape(expected, mask.hop)
    return signal.with_samples(segments[idx].ravel())


def remove_silence(clean, degraded, threshold_db=DEFAULT_THRESHOLD_DB,
                   frame_seconds=DEFAULT_FRAME_SECONDS):
    frame_length = int(round(frame_seconds * clean.sample_rate))
    mask = compute_activity_mask(clean, frame_length, frame_length, threshold_db)
    return apply_mask(clean, mask), apply_mask(degraded, mask)
