"""Frame stacking and the Karhunen-Loeve transform.

The basis is always fitted on clean features. Degraded features are
projected on the same basis after removing their own mean.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError

DEFAULT_STACK = 15


class ShortInputWarning(UserWarning):
    """Too little data for a well-conditioned covariance or MI estimate."""


@dataclass(eq=False)
class StackedFeatures:
    vectors: np.ndarray  # (T - K + 1, K * J)
    K: int
    J: int

    @property
    def dim(self):
        return self.K * self.J

    def __len__(self):
        return self.vectors.shape[0]


@dataclass(eq=False)
class KltBasis:
    mean: np.ndarray  # (D,)
    eigenvectors: np.ndarray  # (D, D), one eigenvector per row
    eigenvalues: np.ndarray  # (D,), descending

    @property
    def dim(self):
        return self.mean.size


def stack_frames(spec, K=DEFAULT_STACK):
    """Concatenate each run of ``K`` consecutive frames, oldest first.

    Output vector ``t`` holds frames ``t .. t+K-1`` with stride 1.
    """
    x = np.asarray(getattr(spec, "vectors", spec), dtype=np.float64)
    if K < 1:
        raise ValidationError(f"K must be >= 1, got {K}")
    T, J = x.shape
    if T < K:
        raise ValidationError(f"too few frames to stack: {T} < K={K}")
    windows = np.lib.stride_tricks.sliding_window_view(x, K, axis=0)  # (T-K+1, J, K)
    vectors = np.ascontiguousarray(windows.transpose(0, 2, 1).reshape(T - K + 1, K * J))
    return StackedFeatures(vectors, K, J)


def _canonical_order(eigenvalues, eigenvectors):
    # eigenvectors: rows. Descending eigenvalue, ties broken by components.
    keys = [-eigenvectors[:, c] for c in range(eigenvectors.shape[1] - 1, -1, -1)]
    keys.append(-eigenvalues)
    return np.lexsort(keys)


def fit_klt(clean_stacked):
    """Eigendecomposition of the clean sample covariance.

    Rows of ``eigenvectors`` are unit-norm, sorted by descending eigenvalue,
    and signed so that each row's largest-magnitude entry is positive.
    """
    x = np.asarray(getattr(clean_stacked, "vectors", clean_stacked), dtype=np.float64)
    n, d = x.shape
    if n < 2:
        raise ValidationError(f"need at least 2 vectors to fit a KLT, got {n}")
    if not np.all(np.isfinite(x)):
        raise ValidationError("non-finite features")
    if n < d + 1:
        warnings.warn(
            f"only {n} vectors for a {d}-dimensional covariance; it is rank deficient",
            ShortInputWarning,
            stacklevel=2,
        )
    mean = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1).reshape(d, d)
    cov = 0.5 * (cov + cov.T)
    values, vectors = np.linalg.eigh(cov)
    rows = vectors.T.copy()
    pivot = np.argmax(np.abs(rows), axis=1)
    signs = np.sign(rows[np.arange(d), pivot])
    signs[signs == 0] = 1.0
    rows *= signs[:, None]
    values = np.where(values < 0.0, 0.0, values)
    order = _canonical_order(values, rows)
    return KltBasis(mean, rows[order], values[order])


def apply_klt(basis, feats):
    """Project ``feats`` on ``basis`` after removing the mean of ``feats``."""
    x = np.asarray(getattr(feats, "vectors", feats), dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != basis.dim:
        raise ValidationError(
            f"feature dimension {x.shape[-1]} does not match basis dimension {basis.dim}"
        )
    out = (x - x.mean(axis=0)) @ basis.eigenvectors.T
    K = getattr(feats, "K", 1)
    J = getattr(feats, "J", basis.dim)
    return StackedFeatures(out, K, J)
