"""Principal components via singular value decomposition.

Data is [n_features x n_samples]; each feature is centered across samples.
Components come back as orthonormal columns ordered by descending
explained variance, with a deterministic sign convention (the largest-
magnitude entry of each component is positive).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, DomainError


@dataclass(frozen=True)
class PcaResult:
    components: np.ndarray  # [n_features x k], orthonormal columns
    scores: np.ndarray  # [k x n_samples]
    explained_variance: np.ndarray  # [k], non-increasing
    mean: np.ndarray  # [n_features]
    rank: int
    clipped: bool  # True when the requested k exceeded the rank


def pca(data: np.ndarray, k: int) -> PcaResult:
    """Top-k principal components of column-sample data.

    Asking for more components than the matrix rank supports clips k to
    the rank and emits a warning rather than failing.
    """
    x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] < 1 or x.shape[1] < 2:
        raise ConfigError(f"pca needs a 2-D matrix with >= 2 samples, got {x.shape}")
    if not np.isfinite(x).all():
        raise DomainError("pca input must be finite")
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    mean = x.mean(axis=1)
    centered = x - mean[:, None]
    u, s, _ = np.linalg.svd(centered, full_matrices=False)
    tol = s.max(initial=0.0) * max(x.shape) * np.finfo(np.float64).eps
    rank = int((s > tol).sum())
    clipped = k > rank
    if clipped:
        warnings.warn(
            f"requested {k} components but rank is {rank}; returning {rank}",
            stacklevel=2,
        )
        k = rank
    components = u[:, :k].copy()
    # deterministic sign: make each component's largest-magnitude entry positive
    for j in range(k):
        i = int(np.abs(components[:, j]).argmax())
        if components[i, j] < 0:
            components[:, j] = -components[:, j]
    scores = components.T @ centered
    explained = (s[:k] ** 2) / (x.shape[1] - 1)
    return PcaResult(components, scores, explained, mean, rank, clipped)
