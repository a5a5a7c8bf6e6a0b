"""Exact t-SNE (no tree approximation) and plain DBSCAN.

Used to cut encoder outputs into sample groups: embed to 2-D, then
density-cluster, with low-density samples labeled noise (-1) and dropped
from downstream tests.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DomainError

EXAGGERATION = 12.0
EXAG_ITERS = 250
ENTROPY_TOL = 1e-5
MAX_BISECTIONS = 50
LEARNING_RATE = 200.0
MIN_GAIN = 0.01
P_FLOOR = 1e-12


@dataclass(frozen=True)
class TsneResult:
    embedding: np.ndarray  # [n x 2]
    kl_initial: float  # KL at the random initialization
    kl_post_exag: float  # KL right after early exaggeration is removed
    kl_final: float
    iters: int


def _squared_distances(x: np.ndarray) -> np.ndarray:
    sq = (x * x).sum(axis=1)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (x @ x.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def _conditional_p(d2: np.ndarray, perplexity: float) -> np.ndarray:
    """Row-wise Gaussian affinities with bandwidths matched to perplexity.

    For each point the precision beta is found by bisection so the row
    entropy equals log(perplexity) within 1e-5, at most 50 iterations.
    """
    n = d2.shape[0]
    target = math.log(perplexity)
    p = np.zeros((n, n), dtype=np.float64)
    for i in range(n):
        row = np.delete(d2[i], i)
        beta, beta_min, beta_max = 1.0, -math.inf, math.inf
        for _ in range(MAX_BISECTIONS):
            w = np.exp(-row * beta)
            sw = w.sum()
            if sw <= 0:
                h = 0.0
                probs = np.zeros_like(w)
            else:
                probs = w / sw
                h = math.log(sw) + beta * float((row * w).sum()) / sw
            diff = h - target
            if abs(diff) < ENTROPY_TOL:
                break
            if diff > 0:  # entropy too high: sharpen
                beta_min = beta
                beta = beta * 2.0 if beta_max == math.inf else 0.5 * (beta + beta_max)
            else:
                beta_max = beta
                beta = beta / 2.0 if beta_min == -math.inf else 0.5 * (beta + beta_min)
        p[i, np.arange(n) != i] = probs
    return p


def _kl_divergence(p: np.ndarray, y: np.ndarray) -> float:
    num = 1.0 / (1.0 + _squared_distances(y))
    np.fill_diagonal(num, 0.0)
    q = np.maximum(num / num.sum(), P_FLOOR)
    pc = np.maximum(p, P_FLOOR)
    mask = ~np.eye(p.shape[0], dtype=bool)
    return float((p[mask] * np.log(pc[mask] / q[mask])).sum())


def tsne_exact(
    points: np.ndarray,
    perplexity: float = 30.0,
    iters: int = 1000,
    seed: int | None = None,
    rng: np.random.Generator | None = None,
) -> TsneResult:
    """Exact t-SNE to 2-D with early exaggeration and adaptive gains.

    Momentum is 0.5 for the first 250 iterations and 0.8 afterwards;
    affinities are multiplied by 12 during that first phase. The KL
    divergence is recorded at initialization, right after exaggeration
    ends, and at the last iteration. Deterministic given seed/rng.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"points must be 2-D, got shape {x.shape}")
    if not np.isfinite(x).all():
        raise DomainError("t-SNE input must be finite")
    n = x.shape[0]
    if perplexity <= 0:
        raise ConfigError("perplexity must be positive")
    if n < 3 * perplexity:
        raise ConfigError(
            f"{n} points cannot support perplexity {perplexity} "
            f"(need n >= 3*perplexity)"
        )
    if iters < 1:
        raise ConfigError("iters must be >= 1")
    if rng is None:
        rng = np.random.default_rng(seed)

    cond = _conditional_p(_squared_distances(x), perplexity)
    p = (cond + cond.T) / (2.0 * n)
    p = np.maximum(p, P_FLOOR)

    y = rng.standard_normal((n, 2)) * 1e-4
    kl_initial = _kl_divergence(p, y)

    exag_end = min(EXAG_ITERS, iters)
    p = p * EXAGGERATION
    velocity = np.zeros_like(y)
    gains = np.ones_like(y)
    kl_post_exag = kl_initial
    for it in range(iters):
        num = 1.0 / (1.0 + _squared_distances(y))
        np.fill_diagonal(num, 0.0)
        q = np.maximum(num / num.sum(), P_FLOOR)
        pq = (p - q) * num
        grad = 4.0 * ((np.diag(pq.sum(axis=1)) - pq) @ y)

        momentum = 0.5 if it < EXAG_ITERS else 0.8
        same_sign = np.sign(grad) == np.sign(velocity)
        gains = np.where(same_sign, gains * 0.8, gains + 0.2)
        np.maximum(gains, MIN_GAIN, out=gains)
        velocity = momentum * velocity - LEARNING_RATE * (gains * grad)
        y = y + velocity
        y = y - y.mean(axis=0)

        if it + 1 == exag_end:
            p = p / EXAGGERATION
            kl_post_exag = _kl_divergence(p, y)
    kl_final = _kl_divergence(p, y)
    return TsneResult(y, kl_initial, kl_post_exag, kl_final, iters)


def dbscan(points: np.ndarray, eps: float, min_pts: int) -> np.ndarray:
    """Density clustering on a small point set; noise is labeled -1.

    A point is core when its eps-ball (itself included) holds at least
    min_pts points. Clusters grow breadth-first from core points in index
    order, so labels are deterministic.
    """
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2:
        raise ConfigError(f"points must be 2-D, got shape {x.shape}")
    if eps <= 0:
        raise ConfigError("eps must be positive")
    if min_pts < 1:
        raise ConfigError("min_pts must be >= 1")
    n = x.shape[0]
    d2 = _squared_distances(x)
    within = d2 <= eps * eps
    core = within.sum(axis=1) >= min_pts
    labels = np.full(n, -1, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != -1 or not core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            j = queue.popleft()
            for k in np.flatnonzero(within[j]):
                if labels[k] == -1:
                    labels[k] = cluster
                    if core[k]:
                        queue.append(int(k))
        cluster += 1
    return labels
