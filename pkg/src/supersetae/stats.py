"""Statistical primitives for the analysis pipelines.

Covers the one-tailed shifted Mann-Whitney-Wilcoxon test (exact for small
tie-free samples, normal approximation otherwise), PScore, gsScore with
2-sd selection, median splits, Kaplan-Meier curves, the two-group
log-rank test, the Jaccard index and the pooled two-proportion z-test.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.stats import chi2, norm

from .errors import ConfigError, DegenerateError, DomainError

EXACT_MWW_MAX_N = 12  # exact enumeration cutoff on the pooled sample size
PSCORE_FLOOR = 1e-300


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    method: str
    shift: float | None = None

    def __post_init__(self):
        if not math.isfinite(self.statistic):
            raise DomainError(f"non-finite test statistic {self.statistic}")
        if not 0.0 <= self.p_value <= 1.0:
            raise DomainError(f"p-value {self.p_value} outside [0, 1]")


@dataclass(frozen=True)
class SurvivalGroup:
    """Follow-up times and death indicators for one arm of a comparison."""

    times: np.ndarray
    events: np.ndarray
    group_id: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        e = np.asarray(self.events, dtype=bool)
        if t.shape != e.shape or t.ndim != 1:
            raise DomainError("times and events must be 1-D and equally long")
        if t.size and t.min() < 0:
            raise DomainError("survival times must be non-negative")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "events", e)
        t.setflags(write=False)
        e.setflags(write=False)

    def __len__(self) -> int:
        return int(self.times.size)


def midranks(pooled: np.ndarray) -> np.ndarray:
    """Ranks 1..n with tied values sharing the average of their positions."""
    order = np.argsort(pooled, kind="mergesort")
    ranks = np.empty(pooled.size, dtype=np.float64)
    sorted_vals = pooled[order]
    i = 0
    while i < pooled.size:
        j = i
        while j + 1 < pooled.size and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def _exact_mww_p(n1: int, n2: int, u_obs: int) -> float:
    """P(U >= u_obs) by counting rank subsets with a subset-sum table."""
    total = n1 + n2
    max_sum = total * (total + 1) // 2
    # counts[k][s] = number of k-subsets of ranks 1..total with rank sum s
    counts = np.zeros((n1 + 1, max_sum + 1), dtype=np.int64)
    counts[0, 0] = 1
    for r in range(1, total + 1):
        for k in range(min(n1, r), 0, -1):
            counts[k, r:] += counts[k - 1, : max_sum + 1 - r]
    offset = n1 * (n1 + 1) // 2  # U = rank sum − n1(n1+1)/2
    favorable = int(counts[n1, offset + u_obs :].sum())
    return favorable / math.comb(total, n1)


def mww_one_tailed(x, y, shift: float = 0.0) -> TestResult:
    """One-tailed MWW U test of H1: x stochastically greater than y + shift.

    The shift is subtracted from every x value before pooling and ranking
    with midranks. Small tie-free samples (pooled n <= 12) are tested by
    exact enumeration; otherwise the normal approximation applies, with
    tie-corrected variance and a 0.5 continuity correction. A pooled
    sample with every value tied has zero variance and returns p = 1.
    """
    xv = np.asarray(x, dtype=np.float64).ravel() - shift
    yv = np.asarray(y, dtype=np.float64).ravel()
    n1, n2 = xv.size, yv.size
    if n1 < 1 or n2 < 1:
        raise DomainError("both samples must be non-empty")
    pooled = np.concatenate([xv, yv])
    if not np.isfinite(pooled).all():
        raise DomainError("samples must be finite")
    ranks = midranks(pooled)
    r1 = float(ranks[:n1].sum())
    u1 = r1 - n1 * (n1 + 1) / 2.0

    no_ties = np.unique(pooled).size == pooled.size
    if n1 + n2 <= EXACT_MWW_MAX_N and no_ties:
        p = _exact_mww_p(n1, n2, int(round(u1)))
        return TestResult(u1, p, "mww_exact", shift)

    mean_u = n1 * n2 / 2.0
    total = n1 + n2
    _, tie_counts = np.unique(pooled, return_counts=True)
    tie_term = float(((tie_counts**3) - tie_counts).sum()) / (total * (total - 1))
    var_u = n1 * n2 / 12.0 * ((total + 1) - tie_term)
    if var_u <= 0:
        return TestResult(u1, 1.0, "mww_normal", shift)
    z = (u1 - 0.5 - mean_u) / math.sqrt(var_u)
    return TestResult(u1, float(norm.sf(z)), "mww_normal", shift)


def pscore(p: float) -> float:
    """-log10(p), with p clamped below at 1e-300."""
    if p > 1.0:
        raise DomainError(f"p-value {p} > 1")
    if p <= 0.0:
        warnings.warn(f"non-positive p-value {p} clamped to {PSCORE_FLOOR}",
                      stacklevel=2)
        p = PSCORE_FLOOR
    return -math.log10(max(p, PSCORE_FLOOR))


def gs_score(mu1: float, mu2: float, weight: float) -> float:
    """Contribution of a gene set to a superset: (mu1 - mu2) * weight."""
    return (mu1 - mu2) * weight


@dataclass(frozen=True)
class GsScoreEntry:
    """One gene set's contribution to a superset, with its own test score."""

    set_name: str
    gs_score: float
    weight: float
    mu1: float
    mu2: float
    p_score: float

    def __post_init__(self):
        if self.gs_score != (self.mu1 - self.mu2) * self.weight:
            raise DomainError(
                f"gs_score {self.gs_score} != (mu1-mu2)*weight for "
                f"{self.set_name!r}"
            )


def select_high_impact(
    entries, direction: str
) -> tuple[GsScoreEntry, ...]:
    """Keep entries whose gsScore passes the 2-sample-sd cutoff.

    ``up`` keeps gs_score > +2 sd, ``down`` keeps gs_score < -2 sd, where
    sd is the sample standard deviation of all scores in the superset.
    Results sort by |gs_score| descending. A zero sd selects nothing.
    """
    entries = tuple(entries)
    if direction not in ("up", "down"):
        raise ConfigError(f"direction must be 'up' or 'down', got {direction!r}")
    if len(entries) < 2:
        raise DomainError("high-impact selection needs >= 2 entries")
    scores = np.array([e.gs_score for e in entries])
    sd = float(scores.std(ddof=1))
    if sd == 0.0:
        warnings.warn("all gsScores identical; nothing exceeds 2 sd", stacklevel=2)
        return ()
    if direction == "up":
        kept = [e for e in entries if e.gs_score > 2.0 * sd]
    else:
        kept = [e for e in entries if e.gs_score < -2.0 * sd]
    return tuple(sorted(kept, key=lambda e: (-abs(e.gs_score), e.set_name)))


def median_split(values) -> tuple[np.ndarray, np.ndarray]:
    """Indices of samples at or below the median, and strictly above it."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 4:
        raise DomainError(f"median split needs >= 4 samples, got {v.size}")
    if not np.isfinite(v).all():
        raise DomainError("median split values must be finite")
    med = float(np.median(v))
    low = np.flatnonzero(v <= med)
    high = np.flatnonzero(v > med)
    if low.size == 0 or high.size == 0:
        raise DegenerateError("median split left one group empty")
    return low, high


def logrank(g1: SurvivalGroup, g2: SurvivalGroup) -> TestResult:
    """Two-group log-rank test: chi-square with 1 df, two-sided p.

    At each distinct event time the observed deaths in group 1 are
    compared with the hypergeometric expectation given the risk sets.
    """
    if len(g1) == 0 or len(g2) == 0:
        raise DomainError("both groups must be non-empty")
    times = np.concatenate([g1.times, g2.times])
    events = np.concatenate([g1.events, g2.events])
    in1 = np.zeros(times.size, dtype=bool)
    in1[: len(g1)] = True
    if not events.any():
        raise DegenerateError("log-rank undefined without any event")
    observed = expected = variance = 0.0
    for t in np.unique(times[events]):
        at_risk = times >= t
        n = float(at_risk.sum())
        n1 = float((at_risk & in1).sum())
        dead = events & (times == t)
        d = float(dead.sum())
        d1 = float((dead & in1).sum())
        observed += d1
        expected += d * n1 / n
        if n > 1:
            variance += d * (n1 / n) * (1.0 - n1 / n) * (n - d) / (n - 1.0)
    if variance == 0.0:
        return TestResult(0.0, 1.0, "logrank")
    stat = (observed - expected) ** 2 / variance
    return TestResult(float(stat), float(chi2.sf(stat, 1)), "logrank")


def km_curve(g: SurvivalGroup) -> np.ndarray:
    """Product-limit survival estimate as (time, probability) step points.

    Starts at (0, 1); one point per distinct event time. Censored
    subjects leave the risk set after their time without adding a step.
    """
    if len(g) == 0:
        raise DomainError("empty survival group")
    points = [(0.0, 1.0)]
    surv = 1.0
    for t in np.unique(g.times[g.events]):
        n = float((g.times >= t).sum())
        d = float((g.events & (g.times == t)).sum())
        surv *= 1.0 - d / n
        points.append((float(t), surv))
    return np.asarray(points, dtype=np.float64)


def jaccard(a, b) -> float:
    """|a & b| / |a | b|; two empty sets give 0 with a warning."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        warnings.warn("jaccard of two empty sets defined as 0", stacklevel=2)
        return 0.0
    return len(sa & sb) / len(union)


def two_prop_ztest(k1: int, n1: int, k2: int, n2: int) -> TestResult:
    """Pooled two-proportion z-test, one-sided for H1: k1/n1 > k2/n2."""
    if n1 < 1 or n2 < 1:
        raise DomainError("sample sizes must be >= 1")
    if not (0 <= k1 <= n1 and 0 <= k2 <= n2):
        raise DomainError("counts must satisfy 0 <= k <= n")
    p1, p2 = k1 / n1, k2 / n2
    pool = (k1 + k2) / (n1 + n2)
    sd = math.sqrt(pool * (1.0 - pool) * (1.0 / n1 + 1.0 / n2))
    if sd == 0.0:
        return TestResult(0.0, 0.5, "two_prop_z")
    z = (p1 - p2) / sd
    return TestResult(float(z), float(norm.sf(z)), "two_prop_z")
