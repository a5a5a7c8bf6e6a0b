"""Synthetic data with planted ground truth for tests and demos.

Each generator builds a non-overlapping block gene-set collection, a
non-negative expression matrix on a logTPM-like scale, and the planted
structure (group shifts, hazard links or class signatures) needed to
verify that the pipelines recover known signal. IDs follow fixed
patterns: genes G0001.., samples S0001.., sets SET01...
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataio import ClinicalTable, ExpressionMatrix
from .errors import ConfigError
from .genesets import GeneSet, GeneSetCollection

BASE_MEAN = 4.0
BASE_SD = 1.0
FOLLOWUP_CAP = 1825


def _ids(prefix: str, n: int, width: int) -> tuple[str, ...]:
    return tuple(f"{prefix}{i + 1:0{width}d}" for i in range(n))


def _block_collection(
    gene_ids: tuple[str, ...], n_sets: int
) -> GeneSetCollection:
    """Consecutive equal blocks of genes, one per set; leftovers unassigned."""
    size = len(gene_ids) // n_sets
    if size < 1:
        raise ConfigError(f"{len(gene_ids)} genes cannot fill {n_sets} sets")
    names = _ids("SET", n_sets, 2 if n_sets < 100 else 3)
    sets = tuple(
        GeneSet(names[k], "synthetic block", gene_ids[k * size : (k + 1) * size])
        for k in range(n_sets)
    )
    return GeneSetCollection(sets)


def _baseline(
    n_genes: int, n_samples: int, rng: np.random.Generator
) -> np.ndarray:
    return np.maximum(rng.normal(BASE_MEAN, BASE_SD, (n_genes, n_samples)), 0.0)


def _set_rows(c: GeneSetCollection, gene_index: dict, names) -> np.ndarray:
    rows = []
    for name in names:
        rows.extend(gene_index[g] for g in c.get(name).members)
    return np.asarray(rows, dtype=np.intp)


@dataclass(frozen=True)
class SubtypeTruth:
    expression: ExpressionMatrix
    collection: GeneSetCollection
    groups: tuple[str, ...]  # per-sample "g1" / "g2"
    planted: tuple[str, ...]  # names of the up-shifted sets


def synth_subtype(
    n_samples: int = 200,
    n_genes: int = 300,
    n_sets: int = 30,
    n_planted: int = 5,
    effect: float = 2.0,
    seed: int = 17,
) -> SubtypeTruth:
    """Two sample groups; the planted sets are up-shifted in group 1.

    The shift is ``effect`` baseline standard deviations applied to every
    member gene of every planted set, in group-1 samples only.
    """
    if n_planted > n_sets:
        raise ConfigError("cannot plant more sets than exist")
    rng = np.random.default_rng(seed)
    gene_ids = _ids("G", n_genes, 4)
    sample_ids = _ids("S", n_samples, 4)
    collection = _block_collection(gene_ids, n_sets)
    values = _baseline(n_genes, n_samples, rng)

    perm = rng.permutation(n_samples)
    g1 = np.zeros(n_samples, dtype=bool)
    g1[perm[: n_samples // 2]] = True
    planted = collection.names[:n_planted]
    gene_index = {g: i for i, g in enumerate(gene_ids)}
    rows = _set_rows(collection, gene_index, planted)
    values[np.ix_(rows, np.flatnonzero(g1))] += effect * BASE_SD

    groups = tuple("g1" if f else "g2" for f in g1)
    expr = ExpressionMatrix(gene_ids, sample_ids, values)
    return SubtypeTruth(expr, collection, groups, planted)


@dataclass(frozen=True)
class SurvivalTruth:
    expression: ExpressionMatrix
    collection: GeneSetCollection
    clinical: ClinicalTable
    planted: tuple[str, ...]  # hazard-linked set names
    risk_group: tuple[str, ...]  # per-sample "high" / "low"


def synth_survival(
    n_samples: int = 160,
    n_genes: int = 200,
    n_sets: int = 20,
    effect: float = 2.0,
    censor_fraction: float = 0.15,
    seed: int = 29,
) -> SurvivalTruth:
    """One hazard-linked gene set: its expression is high in short survivors.

    Half the samples form a high-risk group with early follow-up times
    and the planted set's genes up-shifted by ``effect`` baseline sds.
    """
    rng = np.random.default_rng(seed)
    gene_ids = _ids("G", n_genes, 4)
    sample_ids = _ids("S", n_samples, 4)
    collection = _block_collection(gene_ids, n_sets)
    values = _baseline(n_genes, n_samples, rng)

    perm = rng.permutation(n_samples)
    high = np.zeros(n_samples, dtype=bool)
    high[perm[: n_samples // 2]] = True
    planted = (collection.names[0],)
    gene_index = {g: i for i, g in enumerate(gene_ids)}
    rows = _set_rows(collection, gene_index, planted)
    values[np.ix_(rows, np.flatnonzero(high))] += effect * BASE_SD

    times = np.where(
        high,
        rng.integers(30, 500, n_samples),
        rng.integers(900, FOLLOWUP_CAP, n_samples),
    ).astype(np.int64)
    events = rng.random(n_samples) >= censor_fraction
    clinical = ClinicalTable(sample_ids, times, events)
    expr = ExpressionMatrix(gene_ids, sample_ids, values)
    risk = tuple("high" if f else "low" for f in high)
    return SurvivalTruth(expr, collection, clinical, planted, risk)


def synth_survival_distributed(
    n_samples: int = 200,
    n_genes: int = 300,
    n_sets: int = 30,
    n_planted: int = 5,
    effect: float = 1.0,
    set_noise: float = 0.8,
    censor_fraction: float = 0.1,
    seed: int = 101,
) -> SurvivalTruth:
    """Hazard driven by a latent factor spread over several noisy sets.

    Every planted set tracks the same per-sample latent risk z, but each
    (set, sample) cell adds independent noise, so single sets are
    unreliable risk markers while their aggregate remains stable. Higher
    z means shorter survival.
    """
    if n_planted > n_sets:
        raise ConfigError("cannot plant more sets than exist")
    rng = np.random.default_rng(seed)
    gene_ids = _ids("G", n_genes, 4)
    sample_ids = _ids("S", n_samples, 4)
    collection = _block_collection(gene_ids, n_sets)
    values = _baseline(n_genes, n_samples, rng)

    z = rng.normal(0.0, 1.0, n_samples)
    planted = collection.names[:n_planted]
    gene_index = {g: i for i, g in enumerate(gene_ids)}
    for name in planted:
        rows = _set_rows(collection, gene_index, (name,))
        per_sample = effect * (z + rng.normal(0.0, set_noise, n_samples))
        values[rows, :] += per_sample[None, :]
    np.maximum(values, 0.0, out=values)

    raw = rng.exponential(600.0 * np.exp(-0.9 * z))
    times = np.minimum(np.maximum(raw, 1.0), FOLLOWUP_CAP).astype(np.int64)
    censored = (raw > FOLLOWUP_CAP) | (rng.random(n_samples) < censor_fraction)
    clinical = ClinicalTable(sample_ids, times, ~censored)
    expr = ExpressionMatrix(gene_ids, sample_ids, values)
    risk = tuple("high" if v > 0 else "low" for v in z)
    return SurvivalTruth(expr, collection, clinical, planted, risk)


@dataclass(frozen=True)
class ClassTruth:
    expression: ExpressionMatrix
    collection: GeneSetCollection
    labels: tuple[str, ...]


def synth_classes(
    n_per_class: int = 40,
    n_classes: int = 4,
    n_genes: int = 160,
    n_sets: int = 8,
    effect: float = 3.0,
    seed: int = 11,
) -> ClassTruth:
    """Linearly separable classes, each marked by its own set signature.

    Class c up-shifts the sets whose index is congruent to c modulo the
    class count, so every class has a disjoint block signature.
    """
    if n_sets < n_classes:
        raise ConfigError("need at least one set per class")
    rng = np.random.default_rng(seed)
    n_samples = n_per_class * n_classes
    gene_ids = _ids("G", n_genes, 4)
    sample_ids = _ids("S", n_samples, 4)
    collection = _block_collection(gene_ids, n_sets)
    values = _baseline(n_genes, n_samples, rng)
    gene_index = {g: i for i, g in enumerate(gene_ids)}

    class_names = tuple(f"C{c + 1}" for c in range(n_classes))
    labels = np.repeat(np.asarray(class_names, dtype=object), n_per_class)
    labels = labels[rng.permutation(n_samples)]
    for c in range(n_classes):
        signature = [
            collection.names[k] for k in range(n_sets) if k % n_classes == c
        ]
        rows = _set_rows(collection, gene_index, signature)
        cols = np.flatnonzero(labels == class_names[c])
        values[np.ix_(rows, cols)] += effect * BASE_SD
    expr = ExpressionMatrix(gene_ids, sample_ids, values)
    return ClassTruth(expr, collection, tuple(labels.tolist()))
