"""The four analyses built on encoder outputs.

Subtype discovery (shifted one-tailed MWW per superset plus gsScore
breakdown), survival screening (median split and log-rank per node),
split reproducibility (train/test significance overlap compared across
levels), and subtype classification (stratified cross-validation over
the classifier variants).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .dataio import ClinicalTable, ExpressionMatrix
from .embedding import TsneResult, dbscan, tsne_exact
from .errors import ConfigError, ConsistencyError, DegenerateError, PipelineError
from .genesets import GeneSetCollection, build_mask
from .netcore import (
    CvResult,
    Model,
    TrainConfig,
    build_autoencoder,
    build_classifier,
    build_dense_classifier,
    build_geneset_classifier,
    encode,
    kfold_cv,
    pca,
    train,
)
from .stats import (
    GsScoreEntry,
    SurvivalGroup,
    TestResult,
    gs_score,
    jaccard,
    km_curve,
    logrank,
    median_split,
    mww_one_tailed,
    pscore,
    select_high_impact,
    two_prop_ztest,
)

GENESET_SHIFT = 0.5  # location shift for per-gene-set MWW score columns


@dataclass(frozen=True)
class SupersetHit:
    """One differentially active superset and its high-impact gene sets."""

    index: int
    direction: str  # "up" or "down"
    result: TestResult
    high_impact: tuple[GsScoreEntry, ...]


@dataclass(frozen=True)
class SubtypeReport:
    cluster_labels: np.ndarray  # per sample; -1 = noise
    target_cluster: int
    up_supersets: tuple[SupersetHit, ...]
    down_supersets: tuple[SupersetHit, ...]
    shift: float
    p_threshold: float
    set_names: tuple[str, ...]
    embedding: TsneResult | None = None


def _superset_weights(model: Model) -> np.ndarray:
    if len(model.layers) < 2 or model.layers[1].kind != "dense":
        raise ConsistencyError("model has no dense superset layer at position 2")
    return model.weights[1]


def _score_entries(
    gs_acts: np.ndarray,
    weights_row: np.ndarray,
    g1: np.ndarray,
    g2: np.ndarray,
    set_names: Sequence[str],
    direction: str,
) -> list[GsScoreEntry]:
    entries = []
    for i, name in enumerate(set_names):
        a1, a2 = gs_acts[i, g1], gs_acts[i, g2]
        mu1, mu2 = float(a1.mean()), float(a2.mean())
        w = float(weights_row[i])
        if direction == "up":
            p = mww_one_tailed(a1, a2, GENESET_SHIFT).p_value
        else:
            p = mww_one_tailed(a2, a1, GENESET_SHIFT).p_value
        entries.append(
            GsScoreEntry(name, gs_score(mu1, mu2, w), w, mu1, mu2, pscore(p))
        )
    return entries


def subtype_pipeline(
    model: Model,
    data,
    shift: float,
    p_threshold: float = 0.01,
    cluster_labels: np.ndarray | None = None,
    target_cluster: int | None = None,
    perplexity: float = 30.0,
    tsne_iters: int = 1000,
    eps: float = 3.0,
    min_pts: int = 5,
    seed: int | None = None,
) -> SubtypeReport:
    """Differential superset analysis of one cluster against the rest.

    Clusters come either from ``cluster_labels`` (-1 = noise) or from
    t-SNE of the superset outputs followed by DBSCAN. The target cluster
    (group 1) defaults to the smallest one; group 2 is every other
    non-noise sample. A superset is up when MWW(g1, g2, shift) has
    p < p_threshold, down for the mirrored test; each significant
    superset gets gsScore entries filtered by the 2-sd rule.
    """
    gs_acts, ss_acts = encode(model, data)
    n = ss_acts.shape[1]
    embedding = None
    if cluster_labels is None:
        embedding = tsne_exact(ss_acts.T, perplexity, tsne_iters, seed=seed)
        labels = dbscan(embedding.embedding, eps, min_pts)
    else:
        labels = np.asarray(cluster_labels, dtype=np.int64)
        if labels.shape != (n,):
            raise ConfigError(
                f"cluster_labels length {labels.size} does not match {n} samples"
            )
    clusters = sorted(int(c) for c in set(labels.tolist()) if c != -1)
    if len(clusters) < 2:
        raise PipelineError(
            f"need >= 2 clusters to compare, found {len(clusters)} "
            f"(noise excluded)"
        )
    if target_cluster is None:
        target_cluster = min(clusters, key=lambda c: ((labels == c).sum(), c))
    elif target_cluster not in clusters:
        raise ConfigError(f"target cluster {target_cluster} not among {clusters}")
    g1 = np.flatnonzero(labels == target_cluster)
    g2 = np.flatnonzero((labels != target_cluster) & (labels != -1))

    set_names = model.set_names or tuple(
        f"set_{i}" for i in range(gs_acts.shape[0])
    )
    w2 = _superset_weights(model)
    up_hits: list[SupersetHit] = []
    down_hits: list[SupersetHit] = []
    for j in range(ss_acts.shape[0]):
        x1, x2 = ss_acts[j, g1], ss_acts[j, g2]
        up = mww_one_tailed(x1, x2, shift)
        if up.p_value < p_threshold:
            entries = _score_entries(gs_acts, w2[j], g1, g2, set_names, "up")
            up_hits.append(
                SupersetHit(j, "up", up, select_high_impact(entries, "up"))
            )
            continue
        down = mww_one_tailed(x2, x1, shift)
        if down.p_value < p_threshold:
            entries = _score_entries(gs_acts, w2[j], g1, g2, set_names, "down")
            down_hits.append(
                SupersetHit(j, "down", down, select_high_impact(entries, "down"))
            )
    up_hits.sort(key=lambda h: (h.result.p_value, h.index))
    down_hits.sort(key=lambda h: (h.result.p_value, h.index))
    return SubtypeReport(
        labels,
        target_cluster,
        tuple(up_hits),
        tuple(down_hits),
        shift,
        p_threshold,
        set_names,
        embedding,
    )


@dataclass(frozen=True)
class SurvivalSetEntry:
    """A gene set's gsScore inside a superset plus its own log-rank test."""

    entry: GsScoreEntry
    logrank: TestResult | None  # None when the gene-set median split degenerates


@dataclass(frozen=True)
class SurvivalHit:
    index: int
    result: TestResult
    n_low: int
    n_high: int
    km_low: np.ndarray  # (time, survival) step points
    km_high: np.ndarray
    top_sets: tuple[SurvivalSetEntry, ...]


@dataclass(frozen=True)
class SurvivalReport:
    hits: tuple[SurvivalHit, ...]  # ordered by ascending p
    skipped: tuple[int, ...]  # supersets with a degenerate median split
    superset_p: float
    top_k: int
    set_names: tuple[str, ...]


def _survival_groups(
    clinical: ClinicalTable, low: np.ndarray, high: np.ndarray
) -> tuple[SurvivalGroup, SurvivalGroup]:
    return (
        SurvivalGroup(clinical.time_days[low], clinical.event[low], "low"),
        SurvivalGroup(clinical.time_days[high], clinical.event[high], "high"),
    )


def survival_pipeline(
    model: Model,
    data,
    clinical: ClinicalTable,
    superset_p: float = 0.001,
    top_k: int = 20,
) -> SurvivalReport:
    """Median-split log-rank screen over supersets, with gsScore rankings.

    Every superset output is split at its median; the two arms are
    compared by log-rank. For each significant superset, gene sets are
    ranked by gsScore computed between the same two arms (group 1 = the
    high-output arm) and the top k are reported together with each gene
    set's own median-split log-rank p.
    """
    sample_ids = getattr(data, "sample_ids", None)
    if sample_ids is not None and tuple(sample_ids) != clinical.sample_ids:
        raise ConsistencyError("expression and clinical sample order differ")
    gs_acts, ss_acts = encode(model, data)
    if ss_acts.shape[1] != len(clinical):
        raise ConsistencyError(
            f"{ss_acts.shape[1]} samples in data vs {len(clinical)} clinical rows"
        )
    if not clinical.event.any():
        raise DegenerateError("survival screen needs at least one event")
    set_names = model.set_names or tuple(
        f"set_{i}" for i in range(gs_acts.shape[0])
    )
    w2 = _superset_weights(model)
    hits: list[SurvivalHit] = []
    skipped: list[int] = []
    for j in range(ss_acts.shape[0]):
        try:
            low, high = median_split(ss_acts[j])
        except DegenerateError:
            skipped.append(j)
            continue
        g_low, g_high = _survival_groups(clinical, low, high)
        try:
            res = logrank(g_low, g_high)
        except DegenerateError:
            skipped.append(j)
            continue
        if res.p_value >= superset_p:
            continue
        entries: list[SurvivalSetEntry] = []
        for i, name in enumerate(set_names):
            mu1 = float(gs_acts[i, high].mean())  # group 1 = high-output arm
            mu2 = float(gs_acts[i, low].mean())
            w = float(w2[j, i])
            lr: TestResult | None
            try:
                s_low, s_high = median_split(gs_acts[i])
                lr = logrank(*_survival_groups(clinical, s_low, s_high))
            except DegenerateError:
                lr = None
            p_score = pscore(lr.p_value) if lr is not None else float("nan")
            entries.append(
                SurvivalSetEntry(
                    GsScoreEntry(name, gs_score(mu1, mu2, w), w, mu1, mu2, p_score),
                    lr,
                )
            )
        entries.sort(key=lambda e: (-e.entry.gs_score, e.entry.set_name))
        hits.append(
            SurvivalHit(
                j,
                res,
                int(low.size),
                int(high.size),
                km_curve(g_low),
                km_curve(g_high),
                tuple(entries[:top_k]),
            )
        )
    hits.sort(key=lambda h: (h.result.p_value, h.index))
    return SurvivalReport(tuple(hits), tuple(skipped), superset_p, top_k, set_names)


@dataclass(frozen=True)
class ReproReport:
    superset_jaccard: float
    geneset_jaccard: float
    superset_overlap: int
    superset_train_significant: int
    superset_test_significant: int
    geneset_overlap: int
    geneset_train_significant: int
    geneset_test_significant: int
    z_test: TestResult | None  # None when a train level had no significant sets
    flags: tuple[str, ...]
    seed: int


def _significant_nodes(
    acts: np.ndarray, clinical: ClinicalTable, sig_p: float
) -> set[int]:
    """Indices whose median-split log-rank p is below sig_p in this split."""
    out: set[int] = set()
    for j in range(acts.shape[0]):
        try:
            low, high = median_split(acts[j])
            res = logrank(*_survival_groups(clinical, low, high))
        except DegenerateError:
            continue
        if res.p_value < sig_p:
            out.add(j)
    return out


def repro_pipeline(
    data: ExpressionMatrix,
    clinical: ClinicalTable,
    genesets: GeneSetCollection,
    split: float = 0.6,
    sig_p: float = 0.05,
    seed: int = 0,
    superset_dim: int = 200,
    config: TrainConfig | None = None,
) -> ReproReport:
    """Train on a random split, screen both splits, compare overlap levels.

    The autoencoder is trained on ``split`` of the samples only; both
    splits are then encoded and screened for survival-significant nodes
    (median split within each split separately). The Jaccard overlap of
    train- and test-significant sets is computed for supersets and gene
    sets, and a one-sided two-proportion z-test compares the superset
    overlap proportion against the gene-set one.
    """
    if tuple(data.sample_ids) != clinical.sample_ids:
        raise ConsistencyError("expression and clinical sample order differ")
    if not 0 < split < 1:
        raise ConfigError(f"split must be in (0, 1), got {split}")
    if config is None:
        config = TrainConfig(seed=seed)
    rng = np.random.default_rng(seed)
    n = data.n_samples
    n_train = int(round(split * n))
    if n_train < 2 or n - n_train < 2:
        raise ConfigError(f"split {split} leaves too few samples on one side")
    perm = rng.permutation(n)
    tr_ids = tuple(data.sample_ids[i] for i in sorted(perm[:n_train]))
    te_ids = tuple(data.sample_ids[i] for i in sorted(perm[n_train:]))
    expr_tr, expr_te = data.subset_samples(tr_ids), data.subset_samples(te_ids)
    clin_tr, clin_te = clinical.subset(tr_ids), clinical.subset(te_ids)
    if not clin_tr.event.any() or not clin_te.event.any():
        raise PipelineError("both splits must retain at least one event")

    mask = build_mask(genesets, data.gene_ids)
    model = build_autoencoder(mask, superset_dim, rng=rng, seed=seed)
    train(model, expr_tr, config=config, rng=rng)
    gs_tr, ss_tr = encode(model, expr_tr)
    gs_te, ss_te = encode(model, expr_te)

    ss_train = _significant_nodes(ss_tr, clin_tr, sig_p)
    ss_test = _significant_nodes(ss_te, clin_te, sig_p)
    gs_train = _significant_nodes(gs_tr, clin_tr, sig_p)
    gs_test = _significant_nodes(gs_te, clin_te, sig_p)

    flags: list[str] = []
    z: TestResult | None = None
    if not ss_train:
        flags.append("no significant supersets in the training split")
    if not gs_train:
        flags.append("no significant gene sets in the training split")
    if ss_train and gs_train:
        z = two_prop_ztest(
            len(ss_train & ss_test),
            len(ss_train),
            len(gs_train & gs_test),
            len(gs_train),
        )
    return ReproReport(
        superset_jaccard=jaccard(ss_train, ss_test) if ss_train | ss_test else 0.0,
        geneset_jaccard=jaccard(gs_train, gs_test) if gs_train | gs_test else 0.0,
        superset_overlap=len(ss_train & ss_test),
        superset_train_significant=len(ss_train),
        superset_test_significant=len(ss_test),
        geneset_overlap=len(gs_train & gs_test),
        geneset_train_significant=len(gs_train),
        geneset_test_significant=len(gs_test),
        z_test=z,
        flags=tuple(flags),
        seed=seed,
    )


CLASSIFY_VARIANTS = ("superset", "geneset", "dense", "pca_dense")


@dataclass(frozen=True)
class ClassifyReport:
    variant: str
    cv: CvResult
    n_samples: int
    n_features: int
    pca_clipped: bool = False


def classify_pipeline(
    data: ExpressionMatrix,
    labels: Sequence[str],
    genesets: GeneSetCollection | None,
    variant: str = "superset",
    config: TrainConfig = TrainConfig(),
    superset_dim: int = 200,
    dense_hidden: Sequence[int] = (200,),
    pca_k: int = 500,
    k: int = 10,
) -> ClassifyReport:
    """Stratified k-fold accuracy of one classifier variant.

    superset: masked gene-set layer, superset layer, softmax.
    geneset: the same with the superset layer removed.
    dense: fully connected ReLU widths into softmax.
    pca_dense: dense variant on top-k principal-component scores.
    """
    if variant not in CLASSIFY_VARIANTS:
        raise ConfigError(
            f"unknown variant {variant!r}; expected one of {CLASSIFY_VARIANTS}"
        )
    labs = list(labels)
    if len(labs) != data.n_samples:
        raise ConsistencyError(
            f"{len(labs)} labels for {data.n_samples} samples"
        )
    class_names = tuple(sorted(set(labs)))
    if len(class_names) < 2:
        raise ConfigError("classification needs >= 2 classes")
    values = data.values
    pca_clipped = False
    if variant in ("superset", "geneset"):
        if genesets is None:
            raise ConfigError(f"variant {variant!r} requires gene sets")
        mask = build_mask(genesets, data.gene_ids)
        if variant == "superset":
            def build(rng):
                return build_classifier(mask, class_names, superset_dim, rng=rng)
        else:
            def build(rng):
                return build_geneset_classifier(mask, class_names, rng=rng)
    elif variant == "dense":
        def build(rng):
            return build_dense_classifier(
                data.n_genes, dense_hidden, class_names, rng=rng
            )
    else:
        res = pca(values, pca_k)
        values = res.scores
        pca_clipped = res.clipped
        width = values.shape[0]

        def build(rng):
            return build_dense_classifier(width, dense_hidden, class_names, rng=rng)

    cv = kfold_cv(values, labs, build, k=k, config=config)
    return ClassifyReport(variant, cv, data.n_samples, values.shape[0], pca_clipped)
