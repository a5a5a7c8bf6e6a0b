"""Delimited and JSON report writers for the pipeline results.

TSV numbers are written with repr, so identical results produce
byte-identical files and values survive a round trip exactly. Missing
values (for example a degenerate gene-set log-rank) appear as NA.
"""

from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .netcore import History
from .pipelines import ClassifyReport, ReproReport, SubtypeReport, SurvivalReport


def _fmt(x) -> str:
    if x is None:
        return "NA"
    if isinstance(x, (float, np.floating)):
        v = float(x)
        return "NA" if math.isnan(v) else repr(v)
    return str(x)


def _write_tsv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(header) + "\n")
        for row in rows:
            fh.write("\t".join(_fmt(x) for x in row) + "\n")
    return path


def _write_json(path: Path, doc: dict) -> Path:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")
    return path


def write_matrix(
    path, values: np.ndarray, row_names: Sequence[str], col_names: Sequence[str],
    corner: str = "node",
) -> Path:
    """Node-by-sample TSV: rows are nodes, columns are samples."""
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(corner + "\t" + "\t".join(col_names) + "\n")
        for name, row in zip(row_names, values):
            fh.write(name + "\t" + "\t".join(repr(float(v)) for v in row) + "\n")
    return path


def write_history(history: History, path) -> Path:
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch,train_loss,val_loss\n")
        for i, (tr, va) in enumerate(zip(history.train_loss, history.val_loss), 1):
            fh.write(f"{i},{tr!r},{va!r}\n")
    return path


def write_dedup_audit(components, path) -> Path:
    rows = [
        (c.component_id, ",".join(c.member_names), c.representative, c.min_p_value)
        for c in components
    ]
    return _write_tsv(
        Path(path),
        ("component_id", "member_set_names", "representative_name", "min_p_value"),
        rows,
    )


def write_subtype_report(
    report: SubtypeReport, out_dir, sample_ids: Sequence[str] | None = None
) -> list[Path]:
    out = Path(out_dir)
    written = []
    hits = [*report.up_supersets, *report.down_supersets]
    written.append(
        _write_tsv(
            out / "subtype_supersets.tsv",
            ("superset", "direction", "u_statistic", "p_value", "shift"),
            [
                (h.index, h.direction, h.result.statistic, h.result.p_value,
                 h.result.shift)
                for h in hits
            ],
        )
    )
    impact_rows = []
    for h in hits:
        for e in h.high_impact:
            impact_rows.append(
                (h.index, h.direction, e.set_name, e.gs_score, e.weight,
                 e.mu1, e.mu2, e.p_score)
            )
    written.append(
        _write_tsv(
            out / "subtype_high_impact.tsv",
            ("superset", "direction", "set_name", "gs_score", "weight",
             "mu1", "mu2", "p_score"),
            impact_rows,
        )
    )
    ids = sample_ids or [f"sample_{i}" for i in range(report.cluster_labels.size)]
    written.append(
        _write_tsv(
            out / "subtype_clusters.tsv",
            ("sample_id", "cluster"),
            zip(ids, report.cluster_labels.tolist()),
        )
    )
    labels = report.cluster_labels
    written.append(
        _write_json(
            out / "subtype_summary.json",
            {
                "target_cluster": report.target_cluster,
                "shift": report.shift,
                "p_threshold": report.p_threshold,
                "n_samples": int(labels.size),
                "n_noise": int((labels == -1).sum()),
                "n_clusters": len(set(labels.tolist()) - {-1}),
                "up_supersets": [
                    {"superset": h.index, "p_value": h.result.p_value,
                     "high_impact": [e.set_name for e in h.high_impact]}
                    for h in report.up_supersets
                ],
                "down_supersets": [
                    {"superset": h.index, "p_value": h.result.p_value,
                     "high_impact": [e.set_name for e in h.high_impact]}
                    for h in report.down_supersets
                ],
            },
        )
    )
    return written


def write_survival_report(report: SurvivalReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    written = []
    written.append(
        _write_tsv(
            out / "survival_supersets.tsv",
            ("superset", "statistic", "p_value", "n_low", "n_high"),
            [
                (h.index, h.result.statistic, h.result.p_value, h.n_low, h.n_high)
                for h in report.hits
            ],
        )
    )
    set_rows = []
    for h in report.hits:
        for rank, se in enumerate(h.top_sets, 1):
            e = se.entry
            set_rows.append(
                (h.index, rank, e.set_name, e.gs_score, e.weight, e.mu1, e.mu2,
                 se.logrank.p_value if se.logrank else None, e.p_score)
            )
    written.append(
        _write_tsv(
            out / "survival_top_sets.tsv",
            ("superset", "rank", "set_name", "gs_score", "weight", "mu1", "mu2",
             "geneset_logrank_p", "p_score"),
            set_rows,
        )
    )
    km_rows = []
    for h in report.hits:
        for group, curve in (("low", h.km_low), ("high", h.km_high)):
            for t, s in curve:
                km_rows.append((h.index, group, t, s))
    written.append(
        _write_tsv(
            out / "km_curves.tsv",
            ("superset", "group", "time", "survival"),
            km_rows,
        )
    )
    written.append(
        _write_json(
            out / "survival_summary.json",
            {
                "superset_p": report.superset_p,
                "top_k": report.top_k,
                "skipped_supersets": list(report.skipped),
                "significant": [
                    {"superset": h.index, "statistic": h.result.statistic,
                     "p_value": h.result.p_value,
                     "top_sets": [se.entry.set_name for se in h.top_sets]}
                    for h in report.hits
                ],
            },
        )
    )
    return written


def write_repro_report(report: ReproReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    rows = [
        ("superset_jaccard", report.superset_jaccard),
        ("geneset_jaccard", report.geneset_jaccard),
        ("superset_overlap", report.superset_overlap),
        ("superset_train_significant", report.superset_train_significant),
        ("superset_test_significant", report.superset_test_significant),
        ("geneset_overlap", report.geneset_overlap),
        ("geneset_train_significant", report.geneset_train_significant),
        ("geneset_test_significant", report.geneset_test_significant),
        ("z_statistic", report.z_test.statistic if report.z_test else None),
        ("z_p_value", report.z_test.p_value if report.z_test else None),
        ("seed", report.seed),
    ]
    written = [_write_tsv(out / "repro_summary.tsv", ("key", "value"), rows)]
    written.append(
        _write_json(
            out / "repro_summary.json",
            {
                "superset": {
                    "jaccard": report.superset_jaccard,
                    "overlap": report.superset_overlap,
                    "train_significant": report.superset_train_significant,
                    "test_significant": report.superset_test_significant,
                },
                "geneset": {
                    "jaccard": report.geneset_jaccard,
                    "overlap": report.geneset_overlap,
                    "train_significant": report.geneset_train_significant,
                    "test_significant": report.geneset_test_significant,
                },
                "z_test": (
                    {"statistic": report.z_test.statistic,
                     "p_value": report.z_test.p_value}
                    if report.z_test
                    else None
                ),
                "flags": list(report.flags),
                "seed": report.seed,
            },
        )
    )
    return written


def write_classify_report(report: ClassifyReport, out_dir) -> list[Path]:
    out = Path(out_dir)
    written = [
        _write_tsv(
            out / "classify_folds.tsv",
            ("fold", "accuracy", "test_size"),
            [
                (i + 1, acc, size)
                for i, (acc, size) in enumerate(
                    zip(report.cv.fold_accuracies, report.cv.fold_sizes)
                )
            ],
        )
    ]
    written.append(
        _write_json(
            out / "classify_summary.json",
            {
                "variant": report.variant,
                "accuracy": report.cv.accuracy,
                "fold_accuracies": list(report.cv.fold_accuracies),
                "class_names": list(report.cv.class_names),
                "n_samples": report.n_samples,
                "n_features": report.n_features,
                "pca_clipped": report.pca_clipped,
            },
        )
    )
    return written


def write_embedding(
    points: np.ndarray,
    sample_ids: Sequence[str],
    path,
    cluster_labels: np.ndarray | None = None,
) -> Path:
    rows = []
    for i, s in enumerate(sample_ids):
        row = [s, float(points[i, 0]), float(points[i, 1])]
        if cluster_labels is not None:
            row.append(int(cluster_labels[i]))
        rows.append(row)
    header = ["sample_id", "x", "y"] + (
        ["cluster"] if cluster_labels is not None else []
    )
    return _write_tsv(Path(path), header, rows)
