"""Matplotlib figures rendered next to the delimited reports.

Uses the Agg backend so runs never need a display; every function writes
one PNG and closes its figure.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)
import numpy as np  # noqa: E402

from .netcore import History  # noqa: E402
from .pipelines import ClassifyReport, ReproReport, SurvivalHit  # noqa: E402


def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, dpi=150, bbox_inches="tight")
    plt.close(fig)
    return path


def plot_history(history: History, path) -> Path:
    epochs = np.arange(1, history.epochs_run + 1)
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(epochs, history.train_loss, label="train", marker="o", ms=3)
    ax.plot(epochs, history.val_loss, label="validation", marker="o", ms=3)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.set_title("training history" + (" (stopped early)" if history.stopped_early else ""))
    ax.legend()
    return _save(fig, path)


def plot_km(hit: SurvivalHit, path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    for curve, label, color in (
        (hit.km_low, f"low (n={hit.n_low})", "tab:blue"),
        (hit.km_high, f"high (n={hit.n_high})", "tab:red"),
    ):
        ax.step(curve[:, 0], curve[:, 1], where="post", label=label, color=color)
    ax.set_xlabel("days")
    ax.set_ylabel("survival probability")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"superset {hit.index}: log-rank p = {hit.result.p_value:.3g}")
    ax.legend()
    return _save(fig, path)


def plot_embedding(points: np.ndarray, labels: np.ndarray | None, path) -> Path:
    fig, ax = plt.subplots(figsize=(5.5, 5))
    if labels is None:
        ax.scatter(points[:, 0], points[:, 1], s=12)
    else:
        labels = np.asarray(labels)
        noise = labels == -1
        if noise.any():
            ax.scatter(points[noise, 0], points[noise, 1], s=10, c="0.7",
                       label="noise")
        for c in sorted(set(labels.tolist()) - {-1}):
            sel = labels == c
            ax.scatter(points[sel, 0], points[sel, 1], s=12, label=f"cluster {c}")
        ax.legend(fontsize=8)
    ax.set_xlabel("t-SNE 1")
    ax.set_ylabel("t-SNE 2")
    return _save(fig, path)


def plot_fold_accuracies(report: ClassifyReport, path) -> Path:
    accs = report.cv.fold_accuracies
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(np.arange(1, len(accs) + 1), accs, color="tab:blue")
    ax.axhline(report.cv.accuracy, color="tab:red", ls="--",
               label=f"mean = {report.cv.accuracy:.3f}")
    ax.set_xlabel("fold")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0.0, 1.05)
    ax.set_title(f"{report.variant} classifier")
    ax.legend()
    return _save(fig, path)


def plot_repro(report: ReproReport, path) -> Path:
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.bar(
        ["superset", "gene set"],
        [report.superset_jaccard, report.geneset_jaccard],
        color=["tab:blue", "tab:orange"],
    )
    ax.set_ylabel("train/test Jaccard")
    title = "significance overlap"
    if report.z_test is not None:
        title += f" (z-test p = {report.z_test.p_value:.3g})"
    ax.set_title(title)
    ax.set_ylim(0.0, 1.05)
    return _save(fig, path)
