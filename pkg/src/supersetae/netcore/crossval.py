"""Stratified k-fold cross-validation for the softmax classifiers."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from ..errors import ConfigError
from .model import Model
from .train import TrainConfig, one_hot, predict, train


@dataclass(frozen=True)
class CvResult:
    accuracy: float  # mean of per-fold accuracies
    fold_accuracies: tuple[float, ...]
    fold_sizes: tuple[int, ...]
    class_names: tuple[str, ...]


def stratified_folds(
    labels: Sequence[str], k: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Split sample indices into k folds with near-equal class proportions.

    Within each class the indices are shuffled, then dealt round-robin to
    folds. Every class must have at least k members so each fold sees it.
    """
    if k < 2:
        raise ConfigError(f"k must be >= 2, got {k}")
    by_class: dict[str, list[int]] = {}
    for i, lab in enumerate(labels):
        by_class.setdefault(lab, []).append(i)
    for lab, idx in sorted(by_class.items()):
        if len(idx) < k:
            raise ConfigError(
                f"class {lab!r} has {len(idx)} members; stratified {k}-fold "
                f"needs >= {k}"
            )
    folds: list[list[int]] = [[] for _ in range(k)]
    for lab in sorted(by_class):
        idx = np.asarray(by_class[lab])
        idx = idx[rng.permutation(idx.size)]
        for f in range(k):
            folds[f].extend(idx[f::k].tolist())
    return [np.asarray(sorted(f), dtype=np.intp) for f in folds]


def kfold_cv(
    values: np.ndarray,
    labels: Sequence[str],
    build_model: Callable[[np.random.Generator], Model],
    k: int = 10,
    config: TrainConfig = TrainConfig(),
) -> CvResult:
    """Mean 10-fold accuracy of a freshly initialized classifier per fold.

    ``build_model`` receives a per-fold generator so initialization and
    the training shuffle share one reproducible stream per fold; all fold
    streams descend from config.seed.
    """
    x = np.asarray(values, dtype=np.float64)
    labs = list(labels)
    if x.ndim != 2 or x.shape[1] != len(labs):
        raise ConfigError(
            f"values shape {x.shape} does not match {len(labs)} labels"
        )
    root = np.random.SeedSequence(config.seed)
    fold_seq, *fold_streams = root.spawn(k + 1)
    folds = stratified_folds(labs, k, np.random.default_rng(fold_seq))
    _, class_names = one_hot(labs)
    accs: list[float] = []
    sizes: list[int] = []
    for f, test_idx in enumerate(folds):
        train_mask = np.ones(x.shape[1], dtype=bool)
        train_mask[test_idx] = False
        train_idx = np.flatnonzero(train_mask)
        rng = np.random.default_rng(fold_streams[f])
        model = build_model(rng)
        targets, _ = one_hot([labs[i] for i in train_idx], class_names)
        train(model, x[:, train_idx], targets, config, rng=rng)
        pred = predict(model, x[:, test_idx])
        truth = np.asarray([class_names.index(labs[i]) for i in test_idx])
        accs.append(float((pred == truth).mean()))
        sizes.append(int(test_idx.size))
    return CvResult(
        float(np.mean(accs)), tuple(accs), tuple(sizes), class_names
    )
