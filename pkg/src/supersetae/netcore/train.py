"""Hand-derived backpropagation, Nesterov-momentum SGD and early stopping.

The optimizer follows the reference framework's SGD semantics exactly:
the effective rate is lr / (1 + decay * iteration_count) with the count
read before it is incremented (once per mini-batch), velocity updates as
v <- momentum * v - lr_t * g, and the Nesterov parameter update applies
p <- p + momentum * v_new - lr_t * g.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict
from typing import Sequence

import numpy as np

from ..errors import ConfigError, ConsistencyError, TrainingError
from .model import Model, forward, forward_cache, loss_value


@dataclass(frozen=True)
class TrainConfig:
    """SGD and early-stopping settings; defaults follow the training recipe."""

    learning_rate: float = 0.05
    decay: float = 1e-6
    momentum: float = 0.9
    nesterov: bool = True
    batch_size: int = 32
    max_epochs: int = 100
    val_fraction: float = 0.05
    patience: int = 3
    seed: int = 0
    float32: bool = False

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if self.decay < 0:
            raise ConfigError("decay must be >= 0")
        if not 0 <= self.momentum < 1:
            raise ConfigError("momentum must be in [0, 1)")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ConfigError("batch_size and max_epochs must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ConfigError("val_fraction must be in (0, 1)")
        if self.patience < 1:
            raise ConfigError("patience must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        return cls(**d)


@dataclass
class OptimizerState:
    """Per-parameter velocities plus the global batch counter."""

    vel_w: list[np.ndarray]
    vel_b: list[np.ndarray]
    iteration_count: int = 0

    @classmethod
    def for_model(cls, model: Model) -> "OptimizerState":
        return cls(
            [np.zeros_like(w) for w in model.weights],
            [np.zeros_like(b) for b in model.biases],
        )


@dataclass
class EarlyStopping:
    """Stop after `patience` consecutive epochs without strict improvement."""

    patience: int = 3
    min_delta: float = 0.0
    best: float = math.inf
    streak: int = 0

    def update(self, val_loss: float) -> bool:
        """Record one epoch's validation loss; True means stop now."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.streak = 0
            return False
        self.streak += 1
        return self.streak >= self.patience


@dataclass(frozen=True)
class History:
    """Per-epoch train/validation losses of one training run."""

    train_loss: tuple[float, ...]
    val_loss: tuple[float, ...]
    stopped_early: bool

    @property
    def epochs_run(self) -> int:
        return len(self.train_loss)


def backward(
    model: Model,
    acts: list[np.ndarray],
    zs: list[np.ndarray],
    target: np.ndarray,
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic gradients of the head loss w.r.t. every weight and bias.

    Output-layer deltas fold the activation into the loss derivative:
    linear + MSE gives 2(pred - target)/size, softmax + cross-entropy
    gives (prob - target)/n. Off-mask weight gradients are forced to 0.
    """
    n = target.shape[1]
    pred = acts[-1]
    if model.head == "reconstruction":
        delta = (2.0 / pred.size) * (pred - target)
    else:
        delta = (pred - target) / n
    grad_w: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]
    grad_b: list[np.ndarray] = [None] * len(model.layers)  # type: ignore[list-item]
    for l in range(len(model.layers) - 1, -1, -1):
        gw = delta @ acts[l].T
        if model.masks[l] is not None:
            gw *= model.masks[l]
        grad_w[l] = gw
        grad_b[l] = delta.sum(axis=1)
        if l > 0:
            delta = model.weights[l].T @ delta
            if model.layers[l - 1].activation == "relu":
                delta = delta * (zs[l - 1] > 0)
    return grad_w, grad_b


def sgd_step(
    model: Model,
    state: OptimizerState,
    grad_w: Sequence[np.ndarray],
    grad_b: Sequence[np.ndarray],
    config: TrainConfig,
) -> None:
    """One Nesterov-momentum update over all parameters, in place."""
    lr_t = config.learning_rate / (1.0 + config.decay * state.iteration_count)
    mom = config.momentum
    for i in range(len(model.weights)):
        for p, v, g in (
            (model.weights[i], state.vel_w[i], grad_w[i]),
            (model.biases[i], state.vel_b[i], grad_b[i]),
        ):
            if not np.isfinite(g).all():
                raise TrainingError(
                    f"non-finite gradient in layer {i} at iteration "
                    f"{state.iteration_count}"
                )
            v *= mom
            v -= lr_t * g
            if config.nesterov:
                p += mom * v - lr_t * g
            else:
                p += v
        if model.masks[i] is not None:
            # re-zero off-mask entries so the sparsity invariant is bitwise
            np.multiply(model.weights[i], model.masks[i], out=model.weights[i])
    state.iteration_count += 1


def _as_values(data) -> tuple[np.ndarray, tuple[str, ...] | None]:
    gene_ids = getattr(data, "gene_ids", None)
    values = data.values if gene_ids is not None else np.asarray(data)
    return np.asarray(values, dtype=np.float64), (
        tuple(gene_ids) if gene_ids is not None else None
    )


def train(
    model: Model,
    data,
    labels: np.ndarray | None = None,
    config: TrainConfig = TrainConfig(),
    rng: np.random.Generator | None = None,
) -> tuple[Model, History]:
    """Mini-batch SGD with a held-out validation split and early stopping.

    ``data`` is an ExpressionMatrix or a [in_dim x n] array of column
    samples. Reconstruction targets are the inputs themselves; a
    classifier requires one-hot ``labels`` of shape [n_classes x n].
    The returned parameters are those of the final epoch run, not the
    best-validation epoch. Deterministic for a fixed rng/seed.
    """
    values, gene_ids = _as_values(data)
    if gene_ids is not None and model.gene_ids is not None:
        if gene_ids != model.gene_ids:
            raise ConsistencyError("data gene order differs from model gene order")
    if values.ndim != 2 or values.shape[0] != model.in_dim:
        raise ConsistencyError(
            f"data shape {values.shape} does not match in_dim {model.in_dim}"
        )
    if model.head == "classification":
        if labels is None:
            raise ConfigError("classifier training requires labels")
        target_all = np.asarray(labels, dtype=np.float64)
        if target_all.shape != (model.out_dim, values.shape[1]):
            raise ConsistencyError(
                f"labels shape {target_all.shape} does not match "
                f"[{model.out_dim} x {values.shape[1]}]"
            )
    else:
        target_all = values

    n = values.shape[1]
    n_val = int(round(config.val_fraction * n))
    if n_val < 2:
        raise ConfigError(
            f"validation split of {n} samples at fraction {config.val_fraction} "
            f"holds out {n_val} (< 2) samples"
        )
    if n - n_val < 1:
        raise ConfigError("no samples left for training after the validation split")
    if rng is None:
        rng = np.random.default_rng(config.seed)
    perm = rng.permutation(n)
    val_idx, train_idx = perm[:n_val], perm[n_val:]

    dtype = np.float32 if config.float32 else np.float64
    if config.float32:
        values = values.astype(np.float32)
        target_all = target_all.astype(np.float32)
        for i in range(len(model.weights)):
            model.weights[i] = model.weights[i].astype(np.float32)
            model.biases[i] = model.biases[i].astype(np.float32)

    x_tr, t_tr = values[:, train_idx], target_all[:, train_idx]
    x_va, t_va = values[:, val_idx], target_all[:, val_idx]

    state = OptimizerState.for_model(model)
    stopper = EarlyStopping(patience=config.patience)
    train_losses: list[float] = []
    val_losses: list[float] = []
    stopped = False
    for _ in range(config.max_epochs):
        order = rng.permutation(train_idx.size)
        for start in range(0, order.size, config.batch_size):
            batch = order[start : start + config.batch_size]
            acts, z = forward_cache(model, x_tr[:, batch])
            gw, gb = backward(model, acts, z, t_tr[:, batch])
            sgd_step(model, state, gw, gb, config)
        train_losses.append(loss_value(model.head, forward(model, x_tr), t_tr))
        val_losses.append(loss_value(model.head, forward(model, x_va), t_va))
        if stopper.update(val_losses[-1]):
            stopped = True
            break
    if dtype is np.float32:
        for i in range(len(model.weights)):
            model.weights[i] = model.weights[i].astype(np.float64)
            model.biases[i] = model.biases[i].astype(np.float64)
    return model, History(tuple(train_losses), tuple(val_losses), stopped)


def one_hot(
    labels: Sequence[str], class_names: Sequence[str] | None = None
) -> tuple[np.ndarray, tuple[str, ...]]:
    """Encode string labels as a [n_classes x n] one-hot matrix.

    Class order is ``class_names`` when given, else sorted unique labels.
    """
    names = tuple(class_names) if class_names is not None else tuple(
        sorted(set(labels))
    )
    index = {c: i for i, c in enumerate(names)}
    out = np.zeros((len(names), len(labels)), dtype=np.float64)
    for j, lab in enumerate(labels):
        try:
            out[index[lab], j] = 1.0
        except KeyError:
            raise ConfigError(f"label {lab!r} not among classes {names}") from None
    return out, names


def predict(model: Model, data) -> np.ndarray:
    """Class indices (argmax over softmax rows) for column samples."""
    if model.head != "classification":
        raise ConfigError("predict requires a classification model")
    values, _ = _as_values(data)
    return forward(model, values).argmax(axis=0)
