"""Network definition: masked and dense layers, forward pass, losses.

Every node computes activation(w . x + b). Masked layers carry a binary
connectivity pattern derived from gene-set membership; their off-pattern
weights are exactly 0.0 at initialization, after every optimizer step and
in every serialized copy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..errors import ConfigError, ConsistencyError, DomainError, InitError
from ..genesets import MembershipMask

ACTIVATIONS = ("relu", "linear", "softmax")


@dataclass(frozen=True)
class LayerSpec:
    """Shape and nonlinearity of one layer; masked layers restrict connectivity."""

    kind: str  # "masked" or "dense"
    in_dim: int
    out_dim: int
    activation: str

    def __post_init__(self):
        if self.kind not in ("masked", "dense"):
            raise ConfigError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"unknown activation {self.activation!r}")
        if self.in_dim < 1 or self.out_dim < 1:
            raise ConfigError("layer dimensions must be >= 1")


@dataclass
class Model:
    """An ordered stack of layers plus parameters and identifier metadata.

    ``masks`` holds, per layer, either None (dense) or a 0/1 float array of
    the same [out_dim x in_dim] shape as the weight matrix.
    """

    layers: tuple[LayerSpec, ...]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    masks: tuple[np.ndarray | None, ...]
    head: str  # "reconstruction" or "classification"
    gene_ids: tuple[str, ...] | None = None
    set_names: tuple[str, ...] | None = None
    class_names: tuple[str, ...] | None = None
    seed: int | None = None

    def __post_init__(self):
        if self.head not in ("reconstruction", "classification"):
            raise ConfigError(f"unknown head {self.head!r}")
        if not self.layers:
            raise ConfigError("model needs at least one layer")
        for i, spec in enumerate(self.layers):
            if i and spec.in_dim != self.layers[i - 1].out_dim:
                raise ConsistencyError(
                    f"layer {i} in_dim {spec.in_dim} != previous out_dim "
                    f"{self.layers[i - 1].out_dim}"
                )
            if spec.activation == "softmax" and (
                i != len(self.layers) - 1 or self.head != "classification"
            ):
                raise ConfigError("softmax only allowed as a classifier's last layer")
            w, b = self.weights[i], self.biases[i]
            if w.shape != (spec.out_dim, spec.in_dim) or b.shape != (spec.out_dim,):
                raise ConsistencyError(f"layer {i} parameter shapes do not match spec")
            m = self.masks[i]
            if (m is not None) != (spec.kind == "masked"):
                raise ConsistencyError(f"layer {i} mask presence does not match kind")
            if m is not None:
                if m.shape != w.shape:
                    raise ConsistencyError(f"layer {i} mask shape mismatch")
                if np.any(w[m == 0] != 0.0):
                    raise ConsistencyError(f"layer {i} has nonzero off-mask weights")
        if self.head == "classification":
            if self.layers[-1].activation != "softmax":
                raise ConfigError("classifier must end in softmax")
        elif self.layers[-1].activation != "linear":
            raise ConfigError("reconstruction head must end in a linear layer")

    @property
    def in_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def out_dim(self) -> int:
        return self.layers[-1].out_dim

    def n_params(self) -> int:
        total = 0
        for w, b, m in zip(self.weights, self.biases, self.masks):
            total += int(m.sum()) if m is not None else w.size
            total += b.size
        return total

    def copy(self) -> "Model":
        return Model(
            self.layers,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.masks,
            self.head,
            self.gene_ids,
            self.set_names,
            self.class_names,
            self.seed,
        )


def he_uniform(fan_in: int, size, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from [-sqrt(6/fan_in), +sqrt(6/fan_in)]."""
    if fan_in < 1:
        raise InitError(f"fan_in must be >= 1, got {fan_in}")
    bound = math.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size)


def _init_layer(
    spec: LayerSpec, wmask: np.ndarray | None, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """He-uniform weights (per-node fan_in for masked layers), zero biases."""
    w = np.zeros((spec.out_dim, spec.in_dim), dtype=np.float64)
    if wmask is None:
        w[:] = he_uniform(spec.in_dim, w.shape, rng)
    else:
        for j in range(spec.out_dim):
            idx = np.flatnonzero(wmask[j])
            if idx.size == 0:
                raise InitError(f"masked node {j} has no incoming connections")
            w[j, idx] = he_uniform(int(idx.size), idx.size, rng)
    b = np.zeros(spec.out_dim, dtype=np.float64)
    return w, b


def build_network(
    specs: Sequence[LayerSpec],
    masks: Sequence[np.ndarray | None],
    head: str,
    rng: np.random.Generator,
    gene_ids: tuple[str, ...] | None = None,
    set_names: tuple[str, ...] | None = None,
    class_names: tuple[str, ...] | None = None,
    seed: int | None = None,
) -> Model:
    """Initialize a model from layer specs; masks are 0/1 [out x in] arrays."""
    weights, biases = [], []
    frozen_masks: list[np.ndarray | None] = []
    for spec, m in zip(specs, masks):
        wm = None
        if m is not None:
            wm = np.ascontiguousarray(np.asarray(m, dtype=np.float64))
            wm.setflags(write=False)
        w, b = _init_layer(spec, wm, rng)
        weights.append(w)
        biases.append(b)
        frozen_masks.append(wm)
    return Model(
        tuple(specs),
        weights,
        biases,
        tuple(frozen_masks),
        head,
        gene_ids,
        set_names,
        class_names,
        seed,
    )


def build_autoencoder(
    mask: MembershipMask,
    superset_dim: int = 200,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> Model:
    """Masked gene-set layer, superset bottleneck, dense mirror decoder.

    Layout: input -> masked(n_sets, ReLU) -> dense(superset_dim, ReLU)
    -> dense(n_sets, ReLU) -> dense(n_genes, linear).
    """
    if rng is None:
        rng = np.random.default_rng(seed)
    n_genes, n_sets = mask.n_genes, mask.n_sets
    specs = (
        LayerSpec("masked", n_genes, n_sets, "relu"),
        LayerSpec("dense", n_sets, superset_dim, "relu"),
        LayerSpec("dense", superset_dim, n_sets, "relu"),
        LayerSpec("dense", n_sets, n_genes, "linear"),
    )
    masks = (mask.matrix.T, None, None, None)
    return build_network(
        specs,
        masks,
        "reconstruction",
        rng,
        gene_ids=mask.gene_ids,
        set_names=mask.set_names,
        seed=seed,
    )


def build_classifier(
    mask: MembershipMask,
    class_names: Sequence[str],
    superset_dim: int = 200,
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> Model:
    """Masked gene-set layer, superset layer, softmax head."""
    if rng is None:
        rng = np.random.default_rng(seed)
    n_classes = len(class_names)
    if n_classes < 2:
        raise ConfigError("classifier needs >= 2 classes")
    specs = (
        LayerSpec("masked", mask.n_genes, mask.n_sets, "relu"),
        LayerSpec("dense", mask.n_sets, superset_dim, "relu"),
        LayerSpec("dense", superset_dim, n_classes, "softmax"),
    )
    return build_network(
        specs,
        (mask.matrix.T, None, None),
        "classification",
        rng,
        gene_ids=mask.gene_ids,
        set_names=mask.set_names,
        class_names=tuple(class_names),
        seed=seed,
    )


def build_geneset_classifier(
    mask: MembershipMask,
    class_names: Sequence[str],
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> Model:
    """Classifier with the superset layer removed: masked layer into softmax."""
    if rng is None:
        rng = np.random.default_rng(seed)
    n_classes = len(class_names)
    if n_classes < 2:
        raise ConfigError("classifier needs >= 2 classes")
    specs = (
        LayerSpec("masked", mask.n_genes, mask.n_sets, "relu"),
        LayerSpec("dense", mask.n_sets, n_classes, "softmax"),
    )
    return build_network(
        specs,
        (mask.matrix.T, None),
        "classification",
        rng,
        gene_ids=mask.gene_ids,
        set_names=mask.set_names,
        class_names=tuple(class_names),
        seed=seed,
    )


def build_dense_classifier(
    in_dim: int,
    hidden: Sequence[int],
    class_names: Sequence[str],
    rng: np.random.Generator | None = None,
    seed: int | None = None,
) -> Model:
    """Fully connected ReLU stack into softmax; also the head for PCA inputs."""
    if rng is None:
        rng = np.random.default_rng(seed)
    n_classes = len(class_names)
    if n_classes < 2:
        raise ConfigError("classifier needs >= 2 classes")
    dims = [in_dim, *hidden]
    specs = [
        LayerSpec("dense", dims[i], dims[i + 1], "relu") for i in range(len(hidden))
    ]
    specs.append(LayerSpec("dense", dims[-1], n_classes, "softmax"))
    return build_network(
        tuple(specs),
        (None,) * len(specs),
        "classification",
        rng,
        class_names=tuple(class_names),
        seed=seed,
    )


def relu(z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0)


def softmax(z: np.ndarray) -> np.ndarray:
    """Column-wise shift-stabilized softmax."""
    e = np.exp(z - z.max(axis=0, keepdims=True))
    return e / e.sum(axis=0, keepdims=True)


def _apply(activation: str, z: np.ndarray) -> np.ndarray:
    if activation == "relu":
        return relu(z)
    if activation == "linear":
        return z
    return softmax(z)


def forward_cache(
    model: Model, x: np.ndarray
) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """All activations (including the input) and pre-activations, for backprop."""
    a = np.asarray(x, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != model.in_dim:
        raise ConsistencyError(
            f"input shape {a.shape} does not match in_dim {model.in_dim}"
        )
    if not np.isfinite(a).all():
        raise DomainError("network input must be finite")
    acts = [a]
    zs: list[np.ndarray] = []
    for spec, w, b in zip(model.layers, model.weights, model.biases):
        z = w @ acts[-1] + b[:, None]
        zs.append(z)
        acts.append(_apply(spec.activation, z))
    return acts, zs


def forward(model: Model, x: np.ndarray) -> np.ndarray:
    """Network output for column-sample input [in_dim x n]."""
    acts, _ = forward_cache(model, x)
    return acts[-1]


def encode(model: Model, data) -> tuple[np.ndarray, np.ndarray]:
    """Gene-set-layer and superset-layer activations for column samples.

    ``data`` may be an ExpressionMatrix (gene order is verified against the
    model) or a bare [n_genes x n] array.
    """
    values = data
    gene_ids = getattr(data, "gene_ids", None)
    if gene_ids is not None:
        values = data.values
        if model.gene_ids is not None and tuple(gene_ids) != model.gene_ids:
            raise ConsistencyError("data gene order differs from training gene order")
    if len(model.layers) < 2:
        raise ConfigError("encode needs a model with >= 2 layers")
    acts, _ = forward_cache(model, values)
    return acts[1], acts[2]


def loss_value(head: str, prediction: np.ndarray, target: np.ndarray) -> float:
    """Mean squared error over all entries, or per-sample mean cross-entropy."""
    p = np.asarray(prediction, dtype=np.float64)
    t = np.asarray(target, dtype=np.float64)
    if p.shape != t.shape:
        raise ConsistencyError(f"prediction {p.shape} vs target {t.shape}")
    if head == "reconstruction":
        d = p - t
        return float(np.mean(d * d))
    logp = np.log(np.maximum(p, 1e-12))
    return float(np.mean(-(t * logp).sum(axis=0)))
