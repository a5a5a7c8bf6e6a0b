"""Model persistence as a single JSON document.

Floats go through Python repr, the shortest representation that parses
back to the identical 64-bit value, so save/load round-trips are
value-exact and two saves of the same model are byte-identical. Masked
connectivity is stored per output node as sorted input-index lists.
"""

from __future__ import annotations

import json
from typing import Any

import numpy as np

from ..errors import ParseError
from .model import LayerSpec, Model
from .train import TrainConfig

FORMAT_VERSION = 1
PRNG = {"name": "pcg64", "version": 1}


def model_to_json(model: Model, config: TrainConfig | None = None) -> str:
    layers: list[dict[str, Any]] = []
    for spec, w, b, m in zip(model.layers, model.weights, model.biases, model.masks):
        entry: dict[str, Any] = {
            "kind": spec.kind,
            "in_dim": spec.in_dim,
            "out_dim": spec.out_dim,
            "activation": spec.activation,
            "weights": np.asarray(w, dtype=np.float64).ravel().tolist(),
            "bias": np.asarray(b, dtype=np.float64).tolist(),
        }
        if m is not None:
            entry["mask_columns"] = [
                np.flatnonzero(m[j]).tolist() for j in range(spec.out_dim)
            ]
        layers.append(entry)
    doc = {
        "format_version": FORMAT_VERSION,
        "prng": PRNG,
        "head": model.head,
        "seed": model.seed,
        "config": config.to_dict() if config is not None else None,
        "gene_ids": list(model.gene_ids) if model.gene_ids is not None else None,
        "set_names": list(model.set_names) if model.set_names is not None else None,
        "class_names": (
            list(model.class_names) if model.class_names is not None else None
        ),
        "layers": layers,
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":")) + "\n"


def model_from_json(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"model JSON is malformed: {exc}") from None
    if not isinstance(doc, dict) or doc.get("format_version") != FORMAT_VERSION:
        raise ParseError(
            f"unsupported model format_version {doc.get('format_version')!r}"
            if isinstance(doc, dict)
            else "model JSON must be an object"
        )
    specs: list[LayerSpec] = []
    weights: list[np.ndarray] = []
    biases: list[np.ndarray] = []
    masks: list[np.ndarray | None] = []
    for i, entry in enumerate(doc["layers"]):
        spec = LayerSpec(
            entry["kind"], entry["in_dim"], entry["out_dim"], entry["activation"]
        )
        w = np.asarray(entry["weights"], dtype=np.float64)
        if w.size != spec.out_dim * spec.in_dim:
            raise ParseError(f"layer {i}: weight count {w.size} does not match spec")
        w = w.reshape(spec.out_dim, spec.in_dim)
        b = np.asarray(entry["bias"], dtype=np.float64)
        if not np.isfinite(w).all() or not np.isfinite(b).all():
            raise ParseError(f"layer {i}: non-finite parameter")
        m = None
        if spec.kind == "masked":
            if "mask_columns" not in entry:
                raise ParseError(f"layer {i}: masked layer without mask_columns")
            m = np.zeros((spec.out_dim, spec.in_dim), dtype=np.float64)
            for j, idx in enumerate(entry["mask_columns"]):
                m[j, np.asarray(idx, dtype=np.intp)] = 1.0
            m.setflags(write=False)
        specs.append(spec)
        weights.append(w)
        biases.append(b)
        masks.append(m)

    def _names(key: str) -> tuple[str, ...] | None:
        v = doc.get(key)
        return tuple(v) if v is not None else None

    return Model(
        tuple(specs),
        weights,
        biases,
        tuple(masks),
        doc["head"],
        gene_ids=_names("gene_ids"),
        set_names=_names("set_names"),
        class_names=_names("class_names"),
        seed=doc.get("seed"),
    )


def save_model(model: Model, path, config: TrainConfig | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(model_to_json(model, config))


def load_model(path) -> Model:
    try:
        with open(path, encoding="utf-8") as fh:
            return model_from_json(fh.read())
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
