"""Command-line entry point for reproducible, self-describing runs.

Every subcommand writes its artifacts plus a run manifest (resolved
config, seed, SHA-256 input checksums, wall time) into --out, guarded by
a LOCK file against concurrent writers. Option precedence is flags over
config file (plain key=value lines) over defaults. Heavy imports are
deferred until after --threads has pinned the BLAS thread count.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
import traceback
from pathlib import Path
from typing import Callable, NamedTuple

MANIFEST_VERSION = 1
PRNG_INFO = {"name": "pcg64", "version": 1}
_REQUIRED = object()


def _parse_bool(text) -> bool:
    if isinstance(text, bool):
        return text
    t = str(text).strip().lower()
    if t in ("true", "1", "yes"):
        return True
    if t in ("false", "0", "no"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _int_list(text) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return text
    parts = [p for p in str(text).split(",") if p.strip()]
    if not parts:
        raise ValueError("expected a comma-separated list of integers")
    return tuple(int(p) for p in parts)


def _choice(*allowed: str) -> Callable[[str], str]:
    def convert(text: str) -> str:
        if text not in allowed:
            raise ValueError(f"expected one of {', '.join(allowed)}; got {text!r}")
        return text

    convert.__name__ = "|".join(allowed)
    return convert


def _in_path(text) -> Path:
    return Path(text)


class Opt(NamedTuple):
    name: str  # flag spelling, hyphenated
    type: Callable
    default: object
    help: str

    @property
    def key(self) -> str:
        return self.name.replace("-", "_")


GLOBAL_OPTS = [
    Opt("config", _in_path, None, "key=value config file (flags override it)"),
    Opt("seed", int, None, "PRNG seed; drawn from OS entropy when omitted"),
    Opt("out", Path, _REQUIRED, "output directory for artifacts and manifest"),
    Opt("threads", int, None, "BLAS/OpenMP thread count"),
    Opt("float32", _parse_bool, False, "train in 32-bit arithmetic"),
]

_TRAIN_OPTS = [
    Opt("learning-rate", float, 0.05, "SGD learning rate"),
    Opt("decay", float, 1e-6, "per-batch learning-rate decay"),
    Opt("momentum", float, 0.9, "SGD momentum"),
    Opt("nesterov", _parse_bool, True, "use the Nesterov update"),
    Opt("batch-size", int, 32, "mini-batch size"),
    Opt("max-epochs", int, 100, "epoch cap"),
    Opt("val-fraction", float, 0.05, "held-out validation fraction"),
    Opt("patience", int, 3, "early-stopping patience in epochs"),
]


class Command(NamedTuple):
    opts: list[Opt]
    help: str


COMMANDS: dict[str, Command] = {
    "prep": Command(
        [
            Opt("expr", _in_path, _REQUIRED, "expression TSV (genes x samples)"),
            Opt("gmt", _in_path, _REQUIRED, "gene sets in GMT format"),
            Opt("clinical", _in_path, None, "clinical TSV (optional)"),
            Opt("unit", _choice("tpm", "logtpm"), "tpm", "expression unit"),
            Opt("mean-min", float, 1.0, "keep genes with logTPM mean above this"),
            Opt("sd-min", float, 0.5, "keep genes with logTPM sd above this"),
            Opt("min-size", int, 15, "smallest kept gene-set size"),
            Opt("max-size", int, 500, "largest kept gene-set size"),
            Opt("cap-days", int, 1825, "follow-up cap in days"),
        ],
        "filter, cap and align expression, gene sets and clinical data",
    ),
    "dedup": Command(
        [
            Opt("gmt", _in_path, _REQUIRED, "gene sets in GMT format"),
            Opt("universe", _in_path, None,
                "optional gene universe file, one symbol per line"),
            Opt("p-threshold", float, 1e-7, "kappa p-value edge threshold"),
        ],
        "collapse similar gene sets to their largest representative",
    ),
    "train": Command(
        [
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("gmt", _in_path, _REQUIRED, "gene sets in GMT format"),
            Opt("superset-dim", int, 200, "superset layer width"),
            *_TRAIN_OPTS,
        ],
        "train the gene-set autoencoder",
    ),
    "encode": Command(
        [
            Opt("model", _in_path, _REQUIRED, "trained model JSON"),
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
        ],
        "export gene-set and superset activations",
    ),
    "subtype": Command(
        [
            Opt("model", _in_path, _REQUIRED, "trained model JSON"),
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("shift", float, _REQUIRED, "MWW location shift for supersets"),
            Opt("p-threshold", float, 0.01, "superset significance threshold"),
            Opt("labels", _in_path, None,
                "cluster labels TSV; omit to cluster internally"),
            Opt("target-cluster", int, None,
                "cluster treated as group 1 (default: smallest)"),
            Opt("perplexity", float, 30.0, "t-SNE perplexity"),
            Opt("tsne-iters", int, 1000, "t-SNE iterations"),
            Opt("eps", float, 3.0, "DBSCAN radius in embedding space"),
            Opt("min-pts", int, 5, "DBSCAN core-point threshold"),
        ],
        "differential superset analysis of one cluster vs the rest",
    ),
    "survive": Command(
        [
            Opt("model", _in_path, _REQUIRED, "trained model JSON"),
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("clinical", _in_path, _REQUIRED, "clinical TSV"),
            Opt("superset-p", float, 0.001, "superset log-rank threshold"),
            Opt("top-k", int, 20, "gene sets reported per superset"),
        ],
        "median-split log-rank screening of supersets",
    ),
    "reproduce": Command(
        [
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("clinical", _in_path, _REQUIRED, "clinical TSV"),
            Opt("gmt", _in_path, _REQUIRED, "gene sets in GMT format"),
            Opt("split", float, 0.6, "training fraction of samples"),
            Opt("sig-p", float, 0.05, "per-node log-rank threshold"),
            Opt("superset-dim", int, 200, "superset layer width"),
            *_TRAIN_OPTS,
        ],
        "train/test significance overlap of supersets vs gene sets",
    ),
    "classify": Command(
        [
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("labels", _in_path, _REQUIRED, "sample_id -> class TSV"),
            Opt("gmt", _in_path, None, "gene sets (masked variants only)"),
            Opt("variant", _choice("superset", "geneset", "dense", "pca_dense"),
                "superset", "classifier architecture"),
            Opt("superset-dim", int, 200, "superset layer width"),
            Opt("hidden", _int_list, (200,),
                "dense hidden widths, comma-separated"),
            Opt("pca-k", int, 500, "components for the pca_dense variant"),
            Opt("folds", int, 10, "cross-validation folds"),
            *_TRAIN_OPTS,
        ],
        "stratified k-fold accuracy of a classifier variant",
    ),
    "embed": Command(
        [
            Opt("expr", _in_path, _REQUIRED, "logTPM expression TSV"),
            Opt("model", _in_path, None,
                "trained model JSON; embeds superset outputs when given"),
            Opt("perplexity", float, 30.0, "t-SNE perplexity"),
            Opt("iters", int, 1000, "t-SNE iterations"),
            Opt("pca-first", int, None,
                "reduce raw features to this many components first"),
            Opt("cluster", _parse_bool, False, "run DBSCAN on the embedding"),
            Opt("eps", float, 3.0, "DBSCAN radius"),
            Opt("min-pts", int, 5, "DBSCAN core-point threshold"),
        ],
        "t-SNE embedding (and optional clustering) of samples",
    ),
    "synth": Command(
        [
            Opt("kind",
                _choice("subtype", "survival", "survival-distributed", "classes"),
                _REQUIRED, "which planted-truth generator to run"),
            Opt("n-samples", int, None, "sample count"),
            Opt("n-genes", int, None, "gene count"),
            Opt("n-sets", int, None, "gene-set count"),
            Opt("n-planted", int, None, "planted set count"),
            Opt("effect", float, None, "planted effect size in baseline sds"),
            Opt("censor-fraction", float, None, "random censoring fraction"),
            Opt("set-noise", float, None,
                "per-set noise sd (survival-distributed)"),
            Opt("n-per-class", int, None, "samples per class (classes)"),
            Opt("n-classes", int, None, "class count (classes)"),
        ],
        "generate synthetic data with planted ground truth",
    ),
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="supersetae",
        description="gene-set autoencoder training and downstream analyses",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, command in COMMANDS.items():
        sp = sub.add_parser(name, help=command.help)
        for opt in [*GLOBAL_OPTS, *command.opts]:
            kwargs: dict = {
                "default": argparse.SUPPRESS,
                "help": opt.help,
                "dest": opt.key,
            }
            if opt.type is _parse_bool:
                kwargs.update(nargs="?", const=True, type=_parse_bool)
            else:
                kwargs["type"] = opt.type
            sp.add_argument("--" + opt.name, **kwargs)
    return parser


def _parse_config_file(path: Path) -> dict[str, str]:
    values: dict[str, str] = {}
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise _config_error(f"cannot read config file: {exc}")
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep:
            raise _config_error(f"{path}:{lineno}: expected key = value")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _config_error(message: str):
    from .errors import ConfigError

    return ConfigError(message)


def _resolve(command: str, ns: dict) -> dict:
    """Merge defaults, config-file values and flags (flags win)."""
    opts = {o.key: o for o in [*GLOBAL_OPTS, *COMMANDS[command].opts]}
    resolved = {key: o.default for key, o in opts.items()}
    config_path = ns.get("config")
    if config_path is not None:
        for key, text in _parse_config_file(Path(config_path)).items():
            if key not in opts or key == "config":
                raise _config_error(
                    f"unknown config key {key!r} for command {command!r}"
                )
            try:
                resolved[key] = opts[key].type(text)
            except ValueError as exc:
                raise _config_error(f"config key {key!r}: {exc}")
    resolved.update(ns)
    missing = [o.name for key, o in opts.items() if resolved[key] is _REQUIRED]
    if missing:
        raise _config_error(
            f"missing required option(s) for {command!r}: "
            + ", ".join("--" + m for m in sorted(missing))
        )
    if resolved["seed"] is None:
        resolved["seed"] = int.from_bytes(os.urandom(8), "little") & (2**63 - 1)
    resolved["out"] = Path(resolved["out"])
    return resolved


def _set_threads(n: int) -> None:
    for var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        os.environ[var] = str(n)


class RunDir:
    """Locked output directory that tracks artifacts for failure cleanup."""

    def __init__(self, path: Path):
        self.path = path
        self.written: list[Path] = []
        path.mkdir(parents=True, exist_ok=True)
        self.lock = path / "LOCK"
        try:
            fd = os.open(self.lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
        except FileExistsError:
            raise _config_error(
                f"{path} is locked by another run (remove {self.lock} if stale)"
            ) from None
        with os.fdopen(fd, "w") as fh:
            fh.write(f"{os.getpid()}\n")

    def file(self, name: str) -> Path:
        return self.path / name

    def track(self, *paths) -> None:
        for p in paths:
            self.written.append(Path(p))

    def remove_partial(self) -> None:
        for p in self.written:
            try:
                p.unlink(missing_ok=True)
            except OSError:
                pass

    def release(self) -> None:
        self.lock.unlink(missing_ok=True)


def _write_manifest(
    run: RunDir, command: str, resolved: dict, details: dict | None, wall: float
) -> None:
    from . import __version__
    from .dataio import checksum

    opts = {o.key: o for o in [*GLOBAL_OPTS, *COMMANDS[command].opts]}
    config_doc = {}
    inputs = {}
    for key, value in sorted(resolved.items()):
        if isinstance(value, Path):
            config_doc[key] = str(value)
        elif isinstance(value, tuple):
            config_doc[key] = list(value)
        else:
            config_doc[key] = value
        if (
            key in opts
            and opts[key].type is _in_path
            and value is not None
            and key != "config"
        ):
            inputs[key] = {"path": str(value), "sha256": checksum(value)}
    doc = {
        "manifest_version": MANIFEST_VERSION,
        "tool_version": __version__,
        "command": command,
        "config": config_doc,
        "seed": resolved["seed"],
        "prng": PRNG_INFO,
        "inputs": inputs,
        "outputs": sorted(p.name for p in run.written),
        "wall_time_s": round(wall, 3),
        "details": details or {},
    }
    with open(run.file("run_manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(doc, fh, sort_keys=True, indent=2)
        fh.write("\n")


def _load_aligned_model_expr(v: dict):
    """Load a model and expression TSV, reordering genes to the model's."""
    from .dataio import load_expression
    from .errors import ConsistencyError
    from .netcore import load_model

    model = load_model(v["model"])
    expr = load_expression(v["expr"], "logtpm")
    if model.gene_ids is not None and tuple(expr.gene_ids) != model.gene_ids:
        missing = set(model.gene_ids) - set(expr.gene_ids)
        if missing:
            raise ConsistencyError(
                f"expression lacks {len(missing)} genes the model was trained "
                f"on (e.g. {sorted(missing)[:3]})"
            )
        expr = expr.subset_genes(model.gene_ids)
    return model, expr


def _cmd_prep(v: dict, run: RunDir) -> dict:
    from . import dataio
    from .errors import EmptyResultError
    from .genesets import size_filter

    expr = dataio.load_expression(v["expr"], v["unit"])
    expr = dataio.filter_genes(expr, v["mean_min"], v["sd_min"])
    sets = dataio.load_gmt(v["gmt"])
    clinical = (
        dataio.load_clinical(v["clinical"], v["cap_days"])
        if v["clinical"] is not None
        else None
    )
    expr, sets, clinical = dataio.align(expr, sets, clinical)
    sets = size_filter(sets, v["min_size"], v["max_size"])
    if len(sets) == 0:
        raise EmptyResultError(
            f"no gene set left after the size filter "
            f"[{v['min_size']}, {v['max_size']}]"
        )
    expr, sets, clinical = dataio.align(expr, sets, clinical)
    dataio.write_expression(expr, run.file("expression.tsv"))
    run.track(run.file("expression.tsv"))
    dataio.write_gmt(sets, run.file("genesets.gmt"))
    run.track(run.file("genesets.gmt"))
    if clinical is not None:
        dataio.write_clinical(clinical, run.file("clinical.tsv"))
        run.track(run.file("clinical.tsv"))
    return {
        "n_genes": expr.n_genes,
        "n_samples": expr.n_samples,
        "n_sets": len(sets),
    }


def _cmd_dedup(v: dict, run: RunDir) -> dict:
    from .dataio import load_gmt, write_gmt
    from .genesets import GeneSetCollection, dedup
    from .reports import write_dedup_audit

    sets = load_gmt(v["gmt"])
    if v["universe"] is not None:
        from .errors import ParseError

        try:
            text = Path(v["universe"]).read_text(encoding="utf-8")
        except OSError as exc:
            raise ParseError(f"cannot read {v['universe']}: {exc}") from None
        symbols = [line.strip() for line in text.splitlines() if line.strip()]
        sets = GeneSetCollection(sets.sets, tuple(symbols))
    result = dedup(sets, v["p_threshold"])
    write_gmt(result.collection, run.file("genesets.gmt"))
    run.track(run.file("genesets.gmt"))
    run.track(write_dedup_audit(result.components, run.file("dedup_audit.tsv")))
    return {
        "n_input_sets": len(sets),
        "n_output_sets": len(result.collection),
        "n_components": len(result.components),
    }


def _train_config(v: dict):
    from .netcore import TrainConfig

    return TrainConfig(
        learning_rate=v["learning_rate"],
        decay=v["decay"],
        momentum=v["momentum"],
        nesterov=v["nesterov"],
        batch_size=v["batch_size"],
        max_epochs=v["max_epochs"],
        val_fraction=v["val_fraction"],
        patience=v["patience"],
        seed=v["seed"],
        float32=v["float32"],
    )


def _cmd_train(v: dict, run: RunDir) -> dict:
    import numpy as np

    from .dataio import align, load_expression, load_gmt
    from .genesets import build_mask
    from .netcore import build_autoencoder, save_model, train
    from .plotting import plot_history
    from .reports import write_history

    expr = load_expression(v["expr"], "logtpm")
    sets = load_gmt(v["gmt"])
    expr, sets, _ = align(expr, sets, None)
    mask = build_mask(sets, expr.gene_ids)
    rng = np.random.default_rng(v["seed"])
    model = build_autoencoder(mask, v["superset_dim"], rng=rng, seed=v["seed"])
    config = _train_config(v)
    model, history = train(model, expr, config=config, rng=rng)
    save_model(model, run.file("model.json"), config)
    run.track(run.file("model.json"))
    run.track(write_history(history, run.file("history.csv")))
    run.track(plot_history(history, run.file("history.png")))
    return {
        "epochs_run": history.epochs_run,
        "stopped_early": history.stopped_early,
        "final_train_loss": history.train_loss[-1],
        "final_val_loss": history.val_loss[-1],
        "n_genes": expr.n_genes,
        "n_samples": expr.n_samples,
        "n_sets": len(sets),
    }


def _cmd_encode(v: dict, run: RunDir) -> dict:
    from .netcore import encode
    from .reports import write_matrix

    model, expr = _load_aligned_model_expr(v)
    gs_acts, ss_acts = encode(model, expr)
    set_names = model.set_names or tuple(
        f"set_{i}" for i in range(gs_acts.shape[0])
    )
    super_names = tuple(f"superset_{j}" for j in range(ss_acts.shape[0]))
    # track each file as soon as it exists so a failed second write
    # still gets the first one cleaned up
    run.track(
        write_matrix(
            run.file("geneset_outputs.tsv"), gs_acts, set_names, expr.sample_ids
        )
    )
    run.track(
        write_matrix(
            run.file("superset_outputs.tsv"), ss_acts, super_names, expr.sample_ids
        )
    )
    return {"n_sets": gs_acts.shape[0], "n_supersets": ss_acts.shape[0]}


def _external_labels(path: Path, sample_ids) -> "object":
    import numpy as np

    from .dataio import load_labels
    from .errors import AlignmentError

    mapping = load_labels(path)
    missing = [s for s in sample_ids if s not in mapping]
    if missing:
        raise AlignmentError(
            f"labels file lacks {len(missing)} samples (e.g. {missing[:3]})"
        )
    raw = [mapping[s] for s in sample_ids]
    noise = {"-1", "noise"}
    names = sorted({r for r in raw if r.lower() not in noise})
    index = {name: i for i, name in enumerate(names)}
    return np.asarray(
        [-1 if r.lower() in noise else index[r] for r in raw], dtype=np.int64
    )


def _cmd_subtype(v: dict, run: RunDir) -> dict:
    from .pipelines import subtype_pipeline
    from .plotting import plot_embedding
    from .reports import write_embedding, write_subtype_report

    model, expr = _load_aligned_model_expr(v)
    labels = (
        _external_labels(v["labels"], expr.sample_ids)
        if v["labels"] is not None
        else None
    )
    report = subtype_pipeline(
        model,
        expr,
        shift=v["shift"],
        p_threshold=v["p_threshold"],
        cluster_labels=labels,
        target_cluster=v["target_cluster"],
        perplexity=v["perplexity"],
        tsne_iters=v["tsne_iters"],
        eps=v["eps"],
        min_pts=v["min_pts"],
        seed=v["seed"],
    )
    run.track(*write_subtype_report(report, run.path, expr.sample_ids))
    if report.embedding is not None:
        emb = report.embedding.embedding
        run.track(
            write_embedding(
                emb, expr.sample_ids, run.file("embedding.tsv"),
                report.cluster_labels,
            )
        )
        run.track(
            plot_embedding(emb, report.cluster_labels, run.file("embedding.png"))
        )
    return {
        "target_cluster": report.target_cluster,
        "n_up": len(report.up_supersets),
        "n_down": len(report.down_supersets),
    }


def _cmd_survive(v: dict, run: RunDir) -> dict:
    from .dataio import load_clinical
    from .errors import AlignmentError
    from .pipelines import survival_pipeline
    from .plotting import plot_km
    from .reports import write_survival_report

    model, expr = _load_aligned_model_expr(v)
    clinical = load_clinical(v["clinical"])
    have = set(clinical.sample_ids)
    shared = tuple(s for s in expr.sample_ids if s in have)
    if not shared:
        raise AlignmentError("no sample shared between expression and clinical")
    expr = expr.subset_samples(shared)
    clinical = clinical.subset(shared)
    report = survival_pipeline(
        model, expr, clinical, superset_p=v["superset_p"], top_k=v["top_k"]
    )
    run.track(*write_survival_report(report, run.path))
    for hit in report.hits:
        run.track(plot_km(hit, run.file(f"km_superset_{hit.index}.png")))
    return {
        "n_significant": len(report.hits),
        "n_skipped": len(report.skipped),
        "n_samples": len(shared),
    }


def _cmd_reproduce(v: dict, run: RunDir) -> dict:
    from .dataio import align, load_clinical, load_expression, load_gmt
    from .pipelines import repro_pipeline
    from .plotting import plot_repro
    from .reports import write_repro_report

    expr = load_expression(v["expr"], "logtpm")
    sets = load_gmt(v["gmt"])
    clinical = load_clinical(v["clinical"])
    expr, sets, clinical = align(expr, sets, clinical)
    report = repro_pipeline(
        expr,
        clinical,
        sets,
        split=v["split"],
        sig_p=v["sig_p"],
        seed=v["seed"],
        superset_dim=v["superset_dim"],
        config=_train_config(v),
    )
    run.track(*write_repro_report(report, run.path))
    run.track(plot_repro(report, run.file("jaccard.png")))
    return {
        "superset_jaccard": report.superset_jaccard,
        "geneset_jaccard": report.geneset_jaccard,
        "flags": list(report.flags),
    }


def _cmd_classify(v: dict, run: RunDir) -> dict:
    from .dataio import align, load_expression, load_gmt
    from .errors import AlignmentError
    from .pipelines import classify_pipeline
    from .plotting import plot_fold_accuracies
    from .reports import write_classify_report
    from .dataio import load_labels

    expr = load_expression(v["expr"], "logtpm")
    sets = None
    if v["variant"] in ("superset", "geneset"):
        if v["gmt"] is None:
            raise _config_error(f"variant {v['variant']!r} requires --gmt")
        sets = load_gmt(v["gmt"])
        expr, sets, _ = align(expr, sets, None)
    mapping = load_labels(v["labels"])
    missing = [s for s in expr.sample_ids if s not in mapping]
    if missing:
        raise AlignmentError(
            f"labels file lacks {len(missing)} samples (e.g. {missing[:3]})"
        )
    labels = [mapping[s] for s in expr.sample_ids]
    report = classify_pipeline(
        expr,
        labels,
        sets,
        variant=v["variant"],
        config=_train_config(v),
        superset_dim=v["superset_dim"],
        dense_hidden=v["hidden"],
        pca_k=v["pca_k"],
        k=v["folds"],
    )
    run.track(*write_classify_report(report, run.path))
    run.track(plot_fold_accuracies(report, run.file("folds.png")))
    return {"variant": report.variant, "accuracy": report.cv.accuracy}


def _cmd_embed(v: dict, run: RunDir) -> dict:
    from .dataio import load_expression
    from .embedding import dbscan, tsne_exact
    from .netcore import pca
    from .plotting import plot_embedding
    from .reports import write_embedding

    if v["model"] is not None:
        from .netcore import encode

        model, expr = _load_aligned_model_expr(v)
        _, ss_acts = encode(model, expr)
        points = ss_acts.T
    else:
        expr = load_expression(v["expr"], "logtpm")
        values = expr.values
        if v["pca_first"] is not None:
            values = pca(values, v["pca_first"]).scores
        points = values.T
    result = tsne_exact(
        points, perplexity=v["perplexity"], iters=v["iters"], seed=v["seed"]
    )
    labels = None
    if v["cluster"]:
        labels = dbscan(result.embedding, v["eps"], v["min_pts"])
    run.track(
        write_embedding(
            result.embedding, expr.sample_ids, run.file("embedding.tsv"), labels
        )
    )
    run.track(plot_embedding(result.embedding, labels, run.file("embedding.png")))
    with open(run.file("embedding_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(
            {
                "kl_initial": result.kl_initial,
                "kl_post_exaggeration": result.kl_post_exag,
                "kl_final": result.kl_final,
                "iters": result.iters,
                "n_clusters": (
                    len(set(labels.tolist()) - {-1}) if labels is not None else None
                ),
            },
            fh,
            sort_keys=True,
            indent=2,
        )
        fh.write("\n")
    run.track(run.file("embedding_summary.json"))
    return {"kl_final": result.kl_final}


def _cmd_synth(v: dict, run: RunDir) -> dict:
    from . import synth
    from .dataio import write_clinical, write_expression, write_gmt

    kind = v["kind"]
    allowed = {
        "subtype": ("n_samples", "n_genes", "n_sets", "n_planted", "effect"),
        "survival": ("n_samples", "n_genes", "n_sets", "effect",
                      "censor_fraction"),
        "survival-distributed": ("n_samples", "n_genes", "n_sets", "n_planted",
                                  "effect", "set_noise", "censor_fraction"),
        "classes": ("n_per_class", "n_classes", "n_genes", "n_sets", "effect"),
    }[kind]
    generator = {
        "subtype": synth.synth_subtype,
        "survival": synth.synth_survival,
        "survival-distributed": synth.synth_survival_distributed,
        "classes": synth.synth_classes,
    }[kind]
    all_params = (
        "n_samples", "n_genes", "n_sets", "n_planted", "effect",
        "censor_fraction", "set_noise", "n_per_class", "n_classes",
    )
    stray = [p for p in all_params if v[p] is not None and p not in allowed]
    if stray:
        raise _config_error(
            f"option(s) not supported by kind {kind!r}: "
            + ", ".join("--" + s.replace("_", "-") for s in stray)
        )
    kwargs = {p: v[p] for p in allowed if v[p] is not None}
    truth = generator(seed=v["seed"], **kwargs)

    write_expression(truth.expression, run.file("expression.tsv"))
    run.track(run.file("expression.tsv"))
    write_gmt(truth.collection, run.file("genesets.gmt"))
    run.track(run.file("genesets.gmt"))
    details: dict = {"kind": kind, "n_samples": truth.expression.n_samples}
    label_col, labels = {
        "subtype": ("group", lambda t: t.groups),
        "survival": ("risk", lambda t: t.risk_group),
        "survival-distributed": ("risk", lambda t: t.risk_group),
        "classes": ("label", lambda t: t.labels),
    }[kind]
    with open(run.file("labels.tsv"), "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"sample_id\t{label_col}\n")
        for s, lab in zip(truth.expression.sample_ids, labels(truth)):
            fh.write(f"{s}\t{lab}\n")
    run.track(run.file("labels.tsv"))
    if hasattr(truth, "clinical"):
        write_clinical(truth.clinical, run.file("clinical.tsv"))
        run.track(run.file("clinical.tsv"))
    if hasattr(truth, "planted"):
        details["planted"] = list(truth.planted)
    with open(run.file("truth.json"), "w", encoding="utf-8") as fh:
        json.dump(details, fh, sort_keys=True, indent=2)
        fh.write("\n")
    run.track(run.file("truth.json"))
    return details


HANDLERS: dict[str, Callable[[dict, RunDir], dict]] = {
    "prep": _cmd_prep,
    "dedup": _cmd_dedup,
    "train": _cmd_train,
    "encode": _cmd_encode,
    "subtype": _cmd_subtype,
    "survive": _cmd_survive,
    "reproduce": _cmd_reproduce,
    "classify": _cmd_classify,
    "embed": _cmd_embed,
    "synth": _cmd_synth,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    ns = vars(args)
    command = ns.pop("command")

    from .errors import ConfigError, DataError

    try:
        resolved = _resolve(command, ns)
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    if resolved["threads"] is not None:
        _set_threads(resolved["threads"])  # before numpy is first imported

    try:
        run = RunDir(resolved["out"])
    except (DataError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    started = time.monotonic()
    try:
        details = HANDLERS[command](resolved, run)
        _write_manifest(run, command, resolved, details, time.monotonic() - started)
        return 0
    except (DataError, ConfigError) as exc:
        run.remove_partial()
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception:
        run.remove_partial()
        traceback.print_exc()
        return 1
    finally:
        run.release()


if __name__ == "__main__":
    sys.exit(main())
