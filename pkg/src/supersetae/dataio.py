"""Loading, transforming and aligning expression, gene-set and clinical inputs.

All tabular inputs are UTF-8 TSV with LF or CRLF line ends; identifier
matching is exact, case-sensitive string equality. Loaders are pure and
return immutable values. Expression values are logTPM = log2(TPM + 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    AlignmentError,
    ConfigError,
    ConsistencyError,
    DomainError,
    DuplicateError,
    EmptyResultError,
    ParseError,
)
from .genesets import GeneSet, GeneSetCollection


@dataclass(frozen=True)
class ExpressionMatrix:
    """Dense logTPM matrix of shape [n_genes x n_samples], both axes labeled."""

    gene_ids: tuple[str, ...]
    sample_ids: tuple[str, ...]
    values: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        v = np.array(self.values, dtype=np.float64)
        object.__setattr__(self, "values", v)
        _check_unique(self.gene_ids, "gene")
        _check_unique(self.sample_ids, "sample")
        if v.shape != (len(self.gene_ids), len(self.sample_ids)):
            raise ConsistencyError(
                f"value shape {v.shape} does not match "
                f"{len(self.gene_ids)} genes x {len(self.sample_ids)} samples"
            )
        if v.size and not np.isfinite(v).all():
            raise DomainError("expression values must be finite")
        if v.size and v.min() < 0:
            raise DomainError("logTPM values must be >= 0")
        v.setflags(write=False)

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_samples(self) -> int:
        return len(self.sample_ids)

    def subset_genes(self, gene_ids: Iterable[str]) -> "ExpressionMatrix":
        wanted = tuple(gene_ids)
        index = {g: i for i, g in enumerate(self.gene_ids)}
        try:
            rows = [index[g] for g in wanted]
        except KeyError as exc:
            raise AlignmentError(f"gene {exc.args[0]!r} not in matrix") from None
        return ExpressionMatrix(wanted, self.sample_ids, self.values[rows, :])

    def subset_samples(self, sample_ids: Iterable[str]) -> "ExpressionMatrix":
        wanted = tuple(sample_ids)
        index = {s: i for i, s in enumerate(self.sample_ids)}
        try:
            cols = [index[s] for s in wanted]
        except KeyError as exc:
            raise AlignmentError(f"sample {exc.args[0]!r} not in matrix") from None
        return ExpressionMatrix(self.gene_ids, wanted, self.values[:, cols])


@dataclass(frozen=True)
class ClinicalTable:
    """Per-sample follow-up time (days), death indicator and label columns."""

    sample_ids: tuple[str, ...]
    time_days: np.ndarray
    event: np.ndarray
    labels: dict[str, tuple[str, ...]] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sample_ids", tuple(self.sample_ids))
        t = np.array(self.time_days, dtype=np.int64)
        e = np.array(self.event, dtype=bool)
        object.__setattr__(self, "time_days", t)
        object.__setattr__(self, "event", e)
        _check_unique(self.sample_ids, "sample")
        n = len(self.sample_ids)
        if t.shape != (n,) or e.shape != (n,):
            raise ConsistencyError("clinical column lengths disagree")
        if t.size and t.min() < 0:
            raise DomainError("time_days must be non-negative")
        for name, col in self.labels.items():
            if len(col) != n:
                raise ConsistencyError(f"label column {name!r} length mismatch")
        t.setflags(write=False)
        e.setflags(write=False)

    def __len__(self) -> int:
        return len(self.sample_ids)

    def subset(self, sample_ids: Iterable[str]) -> "ClinicalTable":
        wanted = tuple(sample_ids)
        index = {s: i for i, s in enumerate(self.sample_ids)}
        try:
            rows = [index[s] for s in wanted]
        except KeyError as exc:
            raise AlignmentError(f"sample {exc.args[0]!r} not in table") from None
        labels = {
            name: tuple(col[i] for i in rows) for name, col in self.labels.items()
        }
        return ClinicalTable(wanted, self.time_days[rows], self.event[rows], labels)


def _check_unique(ids: Sequence[str], kind: str) -> None:
    if len(set(ids)) != len(ids):
        seen: set[str] = set()
        for x in ids:
            if x in seen:
                raise DuplicateError(f"duplicate {kind} identifier {x!r}")
            seen.add(x)


def _read_rows(path) -> list[list[str]]:
    """Split a TSV into rows of fields, dropping trailing blank lines only."""
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.read().split("\n")
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    while lines and lines[-1] == "":
        lines.pop()
    return [line.split("\t") for line in lines]


def load_expression(path, unit: str = "tpm") -> ExpressionMatrix:
    """Read a genes x samples TSV; ``unit`` is ``tpm`` or ``logtpm``.

    The header's first cell is ignored, the rest are sample identifiers.
    TPM inputs are transformed to log2(TPM + 1); logTPM inputs are taken
    as-is and must already be non-negative.
    """
    if unit not in ("tpm", "logtpm"):
        raise ConfigError(f"unit must be 'tpm' or 'logtpm', got {unit!r}")
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    sample_ids = tuple(header[1:])
    if not sample_ids:
        raise ParseError(f"{path}: header names no samples")
    width = len(header)
    if len(rows) < 2:
        raise ParseError(f"{path}: no gene rows")
    gene_ids: list[str] = []
    body = np.empty((len(rows) - 1, len(sample_ids)), dtype=np.float64)
    for k, fields in enumerate(rows[1:], start=2):
        if len(fields) != width:
            raise ParseError(
                f"{path}:{k}: expected {width} columns, found {len(fields)}"
            )
        gene_ids.append(fields[0])
        try:
            body[k - 2] = np.asarray(fields[1:], dtype=np.float64)
        except ValueError:
            col = _first_bad_float(fields[1:])
            raise ParseError(
                f"{path}:{k}: column {col + 2} is not a number: "
                f"{fields[1 + col]!r}"
            ) from None
    _check_unique_loaded(gene_ids, path)
    if not np.isfinite(body).all():
        raise DomainError(f"{path}: non-finite expression value")
    if unit == "tpm":
        if body.size and body.min() < 0:
            k = int(np.argwhere((body < 0).any(axis=1))[0, 0])
            raise DomainError(f"{path}: negative TPM in gene row {gene_ids[k]!r}")
        body = np.log2(body + 1.0)
    return ExpressionMatrix(tuple(gene_ids), sample_ids, body)


def _first_bad_float(tokens: Sequence[str]) -> int:
    for i, tok in enumerate(tokens):
        try:
            float(tok)
        except ValueError:
            return i
    return 0


def _check_unique_loaded(gene_ids: Sequence[str], path) -> None:
    seen: set[str] = set()
    for g in gene_ids:
        if g in seen:
            raise DuplicateError(f"{path}: duplicate gene symbol {g!r}")
        seen.add(g)


def write_expression(m: ExpressionMatrix, path) -> None:
    """Write logTPM TSV; floats use repr so a reload is bit-exact."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("gene_id\t" + "\t".join(m.sample_ids) + "\n")
        for g, row in zip(m.gene_ids, m.values):
            fh.write(g + "\t" + "\t".join(repr(v) for v in row.tolist()) + "\n")


def filter_genes(
    m: ExpressionMatrix, mean_min: float = 1.0, sd_min: float = 0.5
) -> ExpressionMatrix:
    """Keep genes with logTPM mean > mean_min and sample sd (n-1) > sd_min."""
    if m.n_genes == 0 or m.n_samples == 0:
        raise EmptyResultError("cannot filter an empty matrix")
    if m.n_samples < 2:
        raise DomainError("gene filtering needs >= 2 samples for the sd")
    means = m.values.mean(axis=1)
    sds = m.values.std(axis=1, ddof=1)
    keep = (means > mean_min) & (sds > sd_min)
    if not keep.any():
        raise EmptyResultError(
            f"no gene passed mean > {mean_min} and sd > {sd_min}"
        )
    kept = tuple(g for g, k in zip(m.gene_ids, keep) if k)
    return ExpressionMatrix(kept, m.sample_ids, m.values[keep, :])


def load_gmt(path) -> GeneSetCollection:
    """Read gene sets: one per line, ``name TAB description TAB gene ...``."""
    sets: list[GeneSet] = []
    names: set[str] = set()
    for k, fields in enumerate(_read_rows(path), start=1):
        if len(fields) < 3:
            raise ParseError(f"{path}:{k}: expected >= 3 tab-separated fields")
        name, description = fields[0], fields[1]
        if name in names:
            raise DuplicateError(f"{path}:{k}: duplicate gene set name {name!r}")
        names.add(name)
        sets.append(GeneSet(name, description, tuple(fields[2:])))
    return GeneSetCollection(tuple(sets))


def write_gmt(c: GeneSetCollection, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in c.sets:
            fh.write(s.name + "\t" + s.description + "\t" + "\t".join(s.members) + "\n")


def load_clinical(path, cap_days: int = 1825) -> ClinicalTable:
    """Read a clinical TSV and cap follow-up at ``cap_days``.

    Header must name sample_id, time_days and event columns; any further
    columns are kept as categorical label columns. Event values must be
    0 or 1. Deaths recorded after the cap become censored at the cap.
    """
    rows = _read_rows(path)
    if not rows:
        raise ParseError(f"{path}: empty file")
    header = rows[0]
    try:
        i_sample = header.index("sample_id")
        i_time = header.index("time_days")
        i_event = header.index("event")
    except ValueError as exc:
        raise ParseError(f"{path}: missing required column: {exc}") from None
    label_cols = [
        (i, name)
        for i, name in enumerate(header)
        if i not in (i_sample, i_time, i_event)
    ]
    sample_ids: list[str] = []
    times: list[int] = []
    events: list[bool] = []
    labels: dict[str, list[str]] = {name: [] for _, name in label_cols}
    for k, fields in enumerate(rows[1:], start=2):
        if len(fields) != len(header):
            raise ParseError(
                f"{path}:{k}: expected {len(header)} columns, found {len(fields)}"
            )
        sample_ids.append(fields[i_sample])
        try:
            t = int(fields[i_time])
        except ValueError:
            raise ParseError(
                f"{path}:{k}: time_days is not an integer: {fields[i_time]!r}"
            ) from None
        if t < 0:
            raise DomainError(f"{path}:{k}: negative time_days {t}")
        times.append(t)
        ev = fields[i_event]
        if ev not in ("0", "1"):
            raise ParseError(f"{path}:{k}: event must be 0 or 1, got {ev!r}")
        events.append(ev == "1")
        for i, name in label_cols:
            labels[name].append(fields[i])
    try:
        table = ClinicalTable(
            tuple(sample_ids),
            np.asarray(times, dtype=np.int64),
            np.asarray(events, dtype=bool),
            {name: tuple(col) for name, col in labels.items()},
        )
    except DuplicateError as exc:
        raise DuplicateError(f"{path}: {exc}") from None
    return cap_followup(table, cap_days)


def cap_followup(t: ClinicalTable, cap_days: int = 1825) -> ClinicalTable:
    """Truncate follow-up beyond the cap; late deaths become censored.

    Idempotent and never increases any time. A death exactly at the cap
    stays a death; only times strictly past the cap are rewritten.
    """
    if cap_days < 0:
        raise ConfigError(f"cap_days must be non-negative, got {cap_days}")
    late = t.time_days > cap_days
    if not late.any():
        return t
    time = np.where(late, cap_days, t.time_days)
    event = np.where(late, False, t.event)
    return ClinicalTable(t.sample_ids, time, event, dict(t.labels))


def write_clinical(t: ClinicalTable, path) -> None:
    cols = list(t.labels)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(["sample_id", "time_days", "event", *cols]) + "\n")
        for i, s in enumerate(t.sample_ids):
            extra = [t.labels[c][i] for c in cols]
            row = [s, str(int(t.time_days[i])), str(int(t.event[i])), *extra]
            fh.write("\t".join(row) + "\n")


def load_labels(path) -> dict[str, str]:
    """Read a two-column TSV (header required) mapping sample id to label."""
    rows = _read_rows(path)
    if len(rows) < 2:
        raise ParseError(f"{path}: expected a header and at least one row")
    out: dict[str, str] = {}
    for k, fields in enumerate(rows[1:], start=2):
        if len(fields) != 2:
            raise ParseError(f"{path}:{k}: expected 2 columns, found {len(fields)}")
        sample, label = fields
        if sample in out:
            raise DuplicateError(f"{path}:{k}: duplicate sample {sample!r}")
        out[sample] = label
    return out


def align(
    m: ExpressionMatrix,
    c: GeneSetCollection,
    t: ClinicalTable | None = None,
) -> tuple[ExpressionMatrix, GeneSetCollection, ClinicalTable | None]:
    """Restrict all inputs to shared identifiers.

    Expression keeps only genes that belong to some set; each set keeps
    only genes present in the expression matrix (empty sets are dropped);
    when a clinical table is given, both it and the expression columns
    are restricted to shared samples, in expression column order.
    Idempotent.
    """
    union = set()
    for s in c.sets:
        union |= s.member_set
    kept_genes = tuple(g for g in m.gene_ids if g in union)
    if not kept_genes:
        raise AlignmentError("no gene shared between expression and gene sets")
    gene_set = set(kept_genes)
    out_m = m.subset_genes(kept_genes)

    new_sets = []
    for s in c.sets:
        members = tuple(g for g in s.members if g in gene_set)
        if members:
            new_sets.append(GeneSet(s.name, s.description, members))
    out_c = GeneSetCollection(tuple(new_sets))

    out_t = None
    if t is not None:
        have = set(t.sample_ids)
        shared = tuple(s for s in m.sample_ids if s in have)
        if not shared:
            raise AlignmentError("no sample shared between expression and clinical")
        out_m = out_m.subset_samples(shared)
        out_t = t.subset(shared)
    return out_m, out_c, out_t


def log_tpm(values: np.ndarray) -> np.ndarray:
    """log2(TPM + 1) on an array; rejects negative inputs."""
    v = np.asarray(values, dtype=np.float64)
    if v.size and v.min() < 0:
        raise DomainError("negative TPM")
    return np.log2(v + 1.0)


def checksum(path) -> str:
    """SHA-256 hex digest of a file, for run manifests."""
    import hashlib

    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()
