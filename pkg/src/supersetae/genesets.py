"""Gene-set containers, kappa-statistic de-duplication and the connectivity mask.

Collections of named gene sets are reduced by clustering pairs whose
membership agreement (Cohen's kappa over the collection universe) is
significantly positive, keeping the largest set of each cluster. The
surviving collection is turned into a binary genes x sets mask that
restricts the first network layer to biologically annotated connections.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, NamedTuple

import numpy as np
from scipy.stats import norm

from .errors import (
    ConsistencyError,
    DegenerateError,
    DomainError,
    DuplicateError,
    EmptyResultError,
)


@dataclass(frozen=True)
class GeneSet:
    """A named collection of gene symbols.

    ``members`` keeps first-appearance order with duplicates removed, so
    iteration and serialization are deterministic.
    """

    name: str
    description: str
    members: tuple[str, ...]

    def __post_init__(self):
        seen: dict[str, None] = dict.fromkeys(self.members)
        object.__setattr__(self, "members", tuple(seen))
        if not self.members:
            raise DomainError(f"gene set {self.name!r} has no members")

    @cached_property
    def member_set(self) -> frozenset[str]:
        return frozenset(self.members)

    @property
    def size(self) -> int:
        return len(self.members)


@dataclass(frozen=True)
class GeneSetCollection:
    """An ordered list of gene sets plus the ordered union of their members."""

    sets: tuple[GeneSet, ...]
    universe: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "sets", tuple(self.sets))
        names = [s.name for s in self.sets]
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise DuplicateError(f"duplicate gene set names: {', '.join(dupes)}")
        if not self.universe:
            object.__setattr__(self, "universe", _member_union(self.sets))
        else:
            object.__setattr__(self, "universe", tuple(self.universe))
            if len(set(self.universe)) != len(self.universe):
                raise DuplicateError("universe contains duplicate symbols")
            uni = set(self.universe)
            for s in self.sets:
                missing = s.member_set - uni
                if missing:
                    raise ConsistencyError(
                        f"set {s.name!r} has members outside the universe: "
                        f"{sorted(missing)[:5]}"
                    )

    def __len__(self) -> int:
        return len(self.sets)

    def __iter__(self):
        return iter(self.sets)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(s.name for s in self.sets)

    def get(self, name: str) -> GeneSet:
        for s in self.sets:
            if s.name == name:
                return s
        raise KeyError(name)


def _member_union(sets: Iterable[GeneSet]) -> tuple[str, ...]:
    seen: dict[str, None] = {}
    for s in sets:
        for g in s.members:
            seen.setdefault(g, None)
    return tuple(seen)


@dataclass(frozen=True)
class MembershipMask:
    """Binary genes x sets matrix: entry (g, s) is 1 iff gene g belongs to set s."""

    matrix: np.ndarray
    gene_ids: tuple[str, ...]
    set_names: tuple[str, ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.uint8)
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "gene_ids", tuple(self.gene_ids))
        object.__setattr__(self, "set_names", tuple(self.set_names))
        if m.shape != (len(self.gene_ids), len(self.set_names)):
            raise ConsistencyError(
                f"mask shape {m.shape} does not match "
                f"{len(self.gene_ids)} genes x {len(self.set_names)} sets"
            )
        if m.size and m.sum(axis=0).min() < 1:
            raise ConsistencyError("mask has a column with no member genes")
        m.setflags(write=False)

    @property
    def n_genes(self) -> int:
        return len(self.gene_ids)

    @property
    def n_sets(self) -> int:
        return len(self.set_names)

    def column_sizes(self) -> np.ndarray:
        return self.matrix.sum(axis=0).astype(np.int64)


def size_filter(
    c: GeneSetCollection, min_size: int = 15, max_size: int = 500
) -> GeneSetCollection:
    """Keep sets whose membership count lies in [min_size, max_size] inclusive."""
    kept = tuple(s for s in c.sets if min_size <= s.size <= max_size)
    return GeneSetCollection(kept)


class KappaResult(NamedTuple):
    kappa: float
    p_value: float


def kappa(
    a: GeneSet | Iterable[str],
    b: GeneSet | Iterable[str],
    universe: Iterable[str],
) -> KappaResult:
    """Cohen's kappa between two membership indicators over ``universe``.

    Builds the 2x2 agreement table of in/out indicators across the
    universe transcripts:

        po = (n11 + n00) / N
        pe = pa*pb + (1-pa)*(1-pb)
        kappa = (po - pe) / (1 - pe)

    The p-value is the one-sided upper tail of z = kappa / SE with the
    large-sample null standard error SE = sqrt(pe / (N * (1 - pe))).
    """
    uni = tuple(universe)
    n = len(uni)
    if n == 0:
        raise DomainError("kappa universe is empty")
    uniset = set(uni)
    sa = a.member_set if isinstance(a, GeneSet) else frozenset(a)
    sb = b.member_set if isinstance(b, GeneSet) else frozenset(b)
    if not sa <= uniset or not sb <= uniset:
        raise ConsistencyError("kappa inputs must be subsets of the universe")
    if len(sa) in (0, n) or len(sb) in (0, n):
        raise DegenerateError(
            "kappa undefined: empty set or set equal to the universe "
            "(expected agreement 1)"
        )
    n11 = len(sa & sb)
    pa = len(sa) / n
    pb = len(sb) / n
    po = (2 * n11 + n - len(sa) - len(sb)) / n
    pe = pa * pb + (1.0 - pa) * (1.0 - pb)
    k = (po - pe) / (1.0 - pe)
    se = np.sqrt(pe / (n * (1.0 - pe)))
    p = float(norm.sf(k / se))
    return KappaResult(float(k), p)


def pairwise_kappa(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized kappa and one-sided p-value for every column pair of a 0/1 matrix.

    Pairs involving an empty or universe-sized column get kappa = NaN and
    p = 1 (degenerate, never clustered). The diagonal is left at NaN/1 too;
    callers only consume off-diagonal entries. Agrees with :func:`kappa`
    entrywise; the scalar version is kept as the reference implementation.
    """
    m = np.asarray(matrix, dtype=np.float64)
    n, _ = m.shape
    sizes = m.sum(axis=0)
    n11 = m.T @ m
    pa = sizes / n
    po = (2.0 * n11 + n - sizes[:, None] - sizes[None, :]) / n
    pe = pa[:, None] * pa[None, :] + (1.0 - pa)[:, None] * (1.0 - pa)[None, :]
    degenerate = (sizes == 0) | (sizes == n)
    bad = degenerate[:, None] | degenerate[None, :]
    bad |= np.eye(len(sizes), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore"):
        k = (po - pe) / (1.0 - pe)
        se = np.sqrt(pe / (n * (1.0 - pe)))
        z = k / se
    k[bad] = np.nan
    p = np.ones_like(k)
    p[~bad] = norm.sf(z[~bad])
    return k, p


@dataclass(frozen=True)
class DedupComponent:
    """Audit record for one connected component of the significance graph."""

    component_id: int
    member_names: tuple[str, ...]
    representative: str
    min_p_value: float | None  # None for singleton components


@dataclass(frozen=True)
class DedupResult:
    collection: GeneSetCollection
    components: tuple[DedupComponent, ...]


def dedup(c: GeneSetCollection, p_threshold: float = 1e-7) -> DedupResult:
    """Collapse clusters of similar sets to their largest member.

    Two sets are connected when their kappa p-value is below
    ``p_threshold`` and kappa is positive (anti-correlated sets never
    merge). Each connected component of that graph is replaced by its
    largest member set, ties broken by lexicographically smallest name.
    Pairs where kappa is degenerate (a set spanning the whole universe)
    contribute no edge. Idempotent: re-running on its own output changes
    nothing.
    """
    n_sets = len(c)
    if n_sets == 0:
        return DedupResult(c, ())
    member_matrix = _membership_matrix(c)
    kmat, pvals = pairwise_kappa(member_matrix)

    # union-find over significant positive-kappa pairs
    parent = list(range(n_sets))

    def find(i: int) -> int:
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    ii, jj = np.triu_indices(n_sets, k=1)
    edge = (pvals[ii, jj] < p_threshold) & (kmat[ii, jj] > 0)
    for i, j in zip(ii[edge], jj[edge]):
        ri, rj = find(int(i)), find(int(j))
        if ri != rj:
            parent[max(ri, rj)] = min(ri, rj)

    groups: dict[int, list[int]] = {}
    for i in range(n_sets):
        groups.setdefault(find(i), []).append(i)

    components: list[DedupComponent] = []
    keep: set[int] = set()
    for cid, root in enumerate(sorted(groups)):
        idx = groups[root]
        members = [c.sets[i] for i in idx]
        rep_i = min(idx, key=lambda i: (-c.sets[i].size, c.sets[i].name))
        rep = c.sets[rep_i]
        keep.add(rep_i)
        if len(idx) > 1:
            sub = np.ix_(idx, idx)
            pv = pvals[sub]
            min_p = float(np.nanmin(pv[~np.eye(len(idx), dtype=bool)]))
        else:
            min_p = None
        components.append(
            DedupComponent(
                component_id=cid,
                member_names=tuple(s.name for s in members),
                representative=rep.name,
                min_p_value=min_p,
            )
        )
    kept_sets = tuple(s for i, s in enumerate(c.sets) if i in keep)
    return DedupResult(GeneSetCollection(kept_sets), tuple(components))


def _membership_matrix(c: GeneSetCollection) -> np.ndarray:
    index = {g: i for i, g in enumerate(c.universe)}
    m = np.zeros((len(c.universe), len(c)), dtype=np.uint8)
    for j, s in enumerate(c.sets):
        for g in s.members:
            m[index[g], j] = 1
    return m


def build_mask(c: GeneSetCollection, gene_ids: Iterable[str]) -> MembershipMask:
    """Binary connectivity matrix: rows follow ``gene_ids``, columns follow ``c``."""
    ids = tuple(gene_ids)
    if len(c) == 0:
        raise EmptyResultError("cannot build a mask from an empty collection")
    index = {g: i for i, g in enumerate(ids)}
    m = np.zeros((len(ids), len(c)), dtype=np.uint8)
    for j, s in enumerate(c.sets):
        for g in s.members:
            try:
                m[index[g], j] = 1
            except KeyError:
                raise ConsistencyError(
                    f"gene {g!r} of set {s.name!r} is absent from gene_ids"
                ) from None
    return MembershipMask(m, ids, c.names)
