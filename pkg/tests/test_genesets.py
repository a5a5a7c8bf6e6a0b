"""Gene-set containers, kappa agreement and de-duplication.

kappa is checked against a from-scratch 2x2 contingency computation, and
dedup against an independent breadth-first component search.
"""

import math
from collections import deque

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from supersetae.errors import (
    ConsistencyError,
    DegenerateError,
    DomainError,
    DuplicateError,
    EmptyResultError,
)
from supersetae.genesets import (
    GeneSet,
    GeneSetCollection,
    MembershipMask,
    build_mask,
    dedup,
    kappa,
    pairwise_kappa,
    size_filter,
)

UNIVERSE_10 = tuple(f"g{i}" for i in range(1, 11))


def kappa_oracle(a, b, universe):
    """Independent route: build the 2x2 table cell by cell."""
    n11 = n10 = n01 = n00 = 0
    sa, sb = set(a), set(b)
    for g in universe:
        ina, inb = g in sa, g in sb
        if ina and inb:
            n11 += 1
        elif ina:
            n10 += 1
        elif inb:
            n01 += 1
        else:
            n00 += 1
    n = n11 + n10 + n01 + n00
    po = (n11 + n00) / n
    pa = (n11 + n10) / n
    pb = (n11 + n01) / n
    pe = pa * pb + (1 - pa) * (1 - pb)
    if pe == 1.0:
        return None
    k = (po - pe) / (1 - pe)
    se = math.sqrt(pe / (n * (1 - pe)))
    from scipy.stats import norm

    return k, float(norm.sf(k / se))


def gs(name, members):
    return GeneSet(name, "", tuple(members))


def test_kappa_identical_sets():
    a = gs("a", ["g1", "g2"])
    assert kappa(a, gs("b", ["g1", "g2"]), UNIVERSE_10).kappa == pytest.approx(1.0)


def test_kappa_complementary_halves():
    a = gs("a", [f"g{i}" for i in range(1, 6)])
    b = gs("b", [f"g{i}" for i in range(6, 11)])
    assert kappa(a, b, UNIVERSE_10).kappa == pytest.approx(-1.0)


def test_kappa_partial_overlap_hand_value():
    res = kappa(gs("a", ["g1", "g2", "g3"]), gs("b", ["g1", "g2", "g4"]), UNIVERSE_10)
    assert res.kappa == pytest.approx(0.523810, abs=1e-4)


def test_kappa_matches_oracle_random():
    rng = np.random.default_rng(2)
    universe = tuple(f"g{i}" for i in range(40))
    for _ in range(60):
        a = gs("a", [g for g in universe if rng.random() < 0.3] or ["g0"])
        b = gs("b", [g for g in universe if rng.random() < 0.4] or ["g1"])
        if a.member_set == set(universe) or b.member_set == set(universe):
            continue
        res = kappa(a, b, universe)
        ok, op = kappa_oracle(a.members, b.members, universe)
        assert res.kappa == pytest.approx(ok, abs=1e-12)
        assert res.p_value == pytest.approx(op, abs=1e-12)


def test_kappa_symmetry():
    a = gs("a", ["g1", "g2", "g5"])
    b = gs("b", ["g2", "g7"])
    r1 = kappa(a, b, UNIVERSE_10)
    r2 = kappa(b, a, UNIVERSE_10)
    assert r1.kappa == r2.kappa
    assert r1.p_value == r2.p_value


def test_kappa_degenerate_universe_set():
    full = gs("full", UNIVERSE_10)
    with pytest.raises(DegenerateError):
        kappa(full, gs("b", ["g1"]), UNIVERSE_10)


def test_kappa_member_outside_universe():
    with pytest.raises(ConsistencyError):
        kappa(gs("a", ["zz"]), gs("b", ["g1"]), UNIVERSE_10)


def test_pairwise_kappa_matches_scalar():
    rng = np.random.default_rng(5)
    universe = tuple(f"g{i}" for i in range(25))
    sets = []
    for i in range(6):
        members = [g for g in universe if rng.random() < 0.35]
        sets.append(gs(f"s{i}", members or [universe[i]]))
    c = GeneSetCollection(tuple(sets), universe)
    matrix = np.array(
        [[1 if g in s.member_set else 0 for s in sets] for g in universe],
        dtype=np.uint8,
    )
    kmat, pmat = pairwise_kappa(matrix)
    for i in range(6):
        for j in range(6):
            if i == j:
                continue
            res = kappa(sets[i], sets[j], universe)
            assert kmat[i, j] == pytest.approx(res.kappa, abs=1e-12)
            assert pmat[i, j] == pytest.approx(res.p_value, abs=1e-12)


# ---------------------------------------------------------------------------
# containers


def test_gene_set_dedupes_members_keeps_order():
    s = gs("a", ["g3", "g1", "g3", "g2", "g1"])
    assert s.members == ("g3", "g1", "g2")
    assert s.size == 3


def test_gene_set_empty_rejected():
    with pytest.raises(DomainError):
        gs("a", [])


def test_collection_duplicate_names_rejected():
    with pytest.raises(DuplicateError):
        GeneSetCollection((gs("a", ["g1"]), gs("a", ["g2"])))


def test_collection_universe_first_appearance_order():
    c = GeneSetCollection((gs("a", ["g2", "g1"]), gs("b", ["g1", "g3"])))
    assert c.universe == ("g2", "g1", "g3")


def test_collection_explicit_universe_must_cover():
    with pytest.raises(ConsistencyError):
        GeneSetCollection((gs("a", ["g1", "zz"]),), ("g1", "g2"))


def test_size_filter_inclusive_bounds():
    sets = tuple(gs(f"s{n}", [f"g{i}" for i in range(n)]) for n in (4, 5, 6, 9, 10))
    c = GeneSetCollection(sets)
    kept = size_filter(c, 5, 9)
    assert kept.names == ("s5", "s6", "s9")


def test_size_filter_rederives_universe():
    # universe is always the union of the surviving sets' members
    c = GeneSetCollection((gs("a", ["g1", "g2"]), gs("b", ["g3"])))
    kept = size_filter(c, 2, 10)
    assert kept.universe == ("g1", "g2")


# ---------------------------------------------------------------------------
# dedup


def dedup_components_oracle(collection, p_threshold):
    """Independent BFS over the kappa-significance graph."""
    n = len(collection)
    sets = collection.sets
    adj = [[] for _ in range(n)]
    for i in range(n):
        for j in range(i + 1, n):
            res = kappa(sets[i], sets[j], collection.universe)
            if res.p_value < p_threshold and res.kappa > 0:
                adj[i].append(j)
                adj[j].append(i)
    seen = [False] * n
    comps = []
    for i in range(n):
        if seen[i]:
            continue
        comp = []
        queue = deque([i])
        seen[i] = True
        while queue:
            u = queue.popleft()
            comp.append(u)
            for v in adj[u]:
                if not seen[v]:
                    seen[v] = True
                    queue.append(v)
        comps.append(frozenset(comp))
    return set(comps)


def _random_collection(rng, n_sets=8, n_genes=60):
    universe = tuple(f"g{i}" for i in range(n_genes))
    sets = []
    for i in range(n_sets):
        center = rng.integers(0, n_genes)
        width = int(rng.integers(5, 25))
        members = [universe[(center + k) % n_genes] for k in range(width)]
        sets.append(gs(f"s{i:02d}", members))
    return GeneSetCollection(tuple(sets), universe)


def test_dedup_components_match_oracle():
    rng = np.random.default_rng(9)
    for _ in range(10):
        c = _random_collection(rng)
        result = dedup(c, p_threshold=1e-3)
        got = {
            frozenset(c.names.index(m) for m in comp.member_names)
            for comp in result.components
        }
        assert got == dedup_components_oracle(c, 1e-3)


def test_dedup_keeps_largest_representative():
    big = gs("big", [f"g{i}" for i in range(20)])
    sub = gs("sub", [f"g{i}" for i in range(15)])
    other = gs("other", [f"g{i}" for i in range(40, 50)])
    pad = gs("pad", [f"g{i}" for i in range(60, 160)])
    c = GeneSetCollection((sub, big, other, pad))
    result = dedup(c, p_threshold=1e-3)
    assert "big" in result.collection.names
    assert "sub" not in result.collection.names
    assert "other" in result.collection.names


def test_dedup_tie_breaks_lexicographically():
    a = gs("zeta", [f"g{i}" for i in range(10)])
    b = gs("alpha", [f"g{i}" for i in range(10)])
    pad = gs("pad", [f"g{i}" for i in range(50, 150)])
    c = GeneSetCollection((a, b, pad))
    result = dedup(c, p_threshold=1e-3)
    assert "alpha" in result.collection.names
    assert "zeta" not in result.collection.names


def test_dedup_idempotent():
    rng = np.random.default_rng(13)
    c = _random_collection(rng, n_sets=10)
    once = dedup(c, p_threshold=1e-3)
    twice = dedup(once.collection, p_threshold=1e-3)
    assert twice.collection.names == once.collection.names


def test_dedup_audit_min_p():
    a = gs("a", [f"g{i}" for i in range(12)])
    b = gs("b", [f"g{i}" for i in range(12)])  # identical membership
    pad = gs("pad", [f"g{i}" for i in range(40, 140)])
    c = GeneSetCollection((a, b, pad))
    result = dedup(c, p_threshold=1e-3)
    merged = next(comp for comp in result.components if len(comp.member_names) == 2)
    expected = kappa(a, b, c.universe).p_value
    assert merged.min_p_value == pytest.approx(expected)
    singleton = next(comp for comp in result.components if len(comp.member_names) == 1)
    assert singleton.min_p_value is None


def test_dedup_no_edges_is_identity():
    a = gs("a", [f"g{i}" for i in range(0, 10)])
    b = gs("b", [f"g{i}" for i in range(30, 40)])
    c = GeneSetCollection((a, b))
    result = dedup(c, p_threshold=1e-7)
    assert result.collection.names == ("a", "b")
    assert len(result.components) == 2


# ---------------------------------------------------------------------------
# membership mask


def test_build_mask_shape_and_content():
    c = GeneSetCollection((gs("a", ["g1", "g3"]), gs("b", ["g2"])))
    mask = build_mask(c, ("g1", "g2", "g3"))
    assert mask.matrix.shape == (3, 2)
    assert mask.matrix.tolist() == [[1, 0], [0, 1], [1, 0]]
    assert mask.set_names == ("a", "b")


def test_build_mask_missing_gene_rejected():
    c = GeneSetCollection((gs("a", ["g1", "gX"]),))
    with pytest.raises(ConsistencyError):
        build_mask(c, ("g1", "g2"))


def test_build_mask_empty_collection_rejected():
    with pytest.raises(EmptyResultError):
        build_mask(GeneSetCollection(()), ("g1",))


def test_membership_mask_all_zero_column_rejected():
    with pytest.raises(ConsistencyError):
        MembershipMask(np.array([[1, 0], [1, 0]]), ("g1", "g2"), ("a", "b"))


@given(st.integers(0, 2**32 - 1))
@settings(max_examples=20, deadline=None)
def test_dedup_idempotence_property(seed):
    c = _random_collection(np.random.default_rng(seed), n_sets=6, n_genes=40)
    once = dedup(c, p_threshold=1e-2)
    twice = dedup(once.collection, p_threshold=1e-2)
    assert twice.collection.names == once.collection.names
