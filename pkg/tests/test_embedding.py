"""2-D embedding and density clustering.

The affinity construction is checked directly: every row's entropy must
equal log(perplexity), the joint matrix must be symmetric and sum to one.
The descent contract is that the final KL divergence is below the value
recorded when early exaggeration ends.
"""

import math

import numpy as np
import pytest

from supersetae.embedding import (
    _conditional_p,
    _squared_distances,
    dbscan,
    tsne_exact,
)
from supersetae.errors import ConfigError, DomainError


def _blobs(rng, n_per=50, gap=10.0, dim=5):
    a = rng.normal(0.0, 1.0, size=(n_per, dim))
    b = rng.normal(gap, 1.0, size=(n_per, dim))
    return np.vstack([a, b])


# ---------------------------------------------------------------------------
# affinities


def test_row_entropy_matches_perplexity():
    rng = np.random.default_rng(0)
    x = rng.normal(size=(40, 4))
    for perp in (5.0, 10.0, 12.5):
        p = _conditional_p(_squared_distances(x), perp)
        for i in range(40):
            row = p[i][p[i] > 0]
            h = -(row * np.log(row)).sum()
            assert h == pytest.approx(math.log(perp), abs=1e-4)


def test_conditional_rows_sum_to_one_diagonal_zero():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(25, 3))
    p = _conditional_p(_squared_distances(x), 8.0)
    assert np.allclose(p.sum(axis=1), 1.0)
    assert np.all(np.diag(p) == 0.0)


def test_squared_distances_hand_values():
    x = np.array([[0.0, 0.0], [3.0, 4.0]])
    d2 = _squared_distances(x)
    assert d2.tolist() == [[0.0, 25.0], [25.0, 0.0]]


def test_nearest_neighbor_gets_highest_affinity():
    x = np.array([[0.0], [0.1], [5.0], [5.2], [10.0], [10.1], [15.0], [15.3]])
    p = _conditional_p(_squared_distances(x), 2.0)
    assert p[0].argmax() == 1
    assert p[3].argmax() == 2


# ---------------------------------------------------------------------------
# t-SNE descent


def test_tsne_kl_descends_after_exaggeration():
    rng = np.random.default_rng(7)
    pts = _blobs(rng, n_per=100, dim=10)
    res = tsne_exact(pts, perplexity=30.0, iters=1000, seed=0)
    assert res.kl_final < res.kl_post_exag
    assert res.kl_final < res.kl_initial
    assert res.embedding.shape == (200, 2)
    assert res.iters == 1000


def test_tsne_separates_well_separated_blobs():
    rng = np.random.default_rng(7)
    pts = _blobs(rng, n_per=100, dim=10)
    res = tsne_exact(pts, perplexity=30.0, iters=1000, seed=0)
    emb_a, emb_b = res.embedding[:100], res.embedding[100:]
    # the two groups are linearly separable along the centroid axis
    axis = emb_b.mean(axis=0) - emb_a.mean(axis=0)
    proj_a, proj_b = emb_a @ axis, emb_b @ axis
    cut = (proj_a.max() + proj_b.min()) / 2
    acc = ((proj_a < cut).mean() + (proj_b > cut).mean()) / 2
    assert acc == 1.0


def test_tsne_duplicated_pairs_land_close():
    # points duplicated in input stay closer than almost all other pairs
    rng = np.random.default_rng(3)
    base = rng.normal(size=(30, 6))
    pts = np.vstack([base, base[:5] + 1e-9])
    res = tsne_exact(pts, perplexity=5.0, iters=400, seed=1)
    d2 = _squared_distances(res.embedding)
    off = d2[np.triu_indices(35, k=1)]
    decile = np.quantile(off, 0.1)
    for i in range(5):
        assert d2[i, 30 + i] <= decile


def test_tsne_deterministic_for_seed():
    rng = np.random.default_rng(11)
    pts = _blobs(rng, n_per=20, gap=4.0, dim=3)
    a = tsne_exact(pts, perplexity=6.0, iters=150, seed=9)
    b = tsne_exact(pts, perplexity=6.0, iters=150, seed=9)
    assert np.array_equal(a.embedding, b.embedding)
    assert a.kl_final == b.kl_final


def test_tsne_embedding_centered():
    rng = np.random.default_rng(13)
    pts = rng.normal(size=(40, 4))
    res = tsne_exact(pts, perplexity=10.0, iters=100, seed=2)
    assert np.allclose(res.embedding.mean(axis=0), 0.0, atol=1e-9)


def test_tsne_input_validation():
    with pytest.raises(ConfigError, match="perplexity"):
        tsne_exact(np.zeros((50, 2)), perplexity=30.0)  # n < 3*perplexity
    with pytest.raises(ConfigError):
        tsne_exact(np.zeros((50, 2)), perplexity=-1.0)
    with pytest.raises(ConfigError):
        tsne_exact(np.zeros(10), perplexity=2.0)
    with pytest.raises(ConfigError):
        tsne_exact(np.zeros((30, 2)), perplexity=5.0, iters=0)
    bad = np.zeros((30, 2))
    bad[0, 0] = np.nan
    with pytest.raises(DomainError):
        tsne_exact(bad, perplexity=5.0)


def test_tsne_short_run_records_post_exag_from_last_iter():
    rng = np.random.default_rng(5)
    pts = rng.normal(size=(30, 3))
    res = tsne_exact(pts, perplexity=6.0, iters=50, seed=0)  # < 250
    assert res.iters == 50
    assert math.isfinite(res.kl_post_exag)
    assert res.kl_final <= res.kl_post_exag + 1e-9


# ---------------------------------------------------------------------------
# dbscan


def test_dbscan_two_blobs_and_noise():
    rng = np.random.default_rng(0)
    a = rng.normal(0.0, 0.3, size=(20, 2))
    b = rng.normal(8.0, 0.3, size=(20, 2))
    lone = np.array([[100.0, 100.0]])
    labels = dbscan(np.vstack([a, b, lone]), eps=1.5, min_pts=4)
    assert set(labels[:20]) == {0}
    assert set(labels[20:40]) == {1}
    assert labels[40] == -1


def test_dbscan_identical_points_single_cluster():
    pts = np.zeros((10, 2))
    labels = dbscan(pts, eps=0.5, min_pts=3)
    assert set(labels) == {0}


def test_dbscan_min_pts_counts_self():
    # three mutually-close points are all core at min_pts=3
    pts = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1]])
    assert set(dbscan(pts, eps=0.5, min_pts=3)) == {0}
    # min_pts=4 finds no core point
    assert set(dbscan(pts, eps=0.5, min_pts=4)) == {-1}


def test_dbscan_border_point_joins_first_cluster():
    # chain: cluster [0, 1] with border 2 reachable from 1 only
    pts = np.array([[0.0], [0.9], [1.8], [10.0]])
    labels = dbscan(pts, eps=1.0, min_pts=2)
    assert labels.tolist() == [0, 0, 0, -1]


def test_dbscan_labels_deterministic_index_order():
    rng = np.random.default_rng(4)
    pts = np.vstack(
        [rng.normal(5.0, 0.2, size=(10, 2)), rng.normal(0.0, 0.2, size=(10, 2))]
    )
    labels = dbscan(pts, eps=1.0, min_pts=3)
    # first cluster discovered (index order) takes label 0
    assert labels[0] == 0
    assert labels[10] == 1


def test_dbscan_validation():
    with pytest.raises(ConfigError):
        dbscan(np.zeros((5, 2)), eps=0.0, min_pts=2)
    with pytest.raises(ConfigError):
        dbscan(np.zeros((5, 2)), eps=1.0, min_pts=0)
    with pytest.raises(ConfigError):
        dbscan(np.zeros(5), eps=1.0, min_pts=2)
