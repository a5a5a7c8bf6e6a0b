"""Network construction, forward pass, losses and analytic gradients.

The backprop check compares every analytic gradient entry against central
finite differences. Inputs are resampled until no pre-activation sits close
to the ReLU kink and no softmax probability underflows, so the numeric
derivative is well defined at the evaluation point.
"""

import math

import numpy as np
import pytest

from supersetae.errors import ConfigError, ConsistencyError, DomainError, InitError
from supersetae.genesets import MembershipMask
from supersetae.netcore.model import (
    LayerSpec,
    Model,
    build_autoencoder,
    build_classifier,
    build_dense_classifier,
    build_geneset_classifier,
    build_network,
    encode,
    forward,
    forward_cache,
    he_uniform,
    loss_value,
    relu,
    softmax,
)
from supersetae.netcore.train import backward


def _mask(matrix, genes=None, sets=None):
    m = np.asarray(matrix)
    genes = genes or tuple(f"g{i}" for i in range(m.shape[0]))
    sets = sets or tuple(f"S{j}" for j in range(m.shape[1]))
    return MembershipMask(m, genes, sets)


TOY_MASK = _mask([[1, 0], [1, 1], [0, 1], [1, 0]])


# ---------------------------------------------------------------------------
# initialization


def test_he_uniform_bound():
    rng = np.random.default_rng(0)
    draws = he_uniform(6, 10_000, rng)
    bound = math.sqrt(1.0)
    assert np.abs(draws).max() <= bound
    # spread should roughly fill the interval
    assert np.abs(draws).max() > 0.9 * bound


def test_he_uniform_rejects_zero_fan_in():
    with pytest.raises(InitError):
        he_uniform(0, 3, np.random.default_rng(0))


def test_masked_init_off_mask_exactly_zero():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    w, m = model.weights[0], model.masks[0]
    assert np.all(w[m == 0] == 0.0)
    assert np.all(w[m == 1] != 0.0)


def test_masked_init_per_node_fan_in_bound():
    rng = np.random.default_rng(0)
    genes = tuple(f"g{i}" for i in range(60))
    cols = np.zeros((60, 2))
    cols[:2, 0] = 1  # fan-in 2
    cols[:, 1] = 1  # fan-in 60
    model = build_network(
        (LayerSpec("masked", 60, 2, "relu"), LayerSpec("dense", 2, 60, "linear")),
        (cols.T, None),
        "reconstruction",
        rng,
    )
    w = model.weights[0]
    tight = math.sqrt(6.0 / 60)
    loose = math.sqrt(6.0 / 2)
    assert np.abs(w[0][w[0] != 0]).max() <= loose
    assert np.abs(w[1]).max() <= tight
    # the narrow node may exceed the wide node's bound
    assert loose > tight


def test_masked_node_without_connections_rejected():
    bad = np.array([[1, 0], [0, 0], [1, 0]])  # column 2 all zero once transposed
    with pytest.raises(Exception):
        _mask(bad)


def test_zero_biases_at_init():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=1)
    for b in model.biases:
        assert np.all(b == 0.0)


def test_build_autoencoder_mirror_layout():
    model = build_autoencoder(TOY_MASK, superset_dim=7, seed=0)
    dims = [(s.in_dim, s.out_dim, s.kind, s.activation) for s in model.layers]
    assert dims == [
        (4, 2, "masked", "relu"),
        (2, 7, "dense", "relu"),
        (7, 2, "dense", "relu"),
        (2, 4, "dense", "linear"),
    ]
    assert model.head == "reconstruction"
    assert model.set_names == ("S0", "S1")


def test_n_params_counts_only_on_mask_weights():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    expected = (
        int(TOY_MASK.matrix.sum()) + 2  # masked layer + biases
        + 2 * 3 + 3
        + 3 * 2 + 2
        + 2 * 4 + 4
    )
    assert model.n_params() == expected


# ---------------------------------------------------------------------------
# validation


def test_model_rejects_offmask_weight():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    w = [x.copy() for x in model.weights]
    w[0][0, 2] = 0.5  # g2 is not a member of S0
    with pytest.raises(ConsistencyError, match="off-mask"):
        Model(model.layers, w, model.biases, model.masks, model.head)


def test_model_rejects_dim_chain_break():
    with pytest.raises(ConsistencyError):
        build_network(
            (LayerSpec("dense", 3, 4, "relu"), LayerSpec("dense", 5, 3, "linear")),
            (None, None),
            "reconstruction",
            np.random.default_rng(0),
        )


def test_softmax_only_last_layer():
    with pytest.raises(ConfigError):
        build_network(
            (
                LayerSpec("dense", 3, 4, "softmax"),
                LayerSpec("dense", 4, 2, "softmax"),
            ),
            (None, None),
            "classification",
            np.random.default_rng(0),
        )


def test_reconstruction_must_end_linear():
    with pytest.raises(ConfigError):
        build_network(
            (LayerSpec("dense", 3, 3, "relu"),),
            (None,),
            "reconstruction",
            np.random.default_rng(0),
        )


def test_classifier_needs_two_classes():
    with pytest.raises(ConfigError):
        build_classifier(TOY_MASK, ("only",), superset_dim=3)


# ---------------------------------------------------------------------------
# forward


def test_relu_and_softmax_primitives():
    assert relu(np.array([-1.0, 0.0, 2.0])).tolist() == [0.0, 0.0, 2.0]
    s = softmax(np.array([[1000.0, 1.0], [1000.0, 2.0]]))
    assert np.allclose(s.sum(axis=0), 1.0)
    assert s[0, 0] == pytest.approx(0.5)


def test_forward_shapes_and_hand_value():
    spec = (LayerSpec("dense", 2, 1, "linear"),)
    model = build_network(spec, (None,), "reconstruction", np.random.default_rng(0))
    model.weights[0][:] = [[2.0, -1.0]]
    model.biases[0][:] = [0.5]
    out = forward(model, np.array([[1.0, 0.0], [1.0, 1.0]]))
    assert out.shape == (1, 2)
    assert out.tolist() == [[1.5, -0.5]]


def test_forward_rejects_wrong_width():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    with pytest.raises(ConsistencyError):
        forward(model, np.zeros((5, 2)))


def test_forward_rejects_non_finite():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    x = np.zeros((4, 2))
    x[0, 0] = np.nan
    with pytest.raises(DomainError):
        forward(model, x)


def test_encode_returns_first_two_hidden_layers():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    x = np.abs(np.random.default_rng(1).normal(size=(4, 5)))
    gs_act, ss_act = encode(model, x)
    acts, _ = forward_cache(model, x)
    assert np.array_equal(gs_act, acts[1])
    assert np.array_equal(ss_act, acts[2])
    assert gs_act.shape == (2, 5)
    assert ss_act.shape == (3, 5)


def test_encode_rejects_reordered_genes():
    from supersetae.dataio import ExpressionMatrix

    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    data = ExpressionMatrix(
        ("g1", "g0", "g2", "g3"),  # swapped
        ("s1",),
        np.ones((4, 1)),
    )
    with pytest.raises(ConsistencyError, match="gene order"):
        encode(model, data)


# ---------------------------------------------------------------------------
# losses


def test_mse_hand_value():
    pred = np.array([[1.0, 2.0], [3.0, 4.0]])
    target = np.array([[0.0, 2.0], [3.0, 2.0]])
    assert loss_value("reconstruction", pred, target) == pytest.approx(5.0 / 4)


def test_cross_entropy_hand_value():
    pred = np.array([[0.5, 0.1], [0.5, 0.9]])
    target = np.array([[1.0, 0.0], [0.0, 1.0]])
    expected = -(math.log(0.5) + math.log(0.9)) / 2
    assert loss_value("classification", pred, target) == pytest.approx(expected)


def test_loss_shape_mismatch():
    with pytest.raises(ConsistencyError):
        loss_value("reconstruction", np.zeros((2, 2)), np.zeros((2, 3)))


# ---------------------------------------------------------------------------
# gradient check


def _away_from_kinks(model, x, min_gap=1e-3):
    _, zs = forward_cache(model, x)
    for spec, z in zip(model.layers, zs):
        if spec.activation == "relu" and np.abs(z).min() < min_gap:
            return False
        if spec.activation == "softmax" and softmax(z).min() < 1e-9:
            return False
    return True


def _grad_case(model, rng, n=3):
    """Sample inputs/targets keeping pre-activations off the ReLU kink."""
    for _ in range(200):
        x = rng.normal(size=(model.in_dim, n))
        if _away_from_kinks(model, x):
            break
    else:
        raise AssertionError("could not find a kink-free input")
    if model.head == "classification":
        t = np.zeros((model.out_dim, n))
        t[rng.integers(0, model.out_dim, n), np.arange(n)] = 1.0
    else:
        t = rng.normal(size=(model.out_dim, n))
    return x, t


def _numeric_grads(model, x, t, eps=1e-6):
    gw = [np.zeros_like(w) for w in model.weights]
    gb = [np.zeros_like(b) for b in model.biases]
    for i, w in enumerate(model.weights):
        for idx in np.ndindex(w.shape):
            keep = w[idx]
            w[idx] = keep + eps
            up = loss_value(model.head, forward(model, x), t)
            w[idx] = keep - eps
            dn = loss_value(model.head, forward(model, x), t)
            w[idx] = keep
            gw[i][idx] = (up - dn) / (2 * eps)
    for i, b in enumerate(model.biases):
        for idx in np.ndindex(b.shape):
            keep = b[idx]
            b[idx] = keep + eps
            up = loss_value(model.head, forward(model, x), t)
            b[idx] = keep - eps
            dn = loss_value(model.head, forward(model, x), t)
            b[idx] = keep
            gb[i][idx] = (up - dn) / (2 * eps)
    return gw, gb


def _assert_grads_match(model, rng):
    x, t = _grad_case(model, rng)
    acts, zs = forward_cache(model, x)
    gw, gb = backward(model, acts, zs, t)
    nw, nb = _numeric_grads(model, x, t)
    for i in range(len(model.weights)):
        if model.masks[i] is not None:
            # numeric probe perturbs off-mask entries too; compare on-mask only
            on = model.masks[i] == 1
            assert np.allclose(gw[i][on], nw[i][on], atol=1e-7)
            assert np.all(gw[i][model.masks[i] == 0] == 0.0)
        else:
            assert np.allclose(gw[i], nw[i], atol=1e-7)
        assert np.allclose(gb[i], nb[i], atol=1e-7)


def test_gradients_autoencoder():
    rng = np.random.default_rng(4)
    model = build_autoencoder(TOY_MASK, superset_dim=3, rng=rng)
    # move biases off zero so ReLU patterns are generic
    for b in model.biases:
        b += rng.normal(scale=0.3, size=b.shape)
    _assert_grads_match(model, rng)


def test_gradients_masked_classifier():
    rng = np.random.default_rng(8)
    model = build_classifier(TOY_MASK, ("a", "b", "c"), superset_dim=3, rng=rng)
    for b in model.biases:
        b += rng.normal(scale=0.3, size=b.shape)
    _assert_grads_match(model, rng)


def test_gradients_geneset_classifier():
    rng = np.random.default_rng(15)
    model = build_geneset_classifier(TOY_MASK, ("a", "b"), rng=rng)
    for b in model.biases:
        b += rng.normal(scale=0.3, size=b.shape)
    _assert_grads_match(model, rng)


def test_gradients_dense_classifier():
    rng = np.random.default_rng(16)
    model = build_dense_classifier(5, (4,), ("a", "b", "c"), rng=rng)
    for b in model.biases:
        b += rng.normal(scale=0.3, size=b.shape)
    _assert_grads_match(model, rng)


def test_copy_is_deep_for_parameters():
    model = build_autoencoder(TOY_MASK, superset_dim=3, seed=0)
    clone = model.copy()
    clone.weights[0][TOY_MASK.matrix.T == 1] += 1.0
    assert not np.array_equal(clone.weights[0], model.weights[0])
