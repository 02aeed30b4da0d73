import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from motifnet.dynamics import GeneCircuit, SimConfig
from motifnet.oracles import central_difference
from motifnet.targets import LossConfig, TargetSpec, sample_grid, target_values
from motifnet.train_gd import (
    GdConfig,
    Trainer,
    TrainResult,
    _unrolled_loss_grad,
    adam_step,
    loss_and_gradient,
    prune,
    train_gd,
)

SIM = SimConfig()
FF = TargetSpec.french_flag()


def rel_err(a, b):
    return float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-3)))


@pytest.mark.parametrize("spec", [FF, TargetSpec.switch()], ids=["ff", "switch"])
def test_gradient_matches_finite_differences(rng, spec):
    for _ in range(4):
        n = int(rng.integers(2, 6))
        w = rng.normal(size=(n, n))
        _, g = loss_and_gradient(GeneCircuit(w), spec, SIM, LossConfig())
        fd = central_difference(lambda v: loss_and_gradient(GeneCircuit(v), spec, SIM, LossConfig())[0], w)
        assert rel_err(g, fd) < 1e-4


def test_gradient_at_zero_weights():
    w = np.zeros((3, 3))
    _, g = loss_and_gradient(GeneCircuit(w), FF, SIM, LossConfig())
    fd = central_difference(lambda v: loss_and_gradient(GeneCircuit(v), FF, SIM, LossConfig())[0], w)
    assert rel_err(g, fd) < 1e-4
    _, g_l1 = loss_and_gradient(GeneCircuit(w), FF, SIM, LossConfig(l1_lambda=0.1))
    np.testing.assert_array_equal(g_l1, g)


def test_l1_adds_sign_term(rng):
    c = GeneCircuit(rng.normal(size=(3, 3)))
    l0, g0 = loss_and_gradient(c, FF, SIM, LossConfig())
    l1, g1 = loss_and_gradient(c, FF, SIM, LossConfig(l1_lambda=0.05))
    assert l1 == pytest.approx(l0 + 0.05 * np.abs(c.weights).sum(), abs=1e-15)
    np.testing.assert_allclose(g1 - g0, 0.05 * np.sign(c.weights), atol=1e-15)


def test_duplicated_grid_leaves_gradient_unchanged(rng):
    c = GeneCircuit(rng.normal(size=(3, 3)))
    grid = sample_grid(FF)
    target = target_values(FF, grid)
    _, g1 = _unrolled_loss_grad(c.weights, grid, target, SIM)
    _, g2 = _unrolled_loss_grad(c.weights, np.repeat(grid, 2), np.repeat(target, 2), SIM)
    np.testing.assert_allclose(g1, g2, rtol=1e-12, atol=1e-15)


def test_adam_examples():
    cfg = GdConfig(learning_rate=0.1, adam_eps=1e-300)
    w, m1, m2 = adam_step(np.ones(3), np.zeros(3), np.zeros(3), np.zeros(3), 1, cfg)
    np.testing.assert_array_equal(w, np.ones(3))
    w, _, _ = adam_step(np.zeros(1), np.ones(1), np.zeros(1), np.zeros(1), 1, cfg)
    assert abs(w[0]) == pytest.approx(0.1, rel=1e-12)
    w = np.zeros(1)
    m1 = np.zeros(1)
    m2 = np.zeros(1)
    cfg = GdConfig(learning_rate=0.1)
    for t in range(1, 101):
        w, m1, m2 = adam_step(w, 2 * (w - 3.0), m1, m2, t, cfg)
    assert abs(w[0] - 3.0) < 0.5


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, 4, elements=st.floats(-5, 5)))
def test_adam_step_is_bounded_by_learning_rate(g):
    cfg = GdConfig(learning_rate=0.05)
    w, _, _ = adam_step(np.zeros(4), g, np.zeros(4), np.zeros(4), 1, cfg)
    assert np.all(np.abs(w) <= 0.05 + 1e-12)


def test_gd_config_validation():
    with pytest.raises(ValueError):
        GdConfig(max_iters=0)
    with pytest.raises(ValueError):
        GdConfig(learning_rate=0.0)
    with pytest.raises(ValueError):
        GdConfig(mutation_rate=1.5)


def test_train_gd_is_deterministic():
    cfg = GdConfig(rng_seed=7, max_iters=40)
    a = train_gd(3, FF, SIM, cfg, LossConfig())
    b = train_gd(3, FF, SIM, cfg, LossConfig())
    assert a.circuit == b.circuit
    assert a.loss_history == b.loss_history
    assert a.to_dict(include_timing=False) == b.to_dict(include_timing=False)


def test_train_gd_history_reaches_below_start():
    r = train_gd(3, FF, SIM, GdConfig(rng_seed=1, max_iters=60), LossConfig())
    assert len(r.loss_history) == r.iterations_used
    assert min(r.loss_history) <= r.loss_history[0]
    assert r.trainer is Trainer.GRADIENT_DESCENT


def test_train_gd_success_is_confirmed_by_full_simulation():
    r = train_gd(4, FF, SIM, GdConfig(rng_seed=0), LossConfig())
    assert r.success
    assert r.final_mse <= 0.05


def test_train_gd_rejects_single_node():
    with pytest.raises(ValueError):
        train_gd(1, FF, SIM, GdConfig(), LossConfig())


def test_hybrid_variant_differs_and_is_labelled():
    plain = train_gd(3, FF, SIM, GdConfig(rng_seed=2, max_iters=30), LossConfig())
    hybrid = train_gd(3, FF, SIM, GdConfig(rng_seed=2, max_iters=30, mutation_rate=0.3), LossConfig())
    assert hybrid.trainer is Trainer.HYBRID_MUTATED_GD
    assert plain.circuit != hybrid.circuit


def test_train_result_round_trip():
    r = train_gd(3, FF, SIM, GdConfig(rng_seed=3, max_iters=10), LossConfig())
    back = TrainResult.from_dict(r.to_dict())
    assert back.circuit == r.circuit
    assert back.loss_history == r.loss_history
    assert back.success == r.success and back.seed == r.seed


def test_prune_examples():
    c = GeneCircuit(np.array([[0.05, -2.0], [-0.09, 0.1]]))
    assert prune(c, 0.0) == c
    np.testing.assert_array_equal(prune(c, 10.0).weights, 0.0)
    np.testing.assert_array_equal(prune(c, 0.1).weights, [[0.0, -2.0], [0.0, 0.1]])
    with pytest.raises(ValueError):
        prune(c, -1.0)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, (4, 4), elements=st.floats(-3, 3)), st.floats(0, 3))
def test_prune_idempotent_and_partial(w, tau):
    c = GeneCircuit(w)
    once = prune(c, tau)
    assert prune(once, tau) == once
    kept = np.abs(w) >= tau
    np.testing.assert_array_equal(once.weights[kept], w[kept])
    assert np.all(once.weights[~kept] == 0.0)
