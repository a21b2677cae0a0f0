"""Benchmark problems and their independent reference solutions."""

import numpy as np
import pytest

from pdmp_control import benchmarks
from pdmp_control.model import ActionMeasure

# pinned regression values for the three-state chain, produced by the
# fixed-point oracle itself and cross-checked against the grid solver
_B2_VALUES = (1.073170731707, 0.536585365853, 1.073170731707)
_B2_POLICY = (1, 0, 1)


def test_b1_oracle_is_one():
    assert benchmarks.b1_oracle_value() == 1.0


def test_b2_oracle_satisfies_bellman_equation():
    vals, policy, residual = benchmarks.b2_oracle()
    assert residual < 1e-12
    assert np.allclose(vals, _B2_VALUES, atol=1e-9)
    assert tuple(policy) == _B2_POLICY


def test_b2_oracle_residual_is_self_reported():
    """Recompute the Bellman residual from scratch on the chain."""
    b = benchmarks.get("b2")
    vals, _, _ = benchmarks.b2_oracle()
    support = np.array([[-1.0], [0.0], [1.0]])
    delta = b.chars.discount
    per_action = np.empty((3, 2))
    for a in range(2):
        a_idx = np.full(3, a)
        lam = b.chars.rate(support, a_idx)
        f = b.chars.cost(support, a_idx)
        w = b.chars.kernel.weights(support, a_idx)
        per_action[:, a] = (f + lam * (w @ vals)) / (delta + lam)
    res = np.abs(per_action.min(axis=1) - vals).max()
    assert res < 1e-11


def test_b3_oracle_vanishes_at_origin():
    v = benchmarks.b3_oracle()
    assert abs(float(v(np.array([0.0]))[0])) < 1e-10


def test_b3_oracle_matches_trajectory_quadrature():
    """Two independent references: dynamic program vs explicit bang-bang ride."""
    v = benchmarks.b3_oracle()
    for x0 in (0.5, 1.0, 1.5):
        dp = float(v(np.array([x0]))[0])
        ride = benchmarks.b3_trajectory_value(x0)
        assert abs(dp - ride) < 1e-5


def test_b3_oracle_is_even():
    v = benchmarks.b3_oracle()
    xs = np.array([0.3, 0.9, 1.7])
    assert np.allclose(v(xs), v(-xs), atol=1e-9)


def test_benchmark_names_and_aliases():
    assert set(benchmarks.names()) == {
        "B1_constant_cost",
        "B2_jump_only",
        "B3_deterministic",
        "B4_full_1d",
    }
    assert benchmarks.get("b2").name == "B2_jump_only"
    assert benchmarks.get("B2_jump_only").name == "B2_jump_only"
    with pytest.raises(KeyError):
        benchmarks.get("b9")


def test_with_overrides_scales_measure_and_discount():
    b = benchmarks.get("b4")
    mod = benchmarks.with_overrides(b, discount=2.0, lam0_scale=0.5)
    assert mod.chars.discount == pytest.approx(2.0)
    assert mod.action_measure.mass == pytest.approx(0.5 * b.action_measure.mass)
    assert b.chars.discount == pytest.approx(1.0)  # original untouched


def test_with_overrides_rejects_nonpositive_discount():
    b = benchmarks.get("b1")
    with pytest.raises(ValueError, match="discount must be positive"):
        benchmarks.with_overrides(b, discount=0.0)


def test_b2_kernel_rows_are_stochastic():
    b = benchmarks.get("b2")
    x = np.linspace(-1.5, 1.5, 13)[:, None]
    for a in range(2):
        w = b.chars.kernel.weights(x, np.full(13, a))
        assert np.all(w >= 0)
        assert np.allclose(w.sum(axis=1), 1.0, atol=1e-12)


def test_b4_cost_bounds_and_start():
    b = benchmarks.get("b4")
    assert b.a0 == 0
    assert np.allclose(b.x0, [0.0])
    x = np.linspace(-3.0, 3.0, 41)[:, None]
    for a in range(3):
        f = b.chars.cost(x, np.full(41, a))
        assert f.min() >= 0.0
        assert f.max() <= b.chars.bounds.cost_sup + 1e-12


def test_action_measure_defaults_are_unit_weights():
    for name in ("b1", "b2", "b3", "b4"):
        am = benchmarks.get(name).action_measure
        assert isinstance(am, ActionMeasure)
        assert np.allclose(am.weights, 1.0)
