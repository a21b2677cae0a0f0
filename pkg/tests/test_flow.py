"""Inter-jump flow integration and hazard quadrature."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmp_control import benchmarks
from pdmp_control.flow import (
    FlowSolverConfig,
    flow,
    flow_nodes,
    flow_policy,
    integrated_hazard,
)
from pdmp_control.model import (
    ActionSet,
    Bounds,
    Box,
    LocalCharacteristics,
    TransitionKernel,
)


def _linear_decay_chars() -> LocalCharacteristics:
    """x' = -x with closed form phi(t, x) = x e^{-t}; one dummy action."""

    def drift(x, a_idx):
        return -x

    def rate(x, a_idx):
        return np.full(x.shape[0], 0.5)

    def cost(x, a_idx):
        return np.ones(x.shape[0])

    def atoms(x, a_idx):
        return x[:, None, :].copy()

    def weights(x, a_idx):
        return np.ones((x.shape[0], 1))

    return LocalCharacteristics(
        dim=1,
        domain=Box(np.array([-4.0]), np.array([4.0])),
        actions=ActionSet(np.array([0.0])),
        drift=drift,
        rate=rate,
        kernel=TransitionKernel(atoms, weights, 1),
        cost=cost,
        discount=1.0,
        bounds=Bounds(drift_sup=4.0, drift_lip=1.0, rate_sup=0.5, cost_sup=1.0),
    )


def test_flow_matches_closed_form():
    chars = _linear_decay_chars()
    x = flow(chars, np.array([2.0]), 0, 1.7)
    assert abs(x[0] - 2.0 * math.exp(-1.7)) < 1e-10


def test_flow_zero_time_is_identity():
    chars = _linear_decay_chars()
    x = flow(chars, np.array([1.3]), 0, 0.0)
    assert x[0] == pytest.approx(1.3)


def test_flow_rejects_negative_time():
    chars = _linear_decay_chars()
    with pytest.raises(ValueError):
        flow(chars, np.array([1.0]), 0, -0.1)


def test_flow_respects_max_elapsed_guard():
    chars = _linear_decay_chars()
    with pytest.raises(ValueError, match="max_elapsed"):
        flow(chars, np.array([1.0]), 0, 5.0, FlowSolverConfig(max_elapsed=1.0))


@settings(max_examples=25, deadline=None)
@given(
    st.floats(min_value=-1.8, max_value=1.8),
    st.floats(min_value=0.0, max_value=2.0),
    st.floats(min_value=0.0, max_value=2.0),
)
def test_flow_semigroup_property(x0, s, t):
    """phi(s + t, x) equals phi(t, phi(s, x)) on the bounded-drift example."""
    chars = benchmarks.get("b3").chars
    one_hop = flow(chars, np.array([x0]), 0, s + t)
    two_hop = flow(chars, flow(chars, np.array([x0]), 0, s), 0, t)
    assert np.allclose(one_hop, two_hop, atol=1e-9)


def test_flow_policy_matches_frozen_composition():
    """A schedule switching at t=1 equals flowing each leg separately.

    The Runge-Kutta step containing the switch reads both actions at its
    stage points, so agreement holds up to one step's worth of drift
    difference, not to machine precision.
    """
    chars = benchmarks.get("b3").chars

    def beta(s):
        return 0 if s < 1.0 else 2

    mid = flow(chars, np.array([0.5]), 0, 1.0)
    expected = flow(chars, mid, 2, 0.5)
    got = flow_policy(chars, np.array([0.5]), beta, 1.5)
    assert np.allclose(got, expected, atol=1e-3)
    assert not np.allclose(got, flow(chars, np.array([0.5]), 0, 1.5), atol=1e-2)


def test_flow_nodes_even_step_count():
    chars = _linear_decay_chars()
    times, states = flow_nodes(chars, np.array([1.0]), 0, 0.73, 0.1)
    assert times.shape[0] % 2 == 1  # n+1 points, n even
    assert times[0] == 0.0
    assert times[-1] == pytest.approx(0.73)
    assert np.allclose(states[:, 0], np.exp(-times), atol=1e-9)


def test_integrated_hazard_constant_rate():
    chars = _linear_decay_chars()
    # state rate 0.5 plus resampling mass 2.0 over s = 3
    val = integrated_hazard(chars, 2.0, np.array([1.0]), 0, 3.0)
    assert val == pytest.approx(2.5 * 3.0, abs=1e-10)


def test_integrated_hazard_state_dependent():
    """B4's rate along the flow, cross-checked with dense trapezoid."""
    b = benchmarks.get("b4")
    x0 = np.array([0.7])
    s = 2.0
    val = integrated_hazard(b.chars, 0.0, x0, 1, s)
    ts = np.linspace(0.0, s, 201)
    xs = np.array([flow(b.chars, x0, 1, float(t))[0] for t in ts])
    lam = b.chars.rate(xs[:, None], np.full(xs.shape[0], 1))
    ref = np.trapezoid(lam, ts)
    assert abs(val - ref) < 1e-4


def test_integrated_hazard_validation():
    chars = _linear_decay_chars()
    with pytest.raises(ValueError):
        integrated_hazard(chars, -1.0, np.array([0.0]), 0, 1.0)
    with pytest.raises(ValueError):
        integrated_hazard(chars, 0.0, np.array([0.0]), 0, -1.0)
    assert integrated_hazard(chars, 1.0, np.array([0.0]), 0, 0.0) == 0.0
