"""Penalized switching systems: grid fixed point and regression Monte Carlo."""

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pdmp_control import benchmarks
from pdmp_control.bsde import (
    BasisConfig,
    _local_penalized_step,
    _regress_hat,
    _switch_candidate,
    constraint_violation,
    maximal_limit,
    penalized_grid_solve,
    picard_mc_solve,
)
from pdmp_control.hjb import GridSolverConfig


# ---------------------------------------------------------------------------
# case enumeration
# ---------------------------------------------------------------------------


def _case_candidate(s, w, base, flow, lam, n, delta, dt, k):
    """The bracket-k update formula, straight from its definition."""
    mu = lam + n * w[:k].sum()
    total = delta + mu
    e = math.exp(-total * dt)
    return (1.0 - e) / total * (base + n * (w[:k] * s[:k]).sum()) + e * flow


def test_switch_candidate_no_switching_closed_form():
    """All other actions worth more: plain exponential discounting."""
    others = np.array([[5.0, 6.0]])
    w = np.array([[1.0, 1.0]])
    base = np.array([2.0])
    flow = np.array([1.0])
    lam = np.array([0.7])
    u = _switch_candidate(others, w, base, flow, lam, 4.0, 1.0, 0.05)
    assert u[0] == pytest.approx(_case_candidate(
        others[0], w[0], 2.0, 1.0, 0.7, 4.0, 1.0, 0.05, k=0
    ), abs=1e-14)


def test_switch_candidate_all_switching_closed_form():
    """All other actions worth far less: every switch term active."""
    others = np.array([[-9.0, -8.0]])
    w = np.array([[1.0, 2.0]])
    base = np.array([2.0])
    flow = np.array([1.0])
    lam = np.array([0.7])
    u = _switch_candidate(others, w, base, flow, lam, 4.0, 1.0, 0.05)
    assert u[0] == pytest.approx(_case_candidate(
        others[0], w[0], 2.0, 1.0, 0.7, 4.0, 1.0, 0.05, k=2
    ), abs=1e-14)


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.floats(min_value=-3.0, max_value=3.0), min_size=1, max_size=4),
    st.floats(min_value=0.05, max_value=5.0),
    st.floats(min_value=-2.0, max_value=4.0),
    st.floats(min_value=0.0, max_value=4.0),
    st.floats(min_value=1.0, max_value=64.0),
)
def test_switch_candidate_complementarity(s_vals, lam, base, flow, n_level):
    """The returned value solves the piecewise update or sits on a crossing.

    Either the candidate recomputed from its own active set reproduces u,
    or u equals a breakpoint where the two adjacent cases step over the
    diagonal (cand with the value excluded >= u >= cand with it included).
    """
    delta, dt = 1.0, 0.05
    s = np.sort(np.asarray(s_vals))
    w = np.ones_like(s)
    u = _switch_candidate(
        s[None, :], w[None, :], np.array([base]), np.array([flow]),
        np.array([lam]), n_level, delta, dt,
    )[0]
    k_strict = int((s < u - 1e-11).sum())
    cand = _case_candidate(s, w, base, flow, lam, n_level, delta, dt, k_strict)
    if abs(cand - u) < 1e-9:
        return
    assert np.min(np.abs(s - u)) < 1e-11, f"u={u} neither solves nor pins"
    k_incl = int((s <= u + 1e-11).sum())
    lo_side = _case_candidate(s, w, base, flow, lam, n_level, delta, dt, k_incl)
    assert cand >= u - 1e-9
    assert lo_side <= u + 1e-9


# ---------------------------------------------------------------------------
# hat-basis regression
# ---------------------------------------------------------------------------


def test_regress_hat_recovers_nodal_values():
    nb, m = 5, 2
    # 10 samples sitting exactly on node 1 (action 0) and node 3 (action 1)
    j = np.array([1] * 10 + [3] * 10)
    wl = np.ones(20)
    wr = np.zeros(20)
    a_idx = np.array([0] * 10 + [1] * 10)
    y = np.array([2.0] * 10 + [5.0] * 10)
    coef, ident = _regress_hat(nb, j, wl, wr, a_idx, y, m)
    assert ident[1, 0] and ident[3, 1]
    assert coef[1, 0] == pytest.approx(2.0, abs=1e-8)
    assert coef[3, 1] == pytest.approx(5.0, abs=1e-8)
    assert not ident[0, 0] and not ident[4, 1]


def test_regress_hat_interpolates_linear_data():
    """Samples spread over a segment with linear y: hats recover the line."""
    nb, m = 4, 1
    rng = np.random.default_rng(0)
    x = rng.uniform(0.0, 3.0, size=4000)  # nodes at 0, 1, 2, 3
    j = np.minimum(x.astype(int), nb - 2)
    frac = x - j
    y = 2.0 + 0.5 * x
    coef, ident = _regress_hat(
        nb, j, 1.0 - frac, frac, np.zeros(x.size, dtype=int), y, m
    )
    assert ident.all()
    assert np.allclose(coef[:, 0], 2.0 + 0.5 * np.arange(4), atol=1e-2)


def test_regress_hat_flags_thin_nodes():
    nb, m = 3, 1
    j = np.array([0, 0])
    coef, ident = _regress_hat(
        nb, j, np.array([1.0, 1.0]), np.array([0.0, 0.0]),
        np.zeros(2, dtype=int), np.array([1.0, 1.0]), m,
    )
    assert not ident[2, 0]  # untouched node stays unidentified


# ---------------------------------------------------------------------------
# local driver step
# ---------------------------------------------------------------------------


def test_local_step_rotation_cancels_on_flat_tables():
    """Equal inputs across actions: the action coupling must vanish."""
    nb, m = 3, 3
    q = np.full((nb, m), 0.4)
    f = np.full((nb, m), 1.0)
    mask = np.zeros((nb, m, m), dtype=bool)
    w0 = np.ones(m)
    c = 0.01
    u = _local_penalized_step(q, f, mask, w0, 8.0, c)
    assert np.allclose(u, 0.4 + c * 1.0, atol=1e-13)


def test_local_step_matches_hand_built_system():
    """One node, two actions, action 1 actively undercutting action 0."""
    q = np.array([[0.5, 0.3]])
    f = np.array([[1.0, 2.0]])
    mask = np.zeros((1, 2, 2), dtype=bool)
    mask[0, 0, 1] = True  # v(., 1) < v(., 0) in the lagged table
    w0 = np.array([1.0, 1.0])
    n_level, c = 4.0, 0.02
    u = _local_penalized_step(q, f, mask, w0, n_level, c)
    # u_a = q_a + c f_a - c sum_{b != a} w_b k_ab (u_b - u_a),
    # k_ab = 1 - n 1{active}: diagonal 1 - c sum, off-diagonal + c w_b k_ab
    a_mat = np.array(
        [
            [1.0 - c * (1.0 - n_level), c * (1.0 - n_level)],
            [c, 1.0 - c],
        ]
    )
    expected = np.linalg.solve(a_mat, np.array([0.5 + c * 1.0, 0.3 + c * 2.0]))
    assert np.allclose(u[0], expected, atol=1e-12)


# ---------------------------------------------------------------------------
# grid ladder
# ---------------------------------------------------------------------------


def test_constant_problem_is_exact_at_any_level():
    b = benchmarks.get("b1")
    for n in (1, 8):
        sol = penalized_grid_solve(
            b.chars, b.action_measure, n, GridSolverConfig(dx=0.1, tol=1e-12)
        )
        assert np.abs(sol.values.values - 1.0).max() < 1e-9
        assert sol.spread().max() < 1e-9


def test_penalized_tables_decrease_in_n():
    b = benchmarks.get("b2")
    cfg = GridSolverConfig(dx=0.05, tol=1e-12)
    prev = None
    for n in (1, 2, 4):
        sol = penalized_grid_solve(
            b.chars, b.action_measure, n, cfg,
            warm_start=None if prev is None else prev.values.values,
        )
        assert sol.values.values.min() >= 0.0
        assert sol.values.values.max() <= b.chars.value_cap + 1e-10
        if prev is not None:
            assert (sol.values.values - prev.values.values).max() <= 1e-8
        prev = sol


def test_penalized_level_validation():
    b = benchmarks.get("b1")
    with pytest.raises(ValueError):
        penalized_grid_solve(b.chars, b.action_measure, 0)


def test_maximal_limit_converges_immediately_on_constant_problem():
    b = benchmarks.get("b1")
    lim = maximal_limit(
        b.chars, b.action_measure, GridSolverConfig(dx=0.1), (1, 2, 4), 1e-6
    )
    assert lim.n_used == 2  # first consecutive difference is already zero
    assert np.abs(lim.values.values - 1.0).max() < 1e-9
    assert lim.spread_sup < 1e-9
    assert [row["n"] for row in lim.schedule] == [1, 2]


def test_maximal_limit_reports_exhaustion():
    b = benchmarks.get("b4")
    with pytest.raises(RuntimeError, match="schedule exhausted"):
        maximal_limit(
            b.chars, b.action_measure, GridSolverConfig(dx=0.1), (1, 2), 1e-9
        )


# ---------------------------------------------------------------------------
# regression Monte Carlo
# ---------------------------------------------------------------------------


def test_picard_validation():
    b = benchmarks.get("b4")
    with pytest.raises(ValueError):
        picard_mc_solve(b.chars, b.action_measure, 0, 4.0, b.x0, b.a0, 4000)
    with pytest.raises(ValueError):
        picard_mc_solve(
            b.chars, b.action_measure, 2, 4.0, b.x0, b.a0, 4000, n_replicates=1
        )
    with pytest.raises(ValueError, match="paths"):
        picard_mc_solve(b.chars, b.action_measure, 2, 4.0, b.x0, b.a0, 10)


def test_picard_constant_problem_prices_the_annuity():
    """B1 pays cost 1 until the horizon: Y0 = 1 - e^{-T} exactly."""
    b = benchmarks.get("b1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = picard_mc_solve(
            b.chars, b.action_measure, 1, 4.0, b.x0, b.a0, 4000, seed=5
        )
    target = 1.0 - math.exp(-4.0)
    assert abs(run.y0 - target) <= 3.0 * run.se + 5e-3
    assert run.se < 0.05
    assert 0.0 <= run.y0 <= b.chars.value_cap


def test_picard_value_function_evaluator():
    b = benchmarks.get("b1")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = picard_mc_solve(
            b.chars, b.action_measure, 1, 4.0, b.x0, b.a0, 4000, seed=5
        )
    tab0 = run.value_at(np.array([0.0]), b.x0.reshape(1, -1))
    assert tab0.shape == (1, 2)
    assert tab0[0, b.a0] == pytest.approx(run.y0)
    # near the horizon the continuation value dies out
    tab_end = run.value_at(np.array([4.0 - run.dt / 2]), b.x0.reshape(1, -1))
    assert tab_end.max() < 0.1
    with pytest.raises(ValueError):
        constraint_violation(
            run, b.chars, b.action_measure, b.x0, b.a0, 9.0, n_paths=100
        )


def test_picard_matches_grid_table_on_small_problem():
    b = benchmarks.get("b2")
    sol = penalized_grid_solve(
        b.chars, b.action_measure, 2, GridSolverConfig(dx=0.05, tol=1e-12)
    )
    target = float(sol.values(b.x0.reshape(1, -1))[0, b.a0])
    run = picard_mc_solve(
        b.chars, b.action_measure, 2, 8.0, b.x0, b.a0, 20_000, seed=9
    )
    tail = math.exp(-b.chars.discount * 8.0) * b.chars.value_cap
    assert abs(run.y0 - target) <= 3.0 * run.se + tail + 5e-3


def test_constraint_violation_decreases_along_ladder():
    b = benchmarks.get("b4")
    cfg = GridSolverConfig(dx=0.05, tol=1e-12)
    sol1 = penalized_grid_solve(b.chars, b.action_measure, 1, cfg)
    sol4 = penalized_grid_solve(
        b.chars, b.action_measure, 4, cfg, warm_start=sol1.values.values
    )
    g1 = constraint_violation(
        sol1, b.chars, b.action_measure, b.x0, b.a0, 2.0, n_paths=4000, seed=3
    )
    g4 = constraint_violation(
        sol4, b.chars, b.action_measure, b.x0, b.a0, 2.0, n_paths=4000, seed=3
    )
    assert g1 > 0.0
    assert g4 < g1


def test_switch_budget_matches_violation_integral():
    """Accumulated switching-gain increments equal n times the violation."""
    b = benchmarks.get("b4")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        run = picard_mc_solve(
            b.chars, b.action_measure, 2, 4.0, b.x0, b.a0, 4000, seed=7
        )
    k_total = float(np.sum(run.k_increments))
    g = constraint_violation(
        run, b.chars, b.action_measure, b.x0, b.a0, 4.0, n_paths=4000, seed=9
    )
    assert abs(k_total - 2.0 * g) <= 0.05 * max(k_total, 2.0 * g) + 0.01


def test_basis_config_rejects_multivariate_problems():
    cfg = BasisConfig(spacing=0.25)
    b = benchmarks.get("b4")
    nodes = cfg.nodes(b.chars)
    assert nodes.ndim == 1
    assert nodes[0] <= b.chars.domain.lo[0] + 1e-12
    assert nodes[-1] >= b.chars.domain.hi[0] - 1e-12
