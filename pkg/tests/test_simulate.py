"""Path sampling engine: laws, reproducibility, cost functionals."""

import math

import numpy as np
import pytest

from pdmp_control import benchmarks
from pdmp_control._engine import EngineRequest
from pdmp_control.model import IntensityControl, PiecewiseOpenLoopPolicy
from pdmp_control.simulate import (
    SimulationConfig,
    compensator_residual,
    discounted_cost,
    mean_and_se,
    run_control,
    run_primal,
    run_randomized,
    sample_primal_path,
    sample_randomized_path,
)


def test_mean_and_se():
    est, se = mean_and_se(np.array([1.0, 3.0, 5.0, 7.0]))
    assert est == pytest.approx(4.0)
    assert se == pytest.approx(np.std([1, 3, 5, 7], ddof=1) / 2.0)
    _, se1 = mean_and_se(np.array([2.0]))
    assert se1 == math.inf


def test_simulation_config_validation():
    with pytest.raises(ValueError):
        SimulationConfig(seed=0, horizon=0.0)
    with pytest.raises(ValueError):
        SimulationConfig(seed=0, horizon=1.0, dt=-0.1)


def test_run_randomized_rejects_empty_batch():
    b = benchmarks.get("b1")
    cfg = SimulationConfig(seed=0, horizon=1.0)
    with pytest.raises(ValueError):
        run_randomized(b.chars, b.action_measure, b.x0, b.a0, cfg, 0)


def test_same_seed_reproduces_batch():
    b = benchmarks.get("b4")
    cfg = SimulationConfig(seed=42, horizon=5.0, dt=0.02)
    r1 = run_randomized(b.chars, b.action_measure, b.x0, b.a0, cfg, 200)
    r2 = run_randomized(b.chars, b.action_measure, b.x0, b.a0, cfg, 200)
    assert np.array_equal(r1["cost"], r2["cost"])
    assert np.array_equal(r1["final_x"], r2["final_x"])


def test_threads_do_not_change_results():
    b = benchmarks.get("b4")
    cfg = SimulationConfig(seed=7, horizon=5.0, dt=0.02)
    req = EngineRequest(want_cost=True, want_t1=True)
    r1 = run_randomized(b.chars, b.action_measure, b.x0, b.a0, cfg, 300, request=req)
    r4 = run_randomized(
        b.chars, b.action_measure, b.x0, b.a0, cfg, 300, request=req, threads=4
    )
    for key in ("cost", "t1_time", "final_x", "n_jumps"):
        assert np.array_equal(r1[key], r4[key])


def test_path_zero_matches_single_path_sampler():
    b = benchmarks.get("b4")
    cfg = SimulationConfig(seed=9, horizon=5.0, dt=0.02)
    path = sample_randomized_path(b.chars, b.action_measure, b.x0, b.a0, cfg)
    batch = run_randomized(
        b.chars, b.action_measure, b.x0, b.a0, cfg, 3,
        request=EngineRequest(want_cost=True, records=True),
    )
    rec = batch["records"][0]
    assert path.n_jumps == len(rec)
    if path.n_jumps:
        assert np.allclose(path.times, [r[0] for r in rec])


def test_path_structure():
    b = benchmarks.get("b2")
    cfg = SimulationConfig(seed=1, horizon=10.0, dt=0.02)
    path = sample_randomized_path(b.chars, b.action_measure, b.x0, b.a0, cfg)
    assert path.n_jumps > 0
    assert np.all(np.diff(path.times) > 0)
    assert path.times[-1] <= path.horizon
    assert np.all((path.actions >= 0) & (path.actions < 2))
    assert b.chars.domain.contains(path.states).all()


def test_discounted_cost_constant_problem():
    """B1 costs exactly (1 - e^{-T}) / 1 along every path."""
    b = benchmarks.get("b1")
    cfg = SimulationConfig(seed=5, horizon=6.0, dt=0.02)
    path = sample_randomized_path(b.chars, b.action_measure, b.x0, b.a0, cfg)
    total, tail = discounted_cost(path, b.chars)
    assert total == pytest.approx(1.0 - math.exp(-6.0), abs=1e-7)
    assert tail == pytest.approx(math.exp(-6.0), abs=1e-12)


def test_engine_cost_matches_path_quadrature():
    """The lockstep accumulator and the path-level integral agree."""
    b = benchmarks.get("b4")
    cfg = SimulationConfig(seed=13, horizon=4.0, dt=0.02)
    batch = run_randomized(
        b.chars, b.action_measure, b.x0, b.a0, cfg, 5,
        request=EngineRequest(want_cost=True, records=True),
    )
    path = sample_randomized_path(b.chars, b.action_measure, b.x0, b.a0, cfg)
    total, _ = discounted_cost(path, b.chars)
    assert abs(total - float(batch["cost"][0])) < 5e-5


def test_primal_policy_run():
    b = benchmarks.get("b3")
    cfg = SimulationConfig(seed=3, horizon=2.0, dt=0.02)
    res = run_primal(
        b.chars, PiecewiseOpenLoopPolicy.constant(0), b.x0, cfg, 50,
        request=EngineRequest(want_cost=True),
    )
    # rate is zero: no jumps ever, every path follows the same flow
    assert np.all(res["n_jumps"] == 0)
    assert np.allclose(res["cost"], res["cost"][0])


def test_primal_single_path():
    b = benchmarks.get("b1")
    cfg = SimulationConfig(seed=8, horizon=5.0, dt=0.02)
    path = sample_primal_path(b.chars, PiecewiseOpenLoopPolicy.constant(1), b.x0, cfg)
    assert np.all(path.actions == 1)


def test_compensator_residual_centered():
    """Martingale property of the pair-process jump measure."""
    b = benchmarks.get("b2")
    cfg = SimulationConfig(seed=17, horizon=6.0, dt=0.02)
    paths = [
        sample_randomized_path(
            b.chars, b.action_measure, b.x0, b.a0,
            SimulationConfig(seed=17 + k, horizon=6.0, dt=0.02),
        )
        for k in range(300)
    ]

    def test_fn(t, x, a_idx):
        return 1.0 + 0.1 * x[:, 0]

    mean, se = compensator_residual(paths, b.chars, b.action_measure, test_fn, 6.0)
    assert abs(mean) <= 3.0 * se


def test_compensator_residual_engine_agrees():
    """The engine-side accumulator gives the same statistic, faster."""
    b = benchmarks.get("b2")
    cfg = SimulationConfig(seed=17, horizon=6.0, dt=0.02)

    def unit(t, x, a_idx):
        return np.ones(np.asarray(t).shape[0])

    res = run_randomized(
        b.chars, b.action_measure, b.x0, b.a0, cfg, 5000,
        request=EngineRequest(compensator=(unit, 6.0)),
    )
    mean, se = mean_and_se(res["compensator_residual"])
    assert abs(mean) <= 3.0 * se


def test_control_mode_with_unit_control_matches_randomized_law():
    """nu = 1 leaves the action channel untouched: same cost distribution."""
    b = benchmarks.get("b2")
    cfg = SimulationConfig(seed=23, horizon=10.0, dt=0.02)
    base = run_randomized(b.chars, b.action_measure, b.x0, b.a0, cfg, 4000)
    ctrl = run_control(
        b.chars, b.action_measure, IntensityControl.constant(1.0, 2),
        b.x0, b.a0, SimulationConfig(seed=24, horizon=10.0, dt=0.02), 4000,
    )
    m1, s1 = mean_and_se(base["cost"])
    m2, s2 = mean_and_se(ctrl["cost"])
    assert abs(m1 - m2) <= 3.0 * math.hypot(s1, s2)
