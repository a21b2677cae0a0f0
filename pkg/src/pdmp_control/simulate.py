"""Path sampling and path functionals for the controlled jump process.

Two samplers are exposed: the policy-controlled process (jumps thinned
against a declared rate bound) and the action-randomized pair process
(total hazard inverted along the flow, events split between state jumps
and action resampling).  Batch runners push many paths through the same
machinery and return per-path functionals as arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import _engine
from ._engine import EngineParams, EngineRequest
from .flow import FlowSolverConfig, flow_nodes
from .model import (
    ActionMeasure,
    IntensityControl,
    LocalCharacteristics,
    MarkedPointPath,
    PiecewiseOpenLoopPolicy,
)

Array = np.ndarray

_TINY_RATE = 1e-300  # stands in for "no jumps ever" without dividing by zero


@dataclass
class SimulationConfig:
    """Knobs shared by all samplers.

    dt is the lockstep time step: it controls both the flow integration
    error (fourth order) and the hazard quadrature error within a step.
    max_jumps aborts runaway paths; None picks a generous multiple of the
    mean jump count.  thinning_bound only matters for the policy sampler
    and defaults to the declared rate bound.
    """

    seed: int = 0
    horizon: float = 20.0
    dt: float = 0.02
    max_jumps: Optional[int] = None
    thinning_bound: Optional[float] = None

    def __post_init__(self):
        if self.horizon <= 0:
            raise ValueError("horizon must be positive")
        if self.dt <= 0 or self.dt > self.horizon:
            raise ValueError("dt must lie in (0, horizon]")
        if self.seed < 0:
            raise ValueError("seed must be a nonnegative integer")


def _resolve_params(
    chars: LocalCharacteristics,
    lam0: Optional[ActionMeasure],
    config: SimulationConfig,
) -> EngineParams:
    m0 = lam0.mass if lam0 is not None else 0.0
    if config.max_jumps is not None:
        cap = int(config.max_jumps)
    else:
        cap = max(16, math.ceil(50.0 * (chars.bounds.rate_sup + m0) * config.horizon))
    if config.thinning_bound is not None:
        thin = float(config.thinning_bound)
    else:
        thin = chars.bounds.rate_sup
    if thin <= 0.0:
        thin = _TINY_RATE
    return EngineParams(
        horizon=config.horizon, dt=config.dt, max_jumps=cap, thinning_bound=thin
    )


def _path_from_records(
    recs: list, x0: Array, a0: Optional[int], horizon: float
) -> MarkedPointPath:
    if recs:
        times = np.array([r[0] for r in recs])
        states = np.stack([r[1] for r in recs])
        actions = np.array([r[2] for r in recs], dtype=np.int64)
        kinds = np.array([r[3] for r in recs], dtype=np.int64)
    else:
        times = np.empty(0)
        states = np.empty((0, np.asarray(x0).size))
        actions = np.empty(0, dtype=np.int64)
        kinds = np.empty(0, dtype=np.int64)
    return MarkedPointPath(
        start_state=np.asarray(x0, dtype=float).reshape(-1),
        start_action=a0,
        times=times,
        states=states,
        actions=actions,
        kinds=kinds,
        horizon=horizon,
    )


def sample_randomized_path(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x0,
    a0: int,
    config: SimulationConfig,
) -> MarkedPointPath:
    """One path of the pair process (X, I) started from (x0, a0).

    Identical to path 0 of a batch run with the same seed.
    """
    params = _resolve_params(chars, lam0, config)
    res = _engine.run_batch(
        chars, lam0, _engine.MODE_RANDOMIZED, np.asarray(x0, dtype=float), a0,
        params, EngineRequest(records=True), 1, config.seed,
    )
    return _path_from_records(res["records"][0], x0, a0, config.horizon)


def sample_control_path(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    control: IntensityControl,
    x0,
    a0: int,
    config: SimulationConfig,
) -> MarkedPointPath:
    """One path of the pair process under an intensity control."""
    params = _resolve_params(chars, lam0, config)
    res = _engine.run_batch(
        chars, lam0, _engine.MODE_CONTROL, np.asarray(x0, dtype=float), a0,
        params, EngineRequest(records=True), 1, config.seed, control=control,
    )
    return _path_from_records(res["records"][0], x0, a0, config.horizon)


def sample_primal_path(
    chars: LocalCharacteristics,
    policy: PiecewiseOpenLoopPolicy,
    x0,
    config: SimulationConfig,
) -> MarkedPointPath:
    """One path of the policy-controlled process from x0."""
    params = _resolve_params(chars, None, config)
    res = _engine.run_batch(
        chars, None, _engine.MODE_PRIMAL, np.asarray(x0, dtype=float), 0,
        params, EngineRequest(records=True), 1, config.seed, policy=policy,
    )
    x0a = np.asarray(x0, dtype=float).reshape(1, -1)
    a_start = int(
        np.asarray(policy.rule(np.zeros(1, dtype=np.int64), np.zeros(1), x0a))[0]
    )
    return _path_from_records(res["records"][0], x0, a_start, config.horizon)


def run_randomized(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x0,
    a0: int,
    config: SimulationConfig,
    n_paths: int,
    request: Optional[EngineRequest] = None,
    threads: int = 1,
) -> dict:
    """Batch of pair-process paths; returns per-path functional arrays."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    params = _resolve_params(chars, lam0, config)
    req = request if request is not None else EngineRequest(want_cost=True)
    return _engine.run_batch(
        chars, lam0, _engine.MODE_RANDOMIZED, np.asarray(x0, dtype=float), a0,
        params, req, n_paths, config.seed, threads=threads,
    )


def run_control(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    control: IntensityControl,
    x0,
    a0: int,
    config: SimulationConfig,
    n_paths: int,
    request: Optional[EngineRequest] = None,
    threads: int = 1,
) -> dict:
    """Batch of pair-process paths under an intensity control."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    params = _resolve_params(chars, lam0, config)
    req = request if request is not None else EngineRequest(want_cost=True)
    return _engine.run_batch(
        chars, lam0, _engine.MODE_CONTROL, np.asarray(x0, dtype=float), a0,
        params, req, n_paths, config.seed, threads=threads, control=control,
    )


def run_primal(
    chars: LocalCharacteristics,
    policy: PiecewiseOpenLoopPolicy,
    x0,
    config: SimulationConfig,
    n_paths: int,
    request: Optional[EngineRequest] = None,
    threads: int = 1,
) -> dict:
    """Batch of policy-controlled paths."""
    if n_paths <= 0:
        raise ValueError("n_paths must be positive")
    params = _resolve_params(chars, None, config)
    req = request if request is not None else EngineRequest(want_cost=True)
    return _engine.run_batch(
        chars, None, _engine.MODE_PRIMAL, np.asarray(x0, dtype=float), 0,
        params, req, n_paths, config.seed, threads=threads, policy=policy,
    )


def mean_and_se(values: Array) -> tuple[float, float]:
    """Sample mean and its standard error."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return float(v.mean()), float("inf")
    return float(v.mean()), float(v.std(ddof=1) / math.sqrt(v.size))


def _composite_simpson(vals: Array, h: float) -> float:
    n = vals.shape[0] - 1
    return (
        h / 3.0 * (vals[0] + vals[-1] + 4.0 * vals[1:-1:2].sum() + 2.0 * vals[2:-1:2].sum())
    )


def discounted_cost(
    path: MarkedPointPath,
    chars: LocalCharacteristics,
    policy: Optional[PiecewiseOpenLoopPolicy] = None,
    flow_config: Optional[FlowSolverConfig] = None,
) -> tuple[float, float]:
    """Discounted running cost along one recorded path, plus a tail bound.

    Without a policy the action is frozen per segment (pair-process paths).
    With one the action is re-read from the policy along each segment.
    Returns (integral over [0, horizon], bound on the discarded tail).
    """
    fc = flow_config if flow_config is not None else FlowSolverConfig()
    t0s, x0s, a0s = path.segment_starts()
    ends = np.append(path.times, path.horizon)
    total = 0.0
    for k in range(t0s.shape[0]):
        dur = float(ends[k] - t0s[k])
        if dur <= 1e-14:
            continue
        xk = x0s[k]
        if policy is None:
            times, states = flow_nodes(chars, xk, int(a0s[k]), dur, fc.dt)
            acts = np.full(times.shape[0], int(a0s[k]), dtype=np.int64)
        else:
            times, states = _policy_flow_nodes(chars, xk, k, policy, dur, fc.dt)
            where = states if policy.feedback else np.tile(xk, (times.shape[0], 1))
            acts = np.asarray(
                policy.rule(
                    np.full(times.shape[0], k, dtype=np.int64), times, where
                ),
                dtype=np.int64,
            )
        g = np.exp(-chars.discount * (t0s[k] + times)) * chars.cost(states, acts)
        total += _composite_simpson(g, float(times[1] - times[0]))
    tail = chars.value_cap * math.exp(-chars.discount * path.horizon)
    return total, tail


def _policy_flow_nodes(
    chars: LocalCharacteristics,
    x: Array,
    n_jumps: int,
    policy: PiecewiseOpenLoopPolicy,
    s: float,
    dt: float,
):
    """Flow nodes over one inter-jump segment with policy-driven actions."""
    n = max(2, 2 * math.ceil(s / (2.0 * dt)))
    h = s / n
    times = np.linspace(0.0, s, n + 1)
    states = np.empty((n + 1, x.shape[0]))
    states[0] = x
    xk = np.tile(x, (1, 1))
    x_seg = np.tile(x, (1, 1))
    nj = np.full(1, n_jumps, dtype=np.int64)
    drift = chars.drift

    def act(tau, xs):
        where = xs if policy.feedback else x_seg
        return np.asarray(policy.rule(nj, np.array([tau]), where), dtype=np.int64)

    for i in range(n):
        t = times[i]
        k1 = drift(xk, act(t, xk))
        x2 = xk + 0.5 * h * k1
        k2 = drift(x2, act(t + 0.5 * h, x2))
        x3 = xk + 0.5 * h * k2
        k3 = drift(x3, act(t + 0.5 * h, x3))
        x4 = xk + h * k3
        k4 = drift(x4, act(t + h, x4))
        xk = xk + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        states[i + 1] = xk[0]
    return times, states


def _predictable_rate(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    t: Array,
    x: Array,
    a_idx: Array,
    test_fn: Callable,
) -> Array:
    """Test function integrated against the pair-process jump intensity."""
    lam = chars.rate(x, a_idx)
    atoms = chars.kernel.atoms(x, a_idx)
    w = chars.kernel.weights(x, a_idx)
    k, j = w.shape
    vals = test_fn(
        np.repeat(t, j), atoms.reshape(k * j, -1), np.repeat(a_idx, j)
    ).reshape(k, j)
    out = lam * (w * vals).sum(axis=1)
    m = lam0.weights.shape[0]
    vals_b = test_fn(
        np.repeat(t, m),
        np.repeat(x, m, axis=0),
        np.tile(np.arange(m, dtype=np.int64), k),
    ).reshape(k, m)
    return out + vals_b @ lam0.weights


def compensator_residual(
    paths: Sequence[MarkedPointPath],
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    test_fn: Callable,
    t: float,
    flow_config: Optional[FlowSolverConfig] = None,
) -> tuple[float, float]:
    """Martingale residual of the marked point measure, with its SE.

    For each path this is the sum of test(T_n, X_n, I_n) over jumps up to t
    minus the integral of the test function against the predictable
    intensity over [0, t].  Means near zero (relative to the Monte Carlo
    error) are evidence the sampler realizes the claimed jump measure.

    test_fn must be vectorized: (t (n,), x (n, dim), a_idx (n,)) -> (n,).
    Returns (mean residual, standard error).
    """
    if len(paths) == 0:
        raise ValueError("need at least one path")
    if t <= 0:
        raise ValueError("t must be positive")
    fc = flow_config if flow_config is not None else FlowSolverConfig()
    out = np.empty(len(paths))
    for ip, path in enumerate(paths):
        keep = path.times <= t + 1e-12
        if np.any(keep):
            jump_sum = float(
                test_fn(path.times[keep], path.states[keep], path.actions[keep]).sum()
            )
        else:
            jump_sum = 0.0
        t0s, x0s, a0s = path.segment_starts()
        ends = np.append(path.times, path.horizon)
        integral = 0.0
        for k in range(t0s.shape[0]):
            if t0s[k] >= t - 1e-14:
                break
            dur = float(min(ends[k], t) - t0s[k])
            if dur <= 1e-14:
                continue
            times, states = flow_nodes(chars, x0s[k], int(a0s[k]), dur, fc.dt)
            acts = np.full(times.shape[0], int(a0s[k]), dtype=np.int64)
            g = _predictable_rate(chars, lam0, t0s[k] + times, states, acts, test_fn)
            integral += _composite_simpson(g, float(times[1] - times[0]))
        out[ip] = jump_sum - integral
    return mean_and_se(out)
