"""Dual control side: density processes and intensity-controlled costs.

An intensity control nu reweights the action-resampling channel of the
pair process.  The associated exponential density

    L_t = exp( int_0^t sum_b (1 - nu_s(b)) lam0({b}) ds )
          * prod_{action jumps T_k <= t} nu_{T_k}(A_k)

has unit mean under the reference law and turns nu * lam0 into the
action-jump compensator under the tilted measure.  The dual cost of nu can
therefore be estimated two independent ways: reweighting reference paths
by L, or simulating under the tilted measure directly.  Agreement of the
two is a strong end-to-end check on both the density and the samplers.
"""

from __future__ import annotations

import dataclasses
import math
from typing import Optional, Sequence

import numpy as np

from . import simulate
from ._engine import EngineRequest
from .flow import FlowSolverConfig, flow_nodes
from .model import (
    ACTION_JUMP,
    ActionMeasure,
    GridValueFunction,
    IntensityControl,
    LocalCharacteristics,
    MarkedPointPath,
)
from .simulate import SimulationConfig, mean_and_se

Array = np.ndarray


def density_along_path(
    path: MarkedPointPath,
    nu: IntensityControl,
    lam0: ActionMeasure,
    chars: LocalCharacteristics,
    t: float,
    flow_config: Optional[FlowSolverConfig] = None,
) -> float:
    """Evaluate L_t on one recorded pair-process path."""
    if t < 0 or t > path.horizon + 1e-12:
        raise ValueError("t must lie in [0, horizon]")
    fc = flow_config if flow_config is not None else FlowSolverConfig()
    w0 = lam0.weights
    m0 = lam0.mass
    t0s, x0s, a0s = path.segment_starts()
    ends = np.append(path.times, path.horizon)
    log_l = 0.0
    for k in range(t0s.shape[0]):
        if t0s[k] >= t - 1e-14:
            break
        dur = float(min(ends[k], t) - t0s[k])
        if dur <= 1e-14:
            continue
        times, states = flow_nodes(chars, x0s[k], int(a0s[k]), dur, fc.dt)
        nn = times.shape[0]
        rows = nu.rows(
            t0s[k] + times,
            states,
            np.full(nn, a0s[k], dtype=np.int64),
            np.full(nn, k, dtype=np.int64),
        )
        g = m0 - rows @ w0
        log_l += simulate._composite_simpson(g, float(times[1] - times[0]))
    # jump factors for the action-resampling events
    for k in range(path.n_jumps):
        if path.times[k] > t + 1e-12:
            break
        if path.kinds[k] != ACTION_JUMP:
            continue
        x_pre = x0s[k]  # pre-jump position equals the segment-k flow endpoint
        dur = float(path.times[k] - t0s[k])
        if dur > 1e-14:
            _, states = flow_nodes(chars, x0s[k], int(a0s[k]), dur, fc.dt)
            x_pre = states[-1]
        val = nu.value(float(path.times[k]), x_pre, int(a0s[k]), k, int(path.actions[k]))
        if val <= 0.0:
            return 0.0
        log_l += math.log(val)
    return float(math.exp(log_l))


def dual_cost_reweighted(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    a: int,
    nu: IntensityControl,
    cfg: SimulationConfig,
    n_paths: int,
    threads: int = 1,
) -> tuple[float, float]:
    """Dual cost of nu by reweighting reference paths with the density."""
    est, se = dual_battery_reweighted(chars, lam0, x, a, (nu,), cfg, n_paths, threads)
    return est[0], se[0]


def dual_battery_reweighted(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    a: int,
    nus: Sequence[IntensityControl],
    cfg: SimulationConfig,
    n_paths: int,
    threads: int = 1,
) -> tuple[Array, Array]:
    """Reweighted dual costs for several controls from one reference run.

    Every control rides the same reference paths, so differences between
    entries are not polluted by independent Monte Carlo noise.
    Returns (estimates, standard errors) aligned with nus.
    """
    req = EngineRequest(want_cost=True, density_controls=tuple(nus))
    res = simulate.run_randomized(
        chars, lam0, x, a, cfg, n_paths, request=req, threads=threads
    )
    weights = np.exp(res["logL"])  # (n_paths, len(nus))
    vals = weights * res["cost"][:, None]
    est = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / math.sqrt(vals.shape[0])
    return est, se


def density_means(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    a: int,
    nus: Sequence[IntensityControl],
    cfg: SimulationConfig,
    n_paths: int,
    threads: int = 1,
) -> tuple[Array, Array]:
    """Sample means of L_{T*} per control (each should be 1)."""
    req = EngineRequest(density_controls=tuple(nus))
    res = simulate.run_randomized(
        chars, lam0, x, a, cfg, n_paths, request=req, threads=threads
    )
    weights = np.exp(res["logL"])
    est = weights.mean(axis=0)
    se = weights.std(axis=0, ddof=1) / math.sqrt(weights.shape[0])
    return est, se


def dual_cost_direct(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    a: int,
    nu: IntensityControl,
    cfg: SimulationConfig,
    n_paths: int,
    threads: int = 1,
) -> tuple[float, float]:
    """Dual cost of nu by simulating under the tilted measure directly.

    The action-jump intensity becomes nu_t(b) lam0({b}); jumps are thinned
    against the control's declared bound and marks drawn proportional to
    the controlled intensity.  No weights, so the variance stays that of
    the plain cost.
    """
    res = simulate.run_control(chars, lam0, nu, x, a, cfg, n_paths, threads=threads)
    return mean_and_se(res["cost"])


def epsilon_shift_control(
    base: IntensityControl,
    lam0: ActionMeasure,
    target_a: int,
    eps: float,
) -> IntensityControl:
    """Control that forces an early action jump into target_a.

    Until the first jump of the pair process the control puts intensity
    1/(eps * lam0({target_a})) on the target action and zero elsewhere, so
    an action switch to target_a happens at rate 1/eps.  From the first
    jump on it replays base with the jump count shifted down by one.  As
    eps -> 0 the dual cost started from any action converges to the base
    cost started from target_a.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    m = lam0.n_actions
    if not 0 <= target_a < m:
        raise ValueError("target_a outside the action set")
    w_t = float(lam0.weights[target_a])
    kick = 1.0 / (eps * w_t)
    base_mass = base.nu_max * lam0.mass

    def rows(t, x, a_idx, n_jumps):
        n = np.asarray(t).shape[0]
        out = np.zeros((n, m))
        fresh = np.asarray(n_jumps) == 0
        out[fresh, target_a] = kick
        rest = ~fresh
        if np.any(rest):
            out[rest] = base.rows(
                np.asarray(t)[rest],
                np.asarray(x)[rest],
                np.asarray(a_idx)[rest],
                np.asarray(n_jumps)[rest] - 1,
            )
        return out

    def mass_bound(n_jumps):
        return np.where(np.asarray(n_jumps) == 0, 1.0 / eps, base_mass)

    return IntensityControl(
        rows,
        0.0,
        max(kick, base.nu_max),
        name=f"shift[{base.name}, a->{target_a}, eps={eps:g}]",
        allow_zero=True,
        mass_bound=mass_bound,
    )


def a_shift_experiment(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    target_a: int,
    start_a: int,
    base: IntensityControl,
    eps_grid: Sequence[float],
    cfg: SimulationConfig,
    n_paths: int,
    threads: int = 1,
) -> dict:
    """Measure the starting-action dependence washed out by shift controls.

    Estimates the base dual cost from (x, target_a) and the shifted costs
    from (x, start_a) on a decreasing eps grid, then removes the leading
    O(eps) bias by Richardson extrapolation of the last two grid points.
    """
    eps_grid = [float(e) for e in eps_grid]
    if len(eps_grid) < 2:
        raise ValueError("need at least two eps values to extrapolate")
    if any(e <= 0 for e in eps_grid):
        raise ValueError("eps grid must be positive")
    ref_est, ref_se = dual_cost_direct(
        chars, lam0, x, target_a, base, cfg, n_paths, threads=threads
    )
    ests, ses = [], []
    for k, eps in enumerate(eps_grid):
        shifted = epsilon_shift_control(base, lam0, target_a, eps)
        cfg_k = dataclasses.replace(cfg, seed=cfg.seed + k + 1)
        e, s = dual_cost_direct(
            chars, lam0, x, start_a, shifted, cfg_k, n_paths, threads=threads
        )
        ests.append(e)
        ses.append(s)
    e1, e0 = ests[-1], ests[-2]
    eps1, eps0 = eps_grid[-1], eps_grid[-2]
    w = eps0 / (eps0 - eps1)
    extr = w * e1 - (w - 1.0) * e0
    extr_se = math.hypot(w * ses[-1], (w - 1.0) * ses[-2])
    return {
        "eps": eps_grid,
        "estimates": ests,
        "se": ses,
        "extrapolated": (float(extr), float(extr_se)),
        "reference": (ref_est, ref_se),
    }


def zsign_bang_bang(
    values: GridValueFunction,
    level: float,
    floor: float = 1e-3,
) -> IntensityControl:
    """Feedback control at the penalization level where switching pays.

    Reads a grid table v(x, b) and plays intensity `level` toward actions
    with v(x, b) < v(x, a), `floor` elsewhere.  This is the near-optimal
    control for the penalized problem at that level.
    """
    if level <= floor:
        raise ValueError("level must exceed the floor")

    def rows(t, x, a_idx, n_jumps):
        tab = values(np.asarray(x, dtype=float))  # (n, m)
        own = tab[np.arange(tab.shape[0]), np.asarray(a_idx, dtype=np.int64)]
        return np.where(tab < own[:, None], level, floor)

    return IntensityControl(rows, floor, level, name=f"zsign[{level:g}]")
