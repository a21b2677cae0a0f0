"""Deterministic flow between jumps and hazard integrals along it.

The inter-jump motion solves x' = h(x, a) for a frozen action, or
x' = h(x, beta(t)) under a time-dependent action schedule.  Integration is
classical fixed-step fourth-order Runge-Kutta; the final partial step is
shortened to land exactly on the requested time.

Hazard integrals reuse the flow nodes: the integrand is evaluated at the
Runge-Kutta grid and summed with composite Simpson weights, which keeps the
quadrature error at the same fourth order as the flow itself.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import LocalCharacteristics

Array = np.ndarray


@dataclass(frozen=True)
class FlowSolverConfig:
    """Step control for the flow integrator.

    dt:           nominal Runge-Kutta step
    max_elapsed:  guard against runaway integration horizons
    """

    dt: float = 1e-3
    max_elapsed: float = 1e4

    def __post_init__(self):
        if self.dt <= 0 or self.max_elapsed <= 0:
            raise ValueError("dt and max_elapsed must be positive")


def _rk4_step(chars: LocalCharacteristics, x: Array, a_idx: Array, h: float) -> Array:
    k1 = chars.drift(x, a_idx)
    k2 = chars.drift(x + 0.5 * h * k1, a_idx)
    k3 = chars.drift(x + 0.5 * h * k2, a_idx)
    k4 = chars.drift(x + h * k3, a_idx)
    return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def rk4_advance(
    chars: LocalCharacteristics, x: Array, a_idx: Array, t: float, dt: float
) -> Array:
    """Advance a state batch by time t under frozen actions (internal)."""
    if t == 0.0:
        return x.copy()
    n_full, rem = divmod(t, dt)
    out = x
    for _ in range(int(n_full)):
        out = _rk4_step(chars, out, a_idx, dt)
    if rem > 1e-14 * max(t, 1.0):
        out = _rk4_step(chars, out, a_idx, rem)
    return out


def flow(
    chars: LocalCharacteristics,
    x,
    a_idx: int,
    t: float,
    config: FlowSolverConfig = FlowSolverConfig(),
) -> Array:
    """Flow map phi(t, x, a) for a single state and frozen action."""
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    if t > config.max_elapsed:
        raise ValueError(f"flow time {t} exceeds max_elapsed {config.max_elapsed}")
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    a = np.full(xb.shape[0], a_idx, dtype=np.int64)
    return rk4_advance(chars, xb, a, t, config.dt)[0]


def flow_policy(
    chars: LocalCharacteristics,
    x,
    beta,
    t: float,
    config: FlowSolverConfig = FlowSolverConfig(),
) -> Array:
    """Flow under a time-dependent action schedule beta(s) -> action index.

    The action is re-read at every Runge-Kutta stage time, so a schedule
    that switches inside a step is seen by the stages after the switch.
    """
    if t < 0:
        raise ValueError("flow time must be nonnegative")
    if t > config.max_elapsed:
        raise ValueError(f"flow time {t} exceeds max_elapsed {config.max_elapsed}")
    xb = np.atleast_2d(np.asarray(x, dtype=float))

    def stage(s: float) -> Array:
        return np.full(xb.shape[0], int(beta(s)), dtype=np.int64)

    steps = int(np.ceil(t / config.dt - 1e-12)) if t > 0 else 0
    out = xb
    s = 0.0
    for k in range(steps):
        h = min(config.dt, t - s)
        a0, am, a1 = stage(s), stage(s + 0.5 * h), stage(s + h)
        k1 = chars.drift(out, a0)
        k2 = chars.drift(out + 0.5 * h * k1, am)
        k3 = chars.drift(out + 0.5 * h * k2, am)
        k4 = chars.drift(out + h * k3, a1)
        out = out + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        s += h
    return out[0]


def flow_nodes(
    chars: LocalCharacteristics, x, a_idx: int, s: float, dt: float
) -> tuple[Array, Array]:
    """Flow sampled on a uniform grid with an even number of steps.

    Returns (times (n+1,), states (n+1, dim)); n is even so the composite
    Simpson rule applies directly.
    """
    xb = np.atleast_2d(np.asarray(x, dtype=float))
    if s == 0.0:
        return np.array([0.0]), xb
    n = max(2, 2 * int(np.ceil(s / (2.0 * dt))))
    h = s / n
    a = np.full(1, a_idx, dtype=np.int64)
    states = np.empty((n + 1, xb.shape[1]))
    states[0] = xb[0]
    cur = xb
    for k in range(n):
        cur = _rk4_step(chars, cur, a, h)
        states[k + 1] = cur[0]
    return np.linspace(0.0, s, n + 1), states


def integrated_hazard(
    chars: LocalCharacteristics,
    lam0_mass: float,
    x,
    a_idx: int,
    s: float,
    config: FlowSolverConfig = FlowSolverConfig(),
) -> float:
    """Integral of lambda(phi(r, x, a), a) + lam0_mass over r in [0, s].

    Composite Simpson on the Runge-Kutta flow grid.  ``lam0_mass`` is the
    total mass of the action-resampling measure; pass 0 for the primal
    process.
    """
    if s < 0:
        raise ValueError("hazard horizon must be nonnegative")
    if lam0_mass < 0:
        raise ValueError("lam0_mass must be nonnegative")
    if s == 0.0:
        return 0.0
    if s > config.max_elapsed:
        raise ValueError(f"hazard horizon {s} exceeds max_elapsed")
    times, states = flow_nodes(chars, x, a_idx, s, config.dt)
    n = times.shape[0] - 1
    a = np.full(states.shape[0], a_idx, dtype=np.int64)
    lam = chars.rate(states, a) + lam0_mass
    h = s / n
    w = np.ones(n + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return float((h / 3.0) * (w * lam).sum())
