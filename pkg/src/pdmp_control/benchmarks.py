"""Built-in benchmark problems.

Four desk-scale problems exercise the solvers from different angles:

B1_constant_cost   constant running cost, so every admissible control has
                   value M_f / delta exactly; pure plumbing check.
B2_jump_only       zero drift on a three-point support: a continuous-time
                   Markov decision chain with a cheap independent oracle.
B3_deterministic   zero jump rate: a deterministic control problem solved
                   independently by time-discretized dynamic programming.
B4_full_1d         drift, state-dependent rate, and a spread-out kernel all
                   active; no oracle, checked by cross-method agreement.

Each benchmark fixes a default action-resampling measure (unit mass per
action), a default start point, and a Monte Carlo horizon.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (
    ActionMeasure,
    ActionSet,
    Bounds,
    Box,
    LocalCharacteristics,
    TransitionKernel,
)

Array = np.ndarray


@dataclass(frozen=True)
class Benchmark:
    name: str
    chars: LocalCharacteristics
    action_measure: ActionMeasure
    x0: Array
    a0: int
    horizon: float
    notes: str = ""

    @property
    def delta(self) -> float:
        return self.chars.discount


# ---------------------------------------------------------------------------
# B1: constant cost
# ---------------------------------------------------------------------------


def _build_b1() -> Benchmark:
    box = Box(np.array([-2.0]), np.array([2.0]))
    actions = ActionSet(np.array([-1.0, 1.0]))
    coords = actions.coords

    def drift(x, a_idx):
        return coords[a_idx][:, None] * np.ones_like(x)

    def rate(x, a_idx):
        return np.ones(x.shape[0])

    def cost(x, a_idx):
        return np.ones(x.shape[0])

    def atoms(x, a_idx):
        lo, hi = box.lo[0], box.hi[0]
        left = np.clip(x[:, 0] - 0.5, lo, hi)
        right = np.clip(x[:, 0] + 0.5, lo, hi)
        return np.stack([left, right], axis=1)[:, :, None]

    def weights(x, a_idx):
        return np.full((x.shape[0], 2), 0.5)

    chars = LocalCharacteristics(
        dim=1,
        domain=box,
        actions=actions,
        drift=drift,
        rate=rate,
        kernel=TransitionKernel(atoms, weights, 2),
        cost=cost,
        discount=1.0,
        bounds=Bounds(drift_sup=1.0, drift_lip=0.0, rate_sup=1.0, cost_sup=1.0),
    )
    return Benchmark(
        name="B1_constant_cost",
        chars=chars,
        action_measure=ActionMeasure(np.ones(2)),
        x0=np.array([0.0]),
        a0=0,
        horizon=20.0,
        notes="f constant, so the value function is identically M_f/delta = 1",
    )


def b1_oracle_value() -> float:
    return 1.0


# ---------------------------------------------------------------------------
# B2: jump-only chain on {-1, 0, 1}
# ---------------------------------------------------------------------------

_B2_SUPPORT = np.array([-1.0, 0.0, 1.0])
# one stochastic matrix per action; rows indexed by the support points
_B2_ROWS = np.array(
    [
        [[0.60, 0.30, 0.10], [0.25, 0.50, 0.25], [0.10, 0.30, 0.60]],  # a = 0
        [[0.20, 0.70, 0.10], [0.30, 0.40, 0.30], [0.10, 0.70, 0.20]],  # a = 1
    ]
)


def _b2_nearest(x: Array) -> Array:
    """Index of the nearest support point, first index on ties."""
    d = np.abs(x[:, 0][:, None] - _B2_SUPPORT[None, :])
    return np.argmin(d, axis=1)


def _build_b2() -> Benchmark:
    box = Box(np.array([-1.5]), np.array([1.5]))
    actions = ActionSet(np.array([0.0, 1.0]))
    coords = actions.coords

    def drift(x, a_idx):
        return np.zeros_like(x)

    def rate(x, a_idx):
        return 1.0 + 0.5 * coords[a_idx]

    def cost(x, a_idx):
        return x[:, 0] ** 2 + 0.1 * coords[a_idx]

    def atoms(x, a_idx):
        return np.broadcast_to(
            _B2_SUPPORT[None, :, None], (x.shape[0], 3, 1)
        ).copy()

    def weights(x, a_idx):
        return _B2_ROWS[a_idx, _b2_nearest(x)]

    chars = LocalCharacteristics(
        dim=1,
        domain=box,
        actions=actions,
        drift=drift,
        rate=rate,
        kernel=TransitionKernel(atoms, weights, 3),
        cost=cost,
        discount=0.5,
        bounds=Bounds(drift_sup=0.0, drift_lip=0.0, rate_sup=1.5, cost_sup=2.35),
    )
    return Benchmark(
        name="B2_jump_only",
        chars=chars,
        action_measure=ActionMeasure(np.ones(2)),
        x0=np.array([1.0]),
        a0=0,
        horizon=20.0,
        notes="three-state chain; off-support grid nodes use the nearest row",
    )


@functools.lru_cache(maxsize=None)
def b2_oracle(tol: float = 1e-13, max_iter: int = 200_000):
    """Exact chain solution by fixed-point iteration on the support.

    Iterates v <- min_a (f_a + lam_a Q_a v) / (delta + lam_a) on the three
    support states until the sup-norm update falls below tol.  Returns
    (values (3,), argmin actions (3,), residual of the rate equation).
    """
    delta = 0.5
    lam = np.array([1.0, 1.5])
    f = np.stack(
        [_B2_SUPPORT**2 + 0.1 * a for a in (0.0, 1.0)], axis=1
    )  # (3, 2)
    v = np.zeros(3)
    for _ in range(max_iter):
        cand = np.stack(
            [(f[:, a] + lam[a] * (_B2_ROWS[a] @ v)) / (delta + lam[a]) for a in (0, 1)],
            axis=1,
        )
        v_new = cand.min(axis=1)
        if np.max(np.abs(v_new - v)) < tol:
            v = v_new
            break
        v = v_new
    cand = np.stack(
        [lam[a] * (_B2_ROWS[a] @ v - v) + f[:, a] for a in (0, 1)], axis=1
    )
    residual = float(np.max(np.abs(delta * v - cand.min(axis=1))))
    policy = np.argmin(cand, axis=1)
    return v, policy, residual


# ---------------------------------------------------------------------------
# B3: deterministic control
# ---------------------------------------------------------------------------


def _build_b3() -> Benchmark:
    box = Box(np.array([-2.0]), np.array([2.0]))
    actions = ActionSet(np.array([-1.0, 0.0, 1.0]))
    coords = actions.coords

    def drift(x, a_idx):
        return (coords[a_idx] * (1.0 - x[:, 0] ** 2 / 4.0))[:, None]

    def rate(x, a_idx):
        return np.zeros(x.shape[0])

    def cost(x, a_idx):
        return x[:, 0] ** 2

    def atoms(x, a_idx):
        return x[:, None, :].copy()

    def weights(x, a_idx):
        return np.ones((x.shape[0], 1))

    chars = LocalCharacteristics(
        dim=1,
        domain=box,
        actions=actions,
        drift=drift,
        rate=rate,
        kernel=TransitionKernel(atoms, weights, 1),
        cost=cost,
        discount=1.0,
        bounds=Bounds(drift_sup=1.0, drift_lip=1.0, rate_sup=0.0, cost_sup=4.0),
    )
    return Benchmark(
        name="B3_deterministic",
        chars=chars,
        action_measure=ActionMeasure(np.ones(3)),
        x0=np.array([1.0]),
        a0=0,
        horizon=20.0,
        notes="no jumps; drift vanishes at the box edge so paths stay inside",
    )


def _b3_dp_table(dt: float, dx: float) -> tuple[Array, Array]:
    """One time-discretized dynamic program for B3 at resolution (dt, dx).

    Policy iteration on v(x) = min_a [ f(x) g + e^{-dt} v(x + h(x,a) dt) ]
    with g = (1 - e^{-dt}) (discount 1), linear interpolation in x.  Returns
    (axis nodes, values).
    """
    import scipy.sparse as sp
    import scipy.sparse.linalg as spla

    nodes = np.arange(-2.0, 2.0 + dx / 2, dx)
    n = nodes.shape[0]
    g = 1.0 - np.exp(-dt)
    disc = np.exp(-dt)
    fvec = nodes**2

    mats = []
    for a in (-1.0, 0.0, 1.0):
        feet = np.clip(nodes + a * (1.0 - nodes**2 / 4.0) * dt, -2.0, 2.0)
        j = np.clip(np.searchsorted(nodes, feet, side="right") - 1, 0, n - 2)
        th = (feet - nodes[j]) / dx
        rows = np.repeat(np.arange(n), 2)
        cols = np.stack([j, j + 1], axis=1).ravel()
        w = np.stack([1.0 - th, th], axis=1).ravel()
        mats.append(sp.csr_matrix((w, (rows, cols)), shape=(n, n)))

    v = np.zeros(n)
    pol_prev = np.full(n, -1)
    for _ in range(200):
        cand = np.stack([fvec * g + disc * (P @ v) for P in mats], axis=1)
        pol = np.argmin(cand, axis=1)
        # policy evaluation: (I - disc P_pol) v = f g
        data, rows_l, cols_l = [], [], []
        for a in range(3):
            sel = np.where(pol == a)[0]
            if sel.size == 0:
                continue
            sub = mats[a][sel]
            coo = sub.tocoo()
            rows_l.append(sel[coo.row])
            cols_l.append(coo.col)
            data.append(coo.data)
        P = sp.csr_matrix(
            (np.concatenate(data), (np.concatenate(rows_l), np.concatenate(cols_l))),
            shape=(n, n),
        )
        v_new = spla.spsolve(sp.eye(n).tocsr() - disc * P, fvec * g)
        if np.array_equal(pol, pol_prev) and np.max(np.abs(v_new - v)) < 1e-13:
            v = v_new
            break
        v, pol_prev = v_new, pol
    return nodes, v


@functools.lru_cache(maxsize=None)
def b3_oracle(dt: float = 1e-3):
    """Reference solver for B3 with Richardson extrapolation.

    Runs the dynamic program at (dt, dx = 2 dt) and (dt/2, dx = dt) and
    extrapolates 2 v_half - v_full, which cancels the leading error term of
    both the time step and the interpolation.  Returns a callable V(x).
    """
    nodes_c, v_c = _b3_dp_table(dt, 2.0 * dt)
    nodes_f, v_f = _b3_dp_table(dt / 2.0, dt)
    v_c_on_f = np.interp(nodes_f, nodes_c, v_c)
    v_rich = 2.0 * v_f - v_c_on_f

    def value(x):
        return np.interp(np.asarray(x, dtype=float), nodes_f, v_rich)

    return value


def b3_trajectory_value(x0: float) -> float:
    """Cost of the bang-bang trajectory that drives B3 to the origin.

    For x0 in (0, 2) under a = -1 the flow is x(t) = 2 tanh(u0 - t/2) with
    u0 = artanh(x0 / 2), reaching 0 at t0 = 2 u0, after which a = 0 holds the
    state at no cost.  The value is the discounted cost along that ride.
    """
    from scipy.integrate import quad

    x0 = abs(float(x0))
    if x0 == 0.0:
        return 0.0
    u0 = np.arctanh(x0 / 2.0)
    t0 = 2.0 * u0

    def integrand(t):
        return np.exp(-t) * 4.0 * np.tanh(u0 - t / 2.0) ** 2

    val, _ = quad(integrand, 0.0, t0, limit=200, epsabs=1e-12, epsrel=1e-12)
    return float(val)


# ---------------------------------------------------------------------------
# B4: all features active
# ---------------------------------------------------------------------------


def _build_b4() -> Benchmark:
    box = Box(np.array([-3.0]), np.array([3.0]))
    actions = ActionSet(np.array([-1.0, 0.0, 1.0]))
    coords = actions.coords

    gl_nodes, gl_weights = np.polynomial.legendre.leggauss(5)
    gl_weights = gl_weights / gl_weights.sum()  # probability weights on [-1, 1]

    def drift(x, a_idx):
        return (coords[a_idx] - np.tanh(x[:, 0]))[:, None]

    def rate(x, a_idx):
        lever = (1.0 + coords[a_idx]) / 2.0
        return 0.5 + 0.25 * lever / (1.0 + x[:, 0] ** 2)

    def cost(x, a_idx):
        return np.minimum(x[:, 0] ** 2, 4.0) + 0.2 * np.abs(coords[a_idx])

    def atoms(x, a_idx):
        pts = x[:, 0][:, None] + gl_nodes[None, :]
        return np.clip(pts, box.lo[0], box.hi[0])[:, :, None]

    def weights(x, a_idx):
        return np.broadcast_to(gl_weights[None, :], (x.shape[0], 5)).copy()

    chars = LocalCharacteristics(
        dim=1,
        domain=box,
        actions=actions,
        drift=drift,
        rate=rate,
        kernel=TransitionKernel(atoms, weights, 5),
        cost=cost,
        discount=1.0,
        bounds=Bounds(drift_sup=2.0, drift_lip=1.0, rate_sup=0.75, cost_sup=4.2),
    )
    return Benchmark(
        name="B4_full_1d",
        chars=chars,
        action_measure=ActionMeasure(np.ones(3)),
        x0=np.array([0.0]),
        a0=0,
        horizon=20.0,
        notes="drift, rate, kernel, and cost all action-dependent; no oracle",
    )


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------

_BUILDERS: dict[str, Callable[[], Benchmark]] = {
    "B1_constant_cost": _build_b1,
    "B2_jump_only": _build_b2,
    "B3_deterministic": _build_b3,
    "B4_full_1d": _build_b4,
}

_ALIASES = {
    "b1": "B1_constant_cost",
    "b2": "B2_jump_only",
    "b3": "B3_deterministic",
    "b4": "B4_full_1d",
}


def names() -> tuple[str, ...]:
    return tuple(_BUILDERS)


@functools.lru_cache(maxsize=None)
def get(name: str) -> Benchmark:
    key = _ALIASES.get(name.lower(), name)
    if key not in _BUILDERS:
        raise KeyError(f"unknown benchmark {name!r}; available: {', '.join(_BUILDERS)}")
    return _BUILDERS[key]()


def with_overrides(
    bench: Benchmark,
    discount: Optional[float] = None,
    lam0_scale: Optional[float] = None,
) -> Benchmark:
    """Benchmark copy with an overridden discount or scaled action measure."""
    chars = bench.chars
    if discount is not None:
        if discount <= 0:
            raise ValueError("discount must be positive")
        chars = LocalCharacteristics(
            dim=chars.dim,
            domain=chars.domain,
            actions=chars.actions,
            drift=chars.drift,
            rate=chars.rate,
            kernel=chars.kernel,
            cost=chars.cost,
            discount=discount,
            bounds=chars.bounds,
        )
    measure = bench.action_measure
    if lam0_scale is not None:
        measure = measure.scaled(lam0_scale)
    return Benchmark(
        name=bench.name,
        chars=chars,
        action_measure=measure,
        x0=bench.x0,
        a0=bench.a0,
        horizon=bench.horizon,
        notes=bench.notes,
    )
