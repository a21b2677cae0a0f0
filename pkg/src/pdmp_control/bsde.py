"""Penalized switching systems on the action-randomized process.

For a penalization level n the value table v^n(x, a) solves

    delta v = h(x,a) . grad_x v
              + lambda(x,a) int (v(y,a) - v(x,a)) Q(x,a,dy)
              + f(x,a)
              - n int_A [v(x,b) - v(x,a)]^- lam0(db)           (*)

the stationary form of the penalized backward equation on the pair
process.  There is no free action-rotation term in (*): the equation's
-int Z lam0(db) driver term exactly cancels the rotation part of the
pair generator, which is also what the dual picture demands -- the
infimum of controlled costs over switching intensities in (0, n]
produces the one-sided penalty alone.  The Monte Carlo scheme below
keeps both pieces explicitly (rotation inside the conditional
expectation over pair paths, subtraction inside the driver); the grid
scheme works with the cancelled form.  Their agreement is one of the
package's core cross-checks.

As n grows, v^n decreases pointwise to a limit independent of the
action argument which matches the primal grid solution.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from . import simulate
from ._engine import EngineRequest
from .hjb import GridSolverConfig, build_action_operators
from .model import (
    ActionMeasure,
    Grid,
    GridValueFunction,
    LocalCharacteristics,
)
from .simulate import SimulationConfig

Array = np.ndarray


# ---------------------------------------------------------------------------
# grid fixed point
# ---------------------------------------------------------------------------


@dataclass
class PenalizedGridSolution:
    n: int
    values: GridValueFunction  # per-action table (n_nodes, m)
    residual: float  # sup norm of the last update
    iterations: int
    dt: float
    trace: list = field(default_factory=list)

    def spread(self) -> Array:
        v = self.values.values
        return v.max(axis=1) - v.min(axis=1)


def _switch_candidate(
    others: Array,  # (n_nodes, m-1) sorted ascending values of the other actions
    w_sorted: Array,  # (n_nodes, m-1) matching lam0 weights
    base_num: Array,  # (n_nodes,) f + lam * (quad v)  at this action
    flow_val: Array,  # (n_nodes,) interpolated v at the one-step foot
    lam: Array,
    n_level: float,
    delta: float,
    dt: float,
) -> Array:
    """Exact one-node update of the penalized scheme by case enumeration.

    The switching set {b : v(x,b) < u} depends on the unknown u itself,
    but only through how many of the sorted other-action values lie below
    it.  With k values folded in, the one-step exponential update reads

        u_k = (1 - e^{-(delta+mu_k) dt}) / (delta+mu_k)
                * (base + n * sum_{j<=k} w_j s_j)
              + e^{-(delta+mu_k) dt} * flow_val,      mu_k = lam + n W_k,

    a constant on the bracket (s_k, s_{k+1}].  Walk the cases upward: a
    candidate landing inside its own bracket is the answer; a candidate
    falling below the bracket after the previous case overshot means the
    update crosses the diagonal at the breakpoint, so the value pins
    there.
    """
    n_nodes, m1 = others.shape
    u = np.empty(n_nodes)
    done = np.zeros(n_nodes, dtype=bool)
    w_cum = np.concatenate(
        [np.zeros((n_nodes, 1)), np.cumsum(w_sorted, axis=1)], axis=1
    )
    sw_cum = np.concatenate(
        [np.zeros((n_nodes, 1)), np.cumsum(w_sorted * others, axis=1)], axis=1
    )
    for k in range(m1 + 1):
        mu = lam + n_level * w_cum[:, k]
        total = delta + mu
        e = np.exp(-total * dt)
        cand = (1.0 - e) / total * (base_num + n_level * sw_cum[:, k]) + e * flow_val
        if k > 0:
            lo = others[:, k - 1]
            pin = ~done & (cand < lo)
            u[pin] = lo[pin]
            done |= pin
        hi_ok = cand <= others[:, k] if k < m1 else np.ones(n_nodes, dtype=bool)
        take = ~done & hi_ok
        u[take] = cand[take]
        done |= take
    return u


def penalized_grid_solve(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    n: int,
    config: Optional[GridSolverConfig] = None,
    warm_start: Optional[Array] = None,
    _ops: Optional[list] = None,
    _grid: Optional[Grid] = None,
) -> PenalizedGridSolution:
    """Damped Gauss-Seidel fixed point for the level-n switching system.

    Sweeps the actions in order, updating each column exactly against the
    frozen others (the stiff switching terms are folded into the survival
    rate through case enumeration, so the sweep count does not degrade as
    n grows), then relaxes the column halfway.  Flow and state-jump terms
    stay explicit, guarded by the damping.
    """
    if n < 1:
        raise ValueError("penalization level must be >= 1")
    if lam0.n_actions != chars.n_actions:
        raise ValueError("action measure size does not match the action set")
    cfg = config if config is not None else GridSolverConfig()
    dt = cfg.resolve_dt(chars)
    grid = _grid if _grid is not None else Grid.from_box(chars.domain, cfg.dx)
    ops = _ops if _ops is not None else build_action_operators(chars, grid, dt)
    m = chars.n_actions
    nn = grid.n_nodes
    delta = chars.discount
    w0 = lam0.weights

    if warm_start is not None:
        v = np.array(warm_start, dtype=float)
        if v.shape != (nn, m):
            raise ValueError("warm start table has the wrong shape")
    else:
        v = np.full((nn, m), chars.value_cap)

    other_idx = [np.array([b for b in range(m) if b != a]) for a in range(m)]
    trace = []
    update = math.inf
    it = 0
    for it in range(1, cfg.max_iter + 1):
        update = 0.0
        for a in range(m):
            o = ops[a]
            base_num = o.f + o.lam * (o.quad @ v[:, a])
            flow_val = o.foot @ v[:, a]
            if m > 1:
                idx = other_idx[a]
                others = v[:, idx]
                order = np.argsort(others, axis=1)
                others_sorted = np.take_along_axis(others, order, axis=1)
                w_sorted = w0[idx][order]
            else:
                others_sorted = np.empty((nn, 0))
                w_sorted = np.empty((nn, 0))
            u = _switch_candidate(
                others_sorted, w_sorted, base_num, flow_val, o.lam, float(n),
                delta, dt,
            )
            new_col = 0.5 * v[:, a] + 0.5 * u
            update = max(update, float(np.abs(new_col - v[:, a]).max()))
            v[:, a] = new_col
        if it % 100 == 0 or update < cfg.tol:
            trace.append({"iteration": it, "update": update})
        if update < cfg.tol:
            break
    else:
        raise RuntimeError(
            f"penalized solve (n={n}) did not converge in {cfg.max_iter} "
            f"sweeps (last update {update:.3e})"
        )

    vf = GridValueFunction(grid, v, cap=chars.value_cap)
    return PenalizedGridSolution(
        n=n, values=vf, residual=update, iterations=it, dt=dt, trace=trace
    )


# ---------------------------------------------------------------------------
# maximal limit over the penalization schedule
# ---------------------------------------------------------------------------


@dataclass
class MaximalLimit:
    values: GridValueFunction  # single table: per-node min over actions
    per_action: GridValueFunction
    n_used: int
    spread_sup: float  # max over nodes of (max_a - min_a)
    schedule: list  # per-level dicts: n, iterations, residual, diff, spread
    solutions: list  # PenalizedGridSolution per level


def maximal_limit(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    config: Optional[GridSolverConfig] = None,
    n_schedule: Sequence[int] = (1, 2, 4, 8, 16, 32),
    tol: float = 1e-2,
) -> MaximalLimit:
    """Run the penalization schedule until consecutive tables stabilize.

    Each level warm-starts from the previous one (the tables decrease in
    n, so the start sits above the new fixed point and the iteration
    descends monotonically).  Stops once the sup-norm difference between
    consecutive levels drops below tol; raises if the schedule ends
    first.
    """
    sched = [int(k) for k in n_schedule]
    if len(sched) < 2 or any(b <= a for a, b in zip(sched, sched[1:])):
        raise ValueError("n_schedule must be increasing with >= 2 entries")
    cfg = config if config is not None else GridSolverConfig()
    grid = Grid.from_box(chars.domain, cfg.dx)
    ops = build_action_operators(chars, grid, cfg.resolve_dt(chars))

    rows = []
    sols = []
    prev = None
    diff = math.inf
    for n in sched:
        sol = penalized_grid_solve(
            chars, lam0, n, cfg,
            warm_start=None if prev is None else prev.values.values,
            _ops=ops, _grid=grid,
        )
        sols.append(sol)
        spread = float(sol.spread().max())
        diff = (
            math.inf
            if prev is None
            else float(np.abs(sol.values.values - prev.values.values).max())
        )
        rows.append(
            {
                "n": n,
                "iterations": sol.iterations,
                "residual": sol.residual,
                "diff_prev": diff,
                "spread": spread,
            }
        )
        prev = sol
        if diff < tol:
            break
    else:
        raise RuntimeError(
            f"penalization schedule exhausted at n={sched[-1]} with "
            f"consecutive difference {diff:.3e} >= tol {tol:g}"
        )

    table = prev.values.values
    collapsed = GridValueFunction(grid, table.min(axis=1), cap=chars.value_cap)
    return MaximalLimit(
        values=collapsed,
        per_action=prev.values,
        n_used=prev.n,
        spread_sup=float(rows[-1]["spread"]),
        schedule=rows,
        solutions=sols,
    )


# ---------------------------------------------------------------------------
# Picard / regression Monte Carlo
# ---------------------------------------------------------------------------


@dataclass
class BasisConfig:
    """Hat-function basis on a uniform node set spanning the domain box."""

    spacing: float = 0.1

    def nodes(self, chars: LocalCharacteristics) -> Array:
        if chars.dim != 1:
            raise NotImplementedError("regression basis is one-dimensional")
        lo = float(chars.domain.lo[0])
        hi = float(chars.domain.hi[0])
        k = max(2, int(round((hi - lo) / self.spacing)))
        return np.linspace(lo, hi, k + 1)


@dataclass
class PicardRun:
    n: int
    horizon: float
    k_max: int
    dt: float
    basis_nodes: Array
    tables: list  # per sweep: (n_steps + 1, n_basis, m) float32 value tables
    y0: float
    se: float
    y0_sweeps: list  # Y0 readout after each sweep
    k_increments: Array  # (n_steps,) mean compensation increment, final sweep
    x0: Array
    a0: int
    clip_count: int
    fallback_entries: int
    paths_config: SimulationConfig

    @property
    def final_table(self) -> Array:
        return self.tables[-1]

    def value_at(self, t, x) -> Array:
        """Interpolate the final sweep's table at times t, states x -> (k, m)."""
        tab = self.final_table
        step = np.clip(
            np.round(np.asarray(t, dtype=float) / self.dt).astype(np.int64),
            0,
            tab.shape[0] - 1,
        )
        x1 = np.asarray(x, dtype=float).reshape(len(step), -1)[:, 0]
        return _hat_eval(self.basis_nodes, tab, x1, step).astype(float)


def _hat_weights(nodes: Array, x: Array) -> tuple[Array, Array, Array]:
    """Left index, left weight, right weight of each x in the hat basis."""
    h = nodes[1] - nodes[0]
    xi = np.clip(x, nodes[0], nodes[-1])
    j = np.clip(((xi - nodes[0]) / h).astype(np.int64), 0, nodes.shape[0] - 2)
    frac = (xi - nodes[j]) / h
    return j, 1.0 - frac, frac


def _hat_eval(nodes: Array, tab: Array, x: Array, step: Array) -> Array:
    """Evaluate time-indexed coefficient tables at states x -> (k, m)."""
    j, wl, wr = _hat_weights(nodes, x)
    return tab[step, j] * wl[:, None] + tab[step, j + 1] * wr[:, None]


_IDENT_MASS = 4.0  # effective samples a node needs before its fit counts


def _regress_hat(
    nb: int,
    j: Array,
    wl: Array,
    wr: Array,
    a_idx: Array,
    y: Array,
    m: int,
) -> tuple[Array, Array]:
    """Per-action ridge regression of y on the hat basis.

    The normal equations are tridiagonal (hats only overlap neighbors).
    Returns (coefficients (nb, m), identified mask (nb, m)); a node is
    identified when enough sample mass sits nearby, otherwise its
    coefficient is a ridge artifact and the caller substitutes a
    fallback.
    """
    coef = np.zeros((nb, m))
    ident = np.zeros((nb, m), dtype=bool)
    for a in range(m):
        rows = a_idx == a
        jj, ll, rr = j[rows], wl[rows], wr[rows]
        yy = y[rows]
        if jj.size == 0:
            continue
        d = np.bincount(jj, weights=ll * ll, minlength=nb) + np.bincount(
            jj + 1, weights=rr * rr, minlength=nb
        )
        off = np.bincount(jj, weights=ll * rr, minlength=nb)[: nb - 1]
        b = np.bincount(jj, weights=ll * yy, minlength=nb) + np.bincount(
            jj + 1, weights=rr * yy, minlength=nb
        )
        ridge = 1e-8 * d.sum() / nb + 1e-300
        ab = np.zeros((3, nb))
        ab[0, 1:] = off
        ab[1] = d + ridge
        ab[2, :-1] = off
        coef[:, a] = solve_banded((1, 1), ab, b)
        ident[:, a] = d >= _IDENT_MASS
    return coef, ident


def _local_penalized_step(
    q: Array,  # (n_basis, m) discounted conditional expectations
    f_tab: Array,  # (n_basis, m)
    neg_mask: Array,  # (n_basis, m, m) lagged active set: v(.,b) < v(.,a)
    w0: Array,
    n_level: float,
    c_drv: float,
) -> Array:
    """Solve the action-coupled driver system at one mesh time.

    u_a = q_a + c [ f_a - sum_b w0_b (n [psi_b]^- + psi_b) ],
    psi_b = u_b - u_a, with the negative-part signs frozen from the
    previous Picard sweep so the system is linear:  n [psi]^- + psi
    becomes (1 - n 1{active}) psi.  The m x m system per basis node is
    strictly diagonally dominant for the mesh widths used here.
    """
    nb, m = q.shape
    wmat = w0[None, None, :] * (1.0 - n_level * neg_mask)
    wmat = wmat * (1.0 - np.eye(m)[None, :, :])  # psi(a, a) = 0 drops out
    row_sum = wmat.sum(axis=2)  # (nb, m)
    a_mat = c_drv * wmat
    a_mat[:, np.arange(m), np.arange(m)] = 1.0 - c_drv * row_sum
    rhs = q + c_drv * f_tab
    return np.linalg.solve(a_mat, rhs[..., None])[..., 0]


def picard_mc_solve(
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    n: int,
    horizon: float,
    x,
    a: int,
    n_paths: int,
    k_max: int = 6,
    basis: Optional[BasisConfig] = None,
    seed: int = 0,
    threads: int = 1,
    n_replicates: int = 10,
) -> PicardRun:
    """Regression Monte Carlo for the level-n penalized value on [0, T].

    Simulates reference pair paths once and stores their mesh skeleton,
    then runs Picard sweeps.  Each sweep is a backward recursion: the
    conditional expectation of the next-step value is fit by per-action
    hat-basis regression, and the stiff switching term enters through an
    active set read from the previous sweep's tables.  The first sweep
    uses the empty set, so it reproduces the action-frozen running-cost
    value; penalization bites from the second sweep on.  Sweeps stop
    early once the tables stabilize.

    Nodes without enough nearby sample mass for some action (all paths
    start at the same action, so early mesh times are always thin) fall
    back to the discounted next-step value at the node.  The standard
    error comes from recomputing the final sweep on disjoint path blocks.
    """
    if n < 1:
        raise ValueError("penalization level must be >= 1")
    if n_replicates < 2:
        raise ValueError("need at least two replicate blocks")
    bs = basis if basis is not None else BasisConfig()
    nodes = bs.nodes(chars)
    nb = nodes.shape[0]
    m = chars.n_actions
    if n_paths < 20 * nb:
        raise ValueError(
            f"need n_paths >= 20 x basis dimension = {20 * nb}, got {n_paths}"
        )
    dt = min(0.05, 0.1 / (chars.bounds.rate_sup + n * lam0.mass))
    n_steps = int(math.ceil(horizon / dt - 1e-9))
    dt = horizon / n_steps
    cfg = SimulationConfig(seed=seed, horizon=horizon, dt=dt)
    res = simulate.run_randomized(
        chars, lam0, x, a, cfg, n_paths,
        request=EngineRequest(mesh_capture=True), threads=threads,
    )
    mesh_a = res["mesh_a"].astype(np.int64)  # (n_paths, n_steps + 1)
    mesh_flat = res["mesh_x"][:, :, 0].astype(float)

    delta = chars.discount
    disc = math.exp(-delta * dt)
    c_drv = (1.0 - disc) / delta if delta > 0 else dt
    w0 = lam0.weights
    node_states = nodes[:, None]
    f_tab = np.stack(
        [
            chars.cost(node_states, np.full(nb, b, dtype=np.int64))
            for b in range(m)
        ],
        axis=1,
    )

    # interpolation stencils of every (path, step) state, computed once
    jj, wl, wr = _hat_weights(nodes, mesh_flat.ravel())
    jj = jj.reshape(mesh_flat.shape)
    wl = wl.reshape(mesh_flat.shape)
    wr = wr.reshape(mesh_flat.shape)

    cap = chars.value_cap
    clip_count = 0
    fallback_entries = 0
    thin_samples = 0
    total_samples = 0
    empty_mask = np.zeros((nb, m, m), dtype=bool)
    tables: list = []
    y0_sweeps: list = []

    def sweep(active_from: Optional[Array], path_slice: slice) -> Array:
        """One backward pass; active_from is the previous sweep's table."""
        nonlocal clip_count, fallback_entries, thin_samples, total_samples
        sl_j = jj[path_slice]
        sl_wl = wl[path_slice]
        sl_wr = wr[path_slice]
        sl_a = mesh_a[path_slice]
        tab = np.zeros((n_steps + 1, nb, m))
        u_next = np.zeros(sl_j.shape[0])
        tab_next = tab[n_steps]
        for mstep in range(n_steps - 1, -1, -1):
            coef, ident = _regress_hat(
                nb, sl_j[:, mstep], sl_wl[:, mstep], sl_wr[:, mstep],
                sl_a[:, mstep], disc * u_next, m,
            )
            total_samples += sl_j.shape[0]
            if not ident.all():
                fallback_entries += int((~ident).sum())
                # samples putting real mass on a fallback node signal thin
                # data; zero-weight neighbours and unvisited nodes do not
                jc, ac = sl_j[:, mstep], sl_a[:, mstep]
                thin_samples += int(
                    (
                        ((sl_wl[:, mstep] > 1e-9) & ~ident[jc, ac])
                        | ((sl_wr[:, mstep] > 1e-9) & ~ident[jc + 1, ac])
                    ).sum()
                )
                coef = np.where(ident, coef, disc * tab_next)
            if active_from is None:
                mask = empty_mask
            else:
                prev = active_from[mstep]  # (nb, m)
                mask = prev[:, None, :] < prev[:, :, None] - 1e-14
            u_tab = _local_penalized_step(coef, f_tab, mask, w0, float(n), c_drv)
            bad = (u_tab < -1e-9) | (u_tab > cap + 1e-9)
            clip_count += int(bad.sum())
            np.clip(u_tab, 0.0, cap, out=u_tab)
            tab[mstep] = u_tab
            tab_next = u_tab
            u_next = (
                u_tab[sl_j[:, mstep], sl_a[:, mstep]] * sl_wl[:, mstep]
                + u_tab[sl_j[:, mstep] + 1, sl_a[:, mstep]] * sl_wr[:, mstep]
            )
        return tab

    x_arr = np.asarray(x, dtype=float).reshape(1)
    t0_idx = np.array([0])
    prev_tab: Optional[Array] = None
    for _ in range(k_max):
        tab = sweep(prev_tab, slice(None))
        tables.append(tab.astype(np.float32))
        y0_sweeps.append(float(_hat_eval(nodes, tab, x_arr, t0_idx)[0, a]))
        if prev_tab is not None and float(np.abs(tab - prev_tab).max()) < 1e-10:
            prev_tab = tab
            break
        prev_tab = tab

    if thin_samples > 0.01 * total_samples:
        warnings.warn(
            f"{thin_samples / total_samples:.1%} of regression samples sat "
            "next to unidentified basis nodes; their conditional "
            "expectations fell back to held values (use more paths or a "
            "coarser basis)",
            stacklevel=2,
        )

    # replicate recomputation of the last sweep for the standard error
    lag = tables[-2].astype(float) if len(tables) >= 2 else None
    reps = []
    block = n_paths // n_replicates
    for r in range(n_replicates):
        tab_r = sweep(lag, slice(r * block, (r + 1) * block))
        reps.append(float(_hat_eval(nodes, tab_r, x_arr, t0_idx)[0, a]))
    se = float(np.std(reps, ddof=1) / math.sqrt(len(reps)))

    # pathwise compensation increments from the final table
    final = tables[-1].astype(float)
    k_inc = np.zeros(n_steps)
    for mstep in range(n_steps):
        vals = final[mstep]  # (nb, m)
        row = vals[jj[:, mstep]] * wl[:, mstep, None] + vals[
            jj[:, mstep] + 1
        ] * wr[:, mstep, None]
        own = row[np.arange(row.shape[0]), mesh_a[:, mstep]]
        neg = np.maximum(own[:, None] - row, 0.0) @ w0
        k_inc[mstep] = float(n) * float(neg.mean()) * dt

    return PicardRun(
        n=n,
        horizon=horizon,
        k_max=k_max,
        dt=dt,
        basis_nodes=nodes,
        tables=tables,
        y0=y0_sweeps[-1],
        se=se,
        y0_sweeps=y0_sweeps,
        k_increments=k_inc,
        x0=np.asarray(x, dtype=float).reshape(-1),
        a0=a,
        clip_count=clip_count,
        fallback_entries=fallback_entries,
        paths_config=cfg,
    )


# ---------------------------------------------------------------------------
# constraint violation
# ---------------------------------------------------------------------------


def constraint_violation(
    run,
    chars: LocalCharacteristics,
    lam0: ActionMeasure,
    x,
    a: int,
    horizon: float,
    n_paths: int = 20000,
    seed: int = 17,
    threads: int = 1,
) -> float:
    """Expected integrated negative part of the switching field.

    G = E int_0^T sum_b [v(X_s, b) - v(X_s, I_s)]^- lam0({b}) ds

    estimated over fresh reference pair paths, with v read from the given
    solution (stationary table for grid solves, time-indexed tables for
    Picard runs).  Zero iff switching never pays along the visited
    states; decreases along the penalization schedule.
    """
    if isinstance(run, PenalizedGridSolution):
        table = run.values

        def vtab(t, xs):
            return table(np.asarray(xs, dtype=float))

    elif isinstance(run, PicardRun):
        if horizon > run.horizon + 1e-12:
            raise ValueError("horizon exceeds the Picard run's horizon")

        def vtab(t, xs):
            return run.value_at(t, xs)

    else:
        raise TypeError("run must be a grid solution or a Picard run")

    base_dt = min(0.02, horizon / 8.0)
    steps = int(math.ceil(horizon / base_dt - 1e-9))
    dt = horizon / steps
    cfg = SimulationConfig(seed=seed, horizon=horizon, dt=dt)
    req = EngineRequest(zneg=(vtab, horizon))
    res = simulate.run_randomized(
        chars, lam0, x, a, cfg, n_paths, request=req, threads=threads
    )
    return float(res["zneg"].mean())
