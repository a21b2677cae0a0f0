"""Lockstep batch simulator (internal).

All paths of a chunk advance together on a common time grid of step ``dt``.
Inside a step, each path can experience events (jumps, thinning proposals);
the step is split at the earliest event per path and the remainder is swept
again until quiet.  Functionals of the trajectory (discounted cost, density
exponents, compensator integrals) accumulate per processed piece with
Simpson weights on the piece endpoints and midpoint, which matches the
fourth-order flow accuracy.

Randomness: path i of a run with seed s consumes uniforms from
numpy's default generator seeded with [s, i], in the chronological order of
that path's own events.  Batch shape, chunking, and thread count therefore
never change any path, and reruns are bit-identical.

Modes
  randomized  reference pair process: total hazard lambda + lam0(A) inverted
              along the flow, split state/action at the event
  control     pair process under an intensity control: state jumps by hazard
              inversion, action jumps by thinning against nu_max * lam0(A)
  primal      policy-controlled process: jumps by thinning against the
              declared rate bound
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .model import (
    ACTION_JUMP,
    STATE_JUMP,
    ActionMeasure,
    IntensityControl,
    LocalCharacteristics,
    PiecewiseOpenLoopPolicy,
)

Array = np.ndarray

MODE_RANDOMIZED = "randomized"
MODE_CONTROL = "control"
MODE_PRIMAL = "primal"

_BISECT_TOL = 1e-10  # absolute tolerance for in-step event times


class ThinningBoundError(RuntimeError):
    """Raised when the true rate exceeds the thinning bound."""


class JumpCapError(RuntimeError):
    """Raised when a path exceeds the configured jump budget."""


@dataclass
class EngineRequest:
    """What to accumulate during a run.  All optional and composable."""

    want_cost: bool = False
    density_controls: tuple[IntensityControl, ...] = ()
    compensator: Optional[tuple[Callable, float]] = None  # (test_fn, t_cap)
    zneg: Optional[tuple[Callable, float]] = None  # (vtab(t, x) -> (n, m), t_cap)
    want_t1: bool = False
    count_cap: Optional[float] = None  # horizon for jump counters
    mesh_capture: bool = False
    records: bool = False


@dataclass
class EngineParams:
    horizon: float
    dt: float
    max_jumps: int
    thinning_bound: float  # primal mode only


def _simpson(h: Array, gl: Array, gm: Array, gr: Array) -> Array:
    return (h / 6.0) * (gl + 4.0 * gm + gr)


class _Chunk:
    def __init__(
        self,
        chars: LocalCharacteristics,
        lam0: Optional[ActionMeasure],
        mode: str,
        x0: Array,
        a0: int,
        params: EngineParams,
        req: EngineRequest,
        n: int,
        offset: int,
        seed: int,
        policy: Optional[PiecewiseOpenLoopPolicy] = None,
        control: Optional[IntensityControl] = None,
    ):
        self.chars = chars
        self.lam0 = lam0
        self.mode = mode
        self.params = params
        self.req = req
        self.n = n
        self.policy = policy
        self.control = control
        self.m0 = lam0.mass if lam0 is not None else 0.0
        self.w0 = lam0.weights if lam0 is not None else None
        self.delta = chars.discount

        self.rngs = [np.random.default_rng([seed, offset + i]) for i in range(n)]
        if mode == MODE_RANDOMIZED:
            est = 3.0 * (chars.bounds.rate_sup + self.m0) * params.horizon + 8
        elif mode == MODE_CONTROL:
            cap = control.nu_max * self.m0 + chars.bounds.rate_sup
            est = 5.0 * cap * params.horizon + 12
        else:
            est = 3.0 * params.thinning_bound * params.horizon + 8
        self._k0 = int(min(max(est * 1.2, 32), 512))
        self.U = np.stack([r.random(self._k0) for r in self.rngs])
        self.cursor = np.zeros(n, dtype=np.int64)

        self.x = np.tile(np.asarray(x0, dtype=float).reshape(1, -1), (n, 1))
        self.a = np.full(n, a0, dtype=np.int64)
        self.n_jumps = np.zeros(n, dtype=np.int64)
        self.seg_t0 = np.zeros(n)
        self.seg_x0 = self.x.copy()

        if mode in (MODE_RANDOMIZED, MODE_CONTROL):
            self.xi = -np.log1p(-self._draw_all())
        if mode == MODE_CONTROL:
            if control.mass_bound is not None:
                self._seg_bound = control.mass_bound
            else:
                cap = control.nu_max * self.m0
                self._seg_bound = lambda nj: np.full(nj.shape[0], cap)
            self.prop_bound = np.asarray(self._seg_bound(self.n_jumps), dtype=float)
            if np.any(self.prop_bound <= 0.0):
                raise ValueError("control thinning bound must be positive")
            self.prop_t = -np.log1p(-self._draw_all()) / self.prop_bound
        if mode == MODE_PRIMAL:
            self.prop_t = -np.log1p(-self._draw_all()) / params.thinning_bound

        self.cost = np.zeros(n)
        self.logL = np.zeros((n, len(req.density_controls)))
        self.comp_int = np.zeros(n)
        self.comp_jump = np.zeros(n)
        self.zneg = np.zeros(n)
        self.t1_time = np.full(n, np.inf)
        self.t1_kind = np.full(n, -1, dtype=np.int64)
        self.jump_count = np.zeros(n, dtype=np.int64)
        self.action_jump_count = np.zeros(n, dtype=np.int64)
        self.records: Optional[list] = [[] for _ in range(n)] if req.records else None

        self.mesh_x = None
        self.mesh_a = None
        if req.mesh_capture:
            n_steps = int(round(params.horizon / params.dt))
            self.mesh_x = np.empty((n, n_steps + 1, chars.dim), dtype=np.float32)
            self.mesh_a = np.empty((n, n_steps + 1), dtype=np.int8)

    # -- randomness ---------------------------------------------------------

    def _refill(self):
        extra = np.stack([r.random(self._k0) for r in self.rngs])
        self.U = np.hstack([self.U, extra])

    def _draw(self, ids: Array) -> Array:
        c = self.cursor[ids]
        while c.max(initial=-1) >= self.U.shape[1]:
            self._refill()
        u = self.U[ids, c]
        self.cursor[ids] = c + 1
        return u

    def _draw_all(self) -> Array:
        return self._draw(np.arange(self.n))

    # -- flow helpers ---------------------------------------------------------

    def _rk4(self, x: Array, a: Array, h: Array) -> Array:
        hh = h[:, None]
        d = self.chars.drift
        k1 = d(x, a)
        k2 = d(x + 0.5 * hh * k1, a)
        k3 = d(x + 0.5 * hh * k2, a)
        k4 = d(x + hh * k3, a)
        return x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    def _policy_actions(self, ids: Array, t_abs: Array, x_at: Array) -> Array:
        elapsed = t_abs - self.seg_t0[ids]
        where = x_at if self.policy.feedback else self.seg_x0[ids]
        return np.asarray(
            self.policy.rule(self.n_jumps[ids], elapsed, where), dtype=np.int64
        )

    def _rk4_policy(self, ids: Array, x: Array, t0: Array, h: Array) -> Array:
        hh = h[:, None]
        d = self.chars.drift
        k1 = d(x, self._policy_actions(ids, t0, x))
        x2 = x + 0.5 * hh * k1
        k2 = d(x2, self._policy_actions(ids, t0 + 0.5 * h, x2))
        x3 = x + 0.5 * hh * k2
        k3 = d(x3, self._policy_actions(ids, t0 + 0.5 * h, x3))
        x4 = x + hh * k3
        k4 = d(x4, self._policy_actions(ids, t0 + h, x4))
        return x + (hh / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # -- accumulation ---------------------------------------------------------

    def _accumulate_piece(
        self,
        ids: Array,
        t0: Array,
        h: Array,
        xl: Array,
        xm: Array,
        xr: Array,
        al: Array,
        am: Array,
        ar: Array,
    ):
        """Simpson contributions of one flow piece [t0, t0 + h] per path."""
        if ids.size == 0:
            return
        req = self.req
        tm = t0 + 0.5 * h
        tr = t0 + h
        if req.want_cost:
            f = self.chars.cost
            gl = np.exp(-self.delta * t0) * f(xl, al)
            gm = np.exp(-self.delta * tm) * f(xm, am)
            gr = np.exp(-self.delta * tr) * f(xr, ar)
            self.cost[ids] += _simpson(h, gl, gm, gr)
        if req.density_controls:
            nj = self.n_jumps[ids]
            for j, nu in enumerate(req.density_controls):
                el = self.m0 - self.w0 @ nu.rows(t0, xl, al, nj).T
                em = self.m0 - self.w0 @ nu.rows(tm, xm, am, nj).T
                er = self.m0 - self.w0 @ nu.rows(tr, xr, ar, nj).T
                self.logL[ids, j] += _simpson(h, el, em, er)
        if req.compensator is not None:
            test_fn, cap = req.compensator
            mask = t0 < cap - 1e-12
            if np.any(mask):
                sel = ids[mask]
                self.comp_int[sel] += _simpson(
                    h[mask],
                    self._comp_rate(t0[mask], xl[mask], al[mask], test_fn),
                    self._comp_rate(tm[mask], xm[mask], am[mask], test_fn),
                    self._comp_rate(tr[mask], xr[mask], ar[mask], test_fn),
                )
        if req.zneg is not None:
            vtab, cap = req.zneg
            mask = t0 < cap - 1e-12
            if np.any(mask):
                sel = ids[mask]
                self.zneg[sel] += _simpson(
                    h[mask],
                    self._zneg_rate(t0[mask], xl[mask], al[mask], vtab),
                    self._zneg_rate(tm[mask], xm[mask], am[mask], vtab),
                    self._zneg_rate(tr[mask], xr[mask], ar[mask], vtab),
                )

    def _comp_rate(self, t: Array, x: Array, a: Array, test_fn) -> Array:
        """Integral of the test function against the predictable kernel."""
        lam = self.chars.rate(x, a)
        atoms = self.chars.kernel.atoms(x, a)
        w = self.chars.kernel.weights(x, a)
        k, j = w.shape
        t_rep = np.repeat(t, j)
        a_rep = np.repeat(a, j)
        vals = test_fn(t_rep, atoms.reshape(k * j, -1), a_rep).reshape(k, j)
        out = lam * (w * vals).sum(axis=1)
        if self.w0 is not None:
            m = self.w0.shape[0]
            t_rep = np.repeat(t, m)
            x_rep = np.repeat(x, m, axis=0)
            b_rep = np.tile(np.arange(m, dtype=np.int64), k)
            vals_b = test_fn(t_rep, x_rep, b_rep).reshape(k, m)
            out = out + vals_b @ self.w0
        return out

    def _zneg_rate(self, t: Array, x: Array, a: Array, vtab) -> Array:
        rows = vtab(t, x)  # (k, m)
        own = rows[np.arange(rows.shape[0]), a]
        return np.maximum(own[:, None] - rows, 0.0) @ self.w0

    # -- event helpers ----------------------------------------------------------

    def _hazard_coeffs(self, lam_l, lam_m, lam_r, base):
        c1 = lam_l + base
        c2 = -3.0 * lam_l + 4.0 * lam_m - lam_r
        c3 = 2.0 * lam_l - 4.0 * lam_m + 2.0 * lam_r
        return c1, c2, c3

    @staticmethod
    def _hazard_eval(s, h, c1, c2, c3):
        return s * (c1 + s * (c2 / (2.0 * h) + s * (c3 / (3.0 * h * h))))

    @staticmethod
    def _crossing_time(h, c1, c2, c3, target) -> Array:
        """Bisection for the hazard crossing inside one step."""
        q2 = c2 / (2.0 * h)
        q3 = c3 / (3.0 * h * h)
        lo = np.zeros_like(h)
        hi = h.copy()
        span = float(hi.max(initial=0.0))
        iters = max(2, math.ceil(math.log2(max(span, _BISECT_TOL) / _BISECT_TOL)))
        for _ in range(iters):
            mid = 0.5 * (lo + hi)
            low = mid * (c1 + mid * (q2 + mid * q3)) < target
            lo = np.where(low, mid, lo)
            hi = np.where(low, hi, mid)
        return 0.5 * (lo + hi)

    def _apply_jump(
        self, ids: Array, t_abs: Array, x_pre: Array, kind_state: Array,
        x_post: Array, a_post: Array,
    ):
        req = self.req
        first = self.n_jumps[ids] == 0
        if req.want_t1 and np.any(first):
            sel = ids[first]
            self.t1_time[sel] = t_abs[first]
            self.t1_kind[sel] = np.where(kind_state[first], STATE_JUMP, ACTION_JUMP)
        cap = req.count_cap if req.count_cap is not None else self.params.horizon
        counted = t_abs <= cap + 1e-12
        self.jump_count[ids[counted]] += 1
        self.action_jump_count[ids[counted & ~kind_state]] += 1
        if req.compensator is not None:
            test_fn, ccap = req.compensator
            m = t_abs <= ccap + 1e-12
            if np.any(m):
                sel = ids[m]
                self.comp_jump[sel] += test_fn(t_abs[m], x_post[m], a_post[m])
        if req.density_controls:
            act = ~kind_state
            if np.any(act):
                sel = ids[act]
                nj = self.n_jumps[sel]
                for j, nu in enumerate(req.density_controls):
                    rows = nu.rows(t_abs[act], x_pre[act], self.a[sel], nj)
                    vals = rows[np.arange(sel.size), a_post[act]]
                    with np.errstate(divide="ignore"):
                        self.logL[sel, j] += np.log(vals)
        if self.records is not None:
            kinds = np.where(kind_state, STATE_JUMP, ACTION_JUMP)
            for i in range(ids.size):
                self.records[ids[i]].append(
                    (float(t_abs[i]), x_post[i].copy(), int(a_post[i]), int(kinds[i]))
                )
        self.x[ids] = x_post
        self.a[ids] = a_post
        self.n_jumps[ids] += 1
        self.seg_t0[ids] = t_abs
        self.seg_x0[ids] = x_post
        if np.any(self.n_jumps[ids] > self.params.max_jumps):
            raise JumpCapError(
                f"a path exceeded the jump budget of {self.params.max_jumps}; "
                "check the rate bounds or raise max_jumps"
            )

    # -- interval processors ----------------------------------------------------

    def _interval_randomized(self, ids: Array, t0: Array, dt: Array):
        rate = self.chars.rate
        while ids.size:
            x0 = self.x[ids]
            a0 = self.a[ids]
            xm = self._rk4(x0, a0, 0.5 * dt)
            xr = self._rk4(xm, a0, 0.5 * dt)
            lam_l, lam_m, lam_r = rate(x0, a0), rate(xm, a0), rate(xr, a0)
            c1, c2, c3 = self._hazard_coeffs(lam_l, lam_m, lam_r, self.m0)
            dH = self._hazard_eval(dt, dt, c1, c2, c3)
            xi = self.xi[ids]
            cross = dH >= xi

            calm = ~cross
            if np.any(calm):
                sel = ids[calm]
                self._accumulate_piece(
                    sel, t0[calm], dt[calm],
                    x0[calm], xm[calm], xr[calm],
                    a0[calm], a0[calm], a0[calm],
                )
                self.xi[sel] = xi[calm] - dH[calm]
                self.x[sel] = xr[calm]

            if not np.any(cross):
                return
            ev = ids[cross]
            h_ev = dt[cross]
            s = self._crossing_time(
                h_ev, c1[cross], c2[cross], c3[cross], xi[cross]
            )
            xq = self._rk4(x0[cross], a0[cross], 0.5 * s)
            xe = self._rk4(xq, a0[cross], 0.5 * s)
            self._accumulate_piece(
                ev, t0[cross], s, x0[cross], xq, xe,
                a0[cross], a0[cross], a0[cross],
            )
            t_evt = t0[cross] + s
            lam_e = rate(xe, a0[cross])
            p_state = lam_e / (lam_e + self.m0)
            u_split = self._draw(ev)
            u_mark = self._draw(ev)
            is_state = u_split < p_state
            y = self.chars.kernel.sample(xe, a0[cross], u_mark)
            b = self.lam0.sample(u_mark)
            x_post = np.where(is_state[:, None], y, xe)
            a_post = np.where(is_state, a0[cross], b)
            self._apply_jump(ev, t_evt, xe, is_state, x_post, a_post)
            self.xi[ev] = -np.log1p(-self._draw(ev))

            rem = h_ev - s
            keep = rem > 1e-13
            ids = ev[keep]
            t0 = t_evt[keep]
            dt = rem[keep]

    def _interval_control(self, ids: Array, t0: Array, dt: Array):
        rate = self.chars.rate
        nu = self.control
        while ids.size:
            x0 = self.x[ids]
            a0 = self.a[ids]
            xm = self._rk4(x0, a0, 0.5 * dt)
            xr = self._rk4(xm, a0, 0.5 * dt)
            lam_l, lam_m, lam_r = rate(x0, a0), rate(xm, a0), rate(xr, a0)
            c1, c2, c3 = self._hazard_coeffs(lam_l, lam_m, lam_r, 0.0)
            dH = self._hazard_eval(dt, dt, c1, c2, c3)
            xi = self.xi[ids]

            s_state = np.full(ids.size, np.inf)
            cross = dH >= xi
            if np.any(cross):
                s_state[cross] = self._crossing_time(
                    dt[cross], c1[cross], c2[cross], c3[cross], xi[cross]
                )
            s_prop = self.prop_t[ids] - t0
            s_prop = np.where(s_prop <= dt + 1e-15, s_prop, np.inf)
            s_evt = np.minimum(s_state, s_prop)

            calm = ~np.isfinite(s_evt)
            if np.any(calm):
                sel = ids[calm]
                self._accumulate_piece(
                    sel, t0[calm], dt[calm],
                    x0[calm], xm[calm], xr[calm],
                    a0[calm], a0[calm], a0[calm],
                )
                self.xi[sel] = xi[calm] - dH[calm]
                self.x[sel] = xr[calm]

            hit = np.isfinite(s_evt)
            if not np.any(hit):
                return
            ev = ids[hit]
            s = np.clip(s_evt[hit], 0.0, dt[hit])
            a_ev = a0[hit]
            xq = self._rk4(x0[hit], a_ev, 0.5 * s)
            xe = self._rk4(xq, a_ev, 0.5 * s)
            self._accumulate_piece(
                ev, t0[hit], s, x0[hit], xq, xe, a_ev, a_ev, a_ev
            )
            t_evt = t0[hit] + s
            part = self._hazard_eval(s, dt[hit], c1[hit], c2[hit], c3[hit])
            self.xi[ev] = np.maximum(xi[hit] - part, 0.0)

            state_evt = s_state[hit] <= s_prop[hit]
            # state jumps: mark through the kernel, clocks restart
            if np.any(state_evt):
                sid = ev[state_evt]
                u_mark = self._draw(sid)
                y = self.chars.kernel.sample(xe[state_evt], a_ev[state_evt], u_mark)
                self._apply_jump(
                    sid, t_evt[state_evt], xe[state_evt],
                    np.ones(sid.size, dtype=bool), y, a_ev[state_evt],
                )
                self.xi[sid] = -np.log1p(-self._draw(sid))
                self.prop_bound[sid] = self._seg_bound(self.n_jumps[sid])
                self.prop_t[sid] = t_evt[state_evt] - np.log1p(
                    -self._draw(sid)
                ) / self.prop_bound[sid]
            # proposals: thin against the current segment bound
            prop = ~state_evt
            if np.any(prop):
                pid = ev[prop]
                tp = t_evt[prop]
                bnd = self.prop_bound[pid]
                rows = nu.rows(tp, xe[prop], a_ev[prop], self.n_jumps[pid])
                inten = rows * self.w0[None, :]
                total = inten.sum(axis=1)
                if np.any(total > bnd * (1.0 + 1e-9)):
                    raise ThinningBoundError(
                        "control intensity exceeds its thinning bound"
                    )
                u_acc = self._draw(pid)
                accept = u_acc * bnd < total
                if np.any(accept):
                    aid = pid[accept]
                    u_mark = self._draw(aid)
                    cum = np.cumsum(inten[accept], axis=1)
                    cum /= cum[:, -1][:, None]
                    cum[:, -1] = 1.0
                    b = (u_mark[:, None] >= cum).sum(axis=1)
                    self._apply_jump(
                        aid, tp[accept], xe[prop][accept],
                        np.zeros(aid.size, dtype=bool),
                        xe[prop][accept], b.astype(np.int64),
                    )
                    self.xi[aid] = -np.log1p(-self._draw(aid))
                    self.prop_bound[aid] = self._seg_bound(self.n_jumps[aid])
                    self.prop_t[aid] = tp[accept] - np.log1p(
                        -self._draw(aid)
                    ) / self.prop_bound[aid]
                rej = pid[~accept]
                if rej.size:
                    self.prop_t[rej] = tp[~accept] - np.log1p(
                        -self._draw(rej)
                    ) / bnd[~accept]
                # position advanced to the proposal time either way
                self.x[pid] = xe[prop]

            rem = dt[hit] - s
            keep = rem > 1e-13
            ids = ev[keep]
            t0 = t_evt[keep]
            dt = rem[keep]

    def _interval_primal(self, ids: Array, t0: Array, dt: Array):
        bound = self.params.thinning_bound
        rate = self.chars.rate
        while ids.size:
            x0 = self.x[ids]
            s_prop = self.prop_t[ids] - t0
            hit = s_prop <= dt + 1e-15

            calm = ~hit
            if np.any(calm):
                sel = ids[calm]
                h_c = dt[calm]
                tc = t0[calm]
                xm = self._rk4_policy(sel, x0[calm], tc, 0.5 * h_c)
                xr = self._rk4_policy(sel, xm, tc + 0.5 * h_c, 0.5 * h_c)
                self._accumulate_piece(
                    sel, tc, h_c, x0[calm], xm, xr,
                    self._policy_actions(sel, tc, x0[calm]),
                    self._policy_actions(sel, tc + 0.5 * h_c, xm),
                    self._policy_actions(sel, tc + h_c, xr),
                )
                self.x[sel] = xr

            if not np.any(hit):
                return
            ev = ids[hit]
            s = np.clip(s_prop[hit], 0.0, dt[hit])
            te = t0[hit]
            xq = self._rk4_policy(ev, x0[hit], te, 0.5 * s)
            xe = self._rk4_policy(ev, xq, te + 0.5 * s, 0.5 * s)
            self._accumulate_piece(
                ev, te, s, x0[hit], xq, xe,
                self._policy_actions(ev, te, x0[hit]),
                self._policy_actions(ev, te + 0.5 * s, xq),
                self._policy_actions(ev, te + s, xe),
            )
            t_evt = te + s
            a_now = self._policy_actions(ev, t_evt, xe)
            lam = rate(xe, a_now)
            if np.any(lam > bound * (1.0 + 1e-9)):
                worst = float(lam.max())
                raise ThinningBoundError(
                    f"jump rate {worst:.6g} exceeds thinning bound {bound:.6g}"
                )
            u_acc = self._draw(ev)
            accept = u_acc * bound < lam
            self.x[ev] = xe
            if np.any(accept):
                aid = ev[accept]
                u_mark = self._draw(aid)
                y = self.chars.kernel.sample(xe[accept], a_now[accept], u_mark)
                nxt = np.asarray(
                    self.policy.rule(
                        self.n_jumps[aid] + 1, np.zeros(aid.size), y
                    ),
                    dtype=np.int64,
                )
                self._apply_jump(
                    aid, t_evt[accept], xe[accept],
                    np.ones(aid.size, dtype=bool), y, nxt,
                )
            self.prop_t[ev] = t_evt - np.log1p(-self._draw(ev)) / bound

            rem = dt[hit] - s
            keep = rem > 1e-13
            ids = ev[keep]
            t0 = t_evt[keep]
            dt = rem[keep]

    # -- driver -------------------------------------------------------------

    def run(self) -> dict:
        p = self.params
        n_steps = int(round(p.horizon / p.dt))
        dt = p.horizon / n_steps
        all_ids = np.arange(self.n)
        interval = {
            MODE_RANDOMIZED: self._interval_randomized,
            MODE_CONTROL: self._interval_control,
            MODE_PRIMAL: self._interval_primal,
        }[self.mode]

        if self.req.mesh_capture:
            self.mesh_x[:, 0] = self.x
            self.mesh_a[:, 0] = self._capture_actions(0.0)
        for k in range(n_steps):
            t_k = k * dt
            interval(all_ids, np.full(self.n, t_k), np.full(self.n, dt))
            if self.req.mesh_capture:
                self.mesh_x[:, k + 1] = self.x
                self.mesh_a[:, k + 1] = self._capture_actions((k + 1) * dt)

        out = {
            "cost": self.cost,
            "n_jumps": self.jump_count,
            "action_jumps": self.action_jump_count,
            "final_x": self.x,
            "final_a": self.a,
        }
        if self.req.density_controls:
            out["logL"] = self.logL
        if self.req.compensator is not None:
            out["compensator_residual"] = self.comp_jump - self.comp_int
        if self.req.zneg is not None:
            out["zneg"] = self.zneg
        if self.req.want_t1:
            out["t1_time"] = self.t1_time
            out["t1_kind"] = self.t1_kind
        if self.req.mesh_capture:
            out["mesh_x"] = self.mesh_x
            out["mesh_a"] = self.mesh_a
        if self.records is not None:
            out["records"] = self.records
        return out

    def _capture_actions(self, t_abs: float) -> Array:
        if self.mode == MODE_PRIMAL:
            return self._policy_actions(
                np.arange(self.n), np.full(self.n, t_abs), self.x
            )
        return self.a


CHUNK_SIZE = 8192


def run_batch(
    chars: LocalCharacteristics,
    lam0: Optional[ActionMeasure],
    mode: str,
    x0: Array,
    a0: int,
    params: EngineParams,
    req: EngineRequest,
    n_paths: int,
    seed: int,
    threads: int = 1,
    policy: Optional[PiecewiseOpenLoopPolicy] = None,
    control: Optional[IntensityControl] = None,
) -> dict:
    """Run n_paths in fixed-size chunks and merge results in chunk order.

    The chunk decomposition is independent of ``threads``; workers only farm
    out the chunks, so any thread count reproduces the same output arrays.
    """
    starts = list(range(0, n_paths, CHUNK_SIZE))

    def one(off: int) -> dict:
        n = min(CHUNK_SIZE, n_paths - off)
        return _Chunk(
            chars, lam0, mode, x0, a0, params, req, n, off, seed,
            policy=policy, control=control,
        ).run()

    if threads > 1 and len(starts) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, starts))
    else:
        parts = [one(off) for off in starts]

    merged: dict = {}
    for key in parts[0]:
        if key == "records":
            rec: list = []
            for p in parts:
                rec.extend(p[key])
            merged[key] = rec
        else:
            merged[key] = np.concatenate([p[key] for p in parts], axis=0)
    return merged
