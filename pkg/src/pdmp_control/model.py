"""Problem data for controlled piecewise deterministic processes.

A control problem is described by its local characteristics: a drift field
h(x, a) driving the deterministic flow between jumps, a state-dependent jump
rate lambda(x, a), a post-jump transition kernel Q(x, a, dy), a running cost
f(x, a), and a discount delta > 0.  Actions form a finite ordered set; every
callable below takes the action as an integer index into that set, with the
embedded numeric coordinate available through ``ActionSet.coords``.

All characteristic callables are vectorized: they accept a state batch of
shape (n, dim) together with an action-index batch of shape (n,) and return
per-row values.  Scalar convenience wrappers are provided where useful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

Array = np.ndarray

# Kernel quadrature weights must sum to one within this slack.
KERNEL_NORM_TOL = 1e-12


def _as_state_batch(x, dim: int) -> tuple[Array, bool]:
    """Coerce x to shape (n, dim).  Returns (batch, was_scalar)."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 0:
        if dim != 1:
            raise ValueError(f"scalar state given for dim={dim}")
        return arr.reshape(1, 1), True
    if arr.ndim == 1:
        if arr.shape[0] == dim:
            return arr.reshape(1, dim), True
        if dim == 1:
            return arr.reshape(-1, 1), False
        raise ValueError(f"state shape {arr.shape} incompatible with dim={dim}")
    if arr.ndim == 2 and arr.shape[1] == dim:
        return arr, False
    raise ValueError(f"state shape {arr.shape} incompatible with dim={dim}")


@dataclass(frozen=True)
class Box:
    """Axis-aligned open box (lo_i, hi_i) serving as the state domain E."""

    lo: Array
    hi: Array

    def __post_init__(self):
        lo = np.atleast_1d(np.asarray(self.lo, dtype=float))
        hi = np.atleast_1d(np.asarray(self.hi, dtype=float))
        if lo.shape != hi.shape or not np.all(lo < hi):
            raise ValueError("box needs lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def contains(self, x: Array, slack: float = 0.0) -> Array:
        xb, _ = _as_state_batch(x, self.dim)
        return np.all((xb >= self.lo - slack) & (xb <= self.hi + slack), axis=1)

    def clamp(self, x: Array) -> Array:
        xb, scalar = _as_state_batch(x, self.dim)
        out = np.clip(xb, self.lo, self.hi)
        return out[0] if scalar else out

    def sample(self, rng: np.random.Generator, n: int) -> Array:
        u = rng.random((n, self.dim))
        return self.lo + u * (self.hi - self.lo)


@dataclass(frozen=True)
class ActionSet:
    """Finite ordered action set with embedded numeric coordinates."""

    coords: Array  # shape (m,), the numeric value fed to formulas
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        coords = np.atleast_1d(np.asarray(self.coords, dtype=float))
        object.__setattr__(self, "coords", coords)
        if not self.labels:
            object.__setattr__(
                self, "labels", tuple(f"a{i}" for i in range(coords.shape[0]))
            )
        if len(self.labels) != coords.shape[0]:
            raise ValueError("labels and coords length mismatch")

    def __len__(self) -> int:
        return int(self.coords.shape[0])


@dataclass(frozen=True)
class Bounds:
    """Bounds entering the standing assumptions.

    drift_sup:  sup |h|           (M_h)
    drift_lip:  Lipschitz constant of h in x at fixed action (L_h)
    rate_sup:   sup lambda        (Lambda_max)
    cost_sup:   sup f             (M_f)
    """

    drift_sup: float
    drift_lip: float
    rate_sup: float
    cost_sup: float


class TransitionKernel:
    """Post-jump kernel Q(x, a, dy) given by a finite quadrature.

    atoms_fn(x, a_idx)   -> (n, n_atoms, dim) support points
    weights_fn(x, a_idx) -> (n, n_atoms) probability weights, rows sum to 1

    The sampler draws one atom per row from the categorical distribution
    defined by the weights, so Monte Carlo passes and grid quadrature see
    the same measure by construction.
    """

    def __init__(self, atoms_fn: Callable, weights_fn: Callable, n_atoms: int):
        self._atoms_fn = atoms_fn
        self._weights_fn = weights_fn
        self.n_atoms = int(n_atoms)

    def atoms(self, x: Array, a_idx: Array) -> Array:
        return self._atoms_fn(x, a_idx)

    def weights(self, x: Array, a_idx: Array) -> Array:
        return self._weights_fn(x, a_idx)

    def sample(self, x: Array, a_idx: Array, u: Array) -> Array:
        """Map uniforms u in [0,1) to atoms via the cumulative weights."""
        atoms = self.atoms(x, a_idx)
        w = self.weights(x, a_idx)
        cum = np.cumsum(w, axis=1)
        # guard the last column against rounding so u < 1 always lands
        cum[:, -1] = 1.0
        pick = (u[:, None] >= cum).sum(axis=1)
        rows = np.arange(atoms.shape[0])
        return atoms[rows, pick]


@dataclass(frozen=True)
class LocalCharacteristics:
    """Complete description of one controlled problem instance."""

    dim: int
    domain: Box
    actions: ActionSet
    drift: Callable  # (x (n,d), a_idx (n,)) -> (n,d)
    rate: Callable  # (x (n,d), a_idx (n,)) -> (n,)
    kernel: TransitionKernel
    cost: Callable  # (x (n,d), a_idx (n,)) -> (n,)
    discount: float
    bounds: Bounds

    def __post_init__(self):
        if self.discount <= 0:
            raise ValueError("discount must be positive")
        if self.domain.dim != self.dim:
            raise ValueError("domain dimension mismatch")

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def value_cap(self) -> float:
        """Upper bound M_f / delta on any value function of this problem."""
        return self.bounds.cost_sup / self.discount

    # -- scalar conveniences -------------------------------------------------

    def drift_at(self, x, a_idx: int) -> Array:
        xb, _ = _as_state_batch(x, self.dim)
        return self.drift(xb, np.full(xb.shape[0], a_idx, dtype=np.int64))[0]

    def rate_at(self, x, a_idx: int) -> float:
        xb, _ = _as_state_batch(x, self.dim)
        return float(self.rate(xb, np.full(xb.shape[0], a_idx, dtype=np.int64))[0])

    def cost_at(self, x, a_idx: int) -> float:
        xb, _ = _as_state_batch(x, self.dim)
        return float(self.cost(xb, np.full(xb.shape[0], a_idx, dtype=np.int64))[0])


@dataclass(frozen=True)
class ActionMeasure:
    """Finite measure lambda_0 on the action set, full support required."""

    weights: Array  # per-action mass, all > 0

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        if np.any(w <= 0):
            raise ValueError("action measure needs strictly positive weights")
        object.__setattr__(self, "weights", w)

    @property
    def mass(self) -> float:
        return float(self.weights.sum())

    @property
    def n_actions(self) -> int:
        return int(self.weights.shape[0])

    def scaled(self, factor: float) -> "ActionMeasure":
        if factor <= 0:
            raise ValueError("scale factor must be positive")
        return ActionMeasure(self.weights * factor)

    def sample(self, u: Array) -> Array:
        """Uniforms -> action indices, proportional to the weights."""
        cum = np.cumsum(self.weights) / self.mass
        cum[-1] = 1.0
        return np.searchsorted(cum, u, side="right")


# jump record kinds
STATE_JUMP = 0
ACTION_JUMP = 1


@dataclass(frozen=True)
class MarkedPointPath:
    """One realized trajectory of the marked point process.

    Records hold the jump times T_n (strictly increasing), post-jump states
    E_n, post-jump action indices A_n, and the jump kind (state jump through
    the kernel vs. action resampling).  ``start_action`` is None for paths of
    the primal process, where the action comes from a policy instead.
    """

    start_state: Array
    start_action: Optional[int]
    times: Array
    states: Array  # (k, dim)
    actions: Array  # (k,) int, -1 where not applicable
    kinds: Array  # (k,) int, STATE_JUMP or ACTION_JUMP
    horizon: float

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        if t.ndim != 1:
            raise ValueError("times must be a 1-d array")
        if t.size and (np.any(np.diff(t) <= 0) or t[0] <= 0):
            raise ValueError("jump times must be strictly increasing and positive")
        if t.size and t[-1] > self.horizon:
            raise ValueError("jump beyond the horizon")

    @property
    def n_jumps(self) -> int:
        return int(self.times.shape[0])

    def segment_starts(self) -> tuple[Array, Array, Array]:
        """(start times, start states, start action indices) per segment."""
        t0 = np.concatenate(([0.0], self.times))
        x0 = np.vstack([np.atleast_2d(self.start_state), np.atleast_2d(self.states)]) \
            if self.n_jumps else np.atleast_2d(self.start_state)
        a0 = np.concatenate(
            ([-1 if self.start_action is None else self.start_action], self.actions)
        )
        return t0, x0, a0


class PiecewiseOpenLoopPolicy:
    """Piecewise open-loop control for the primal process.

    The policy restarts at every jump: on the n-th inter-jump interval the
    action is rule(n, elapsed, post_jump_state), a deterministic function of
    the time since the last jump and the state reached by it.  ``rule`` must
    be vectorized over equal-length batches.

    With feedback=True the third argument is instead the current flow
    position, so stationary feedback laws (greedy policies read off a value
    table) can be simulated without reconstructing the flow per call.
    """

    def __init__(self, rule: Callable, name: str = "policy", feedback: bool = False):
        self.rule = rule
        self.name = name
        self.feedback = bool(feedback)

    def action_at(self, n: int, elapsed: float, state) -> int:
        s = np.atleast_2d(np.asarray(state, dtype=float))
        out = self.rule(
            np.array([n], dtype=np.int64),
            np.array([elapsed], dtype=float),
            s,
        )
        return int(np.asarray(out).ravel()[0])

    @staticmethod
    def constant(a_idx: int, name: str | None = None) -> "PiecewiseOpenLoopPolicy":
        def rule(n, elapsed, state):
            return np.full(np.asarray(elapsed).shape[0], a_idx, dtype=np.int64)

        return PiecewiseOpenLoopPolicy(rule, name or f"const[{a_idx}]")


class IntensityControl:
    """Predictable intensity control for the dual problem.

    The control reweights the action-resampling channel: under it the pair
    process changes action at rate nu_t(b) * lambda_0({b}) instead of
    lambda_0({b}).  Controls used by the samplers must expose ``rows``:

        rows(t (n,), x (n,dim), a_idx (n,), n_jumps (n,)) -> (n, m)

    giving the intensity against every target action.  This covers constant,
    time-varying, and feedback controls; fully history-dependent pieces can
    be attached through ``pieces`` for path-wise evaluation.
    """

    def __init__(
        self,
        rows: Callable,
        nu_min: float,
        nu_max: float,
        name: str = "nu",
        pieces: Optional[Sequence[Callable]] = None,
        allow_zero: bool = False,
        mass_bound: Optional[Callable] = None,
    ):
        if nu_max < nu_min or nu_min < 0 or (nu_min == 0 and not allow_zero):
            raise ValueError("need 0 < nu_min <= nu_max (zero only when allowed)")
        self._rows = rows
        self.nu_min = float(nu_min)
        self.nu_max = float(nu_max)
        self.name = name
        self.pieces = tuple(pieces) if pieces is not None else None
        self.allow_zero = bool(allow_zero)
        # optional sharper thinning bound: n_jumps (k,) -> bound on the
        # total controlled action intensity sum_b nu(b) lam0({b}) over the
        # segment with that jump count.  None means nu_max * lam0(A).
        self.mass_bound = mass_bound

    def rows(self, t: Array, x: Array, a_idx: Array, n_jumps: Array) -> Array:
        out = np.asarray(self._rows(t, x, a_idx, n_jumps), dtype=float)
        return out

    def value(self, t: float, x, a_idx: int, n_jumps: int, b_idx: int) -> float:
        xb = np.atleast_2d(np.asarray(x, dtype=float))
        r = self.rows(
            np.array([t]),
            xb,
            np.array([a_idx], dtype=np.int64),
            np.array([n_jumps], dtype=np.int64),
        )
        return float(r[0, b_idx])

    @staticmethod
    def constant(level: float, n_actions: int, name: str | None = None) -> "IntensityControl":
        if level <= 0:
            raise ValueError("constant control must be positive")

        def rows(t, x, a_idx, n_jumps):
            return np.full((np.asarray(t).shape[0], n_actions), level)

        return IntensityControl(rows, level, level, name or f"const[{level}]")


@dataclass(frozen=True)
class Grid:
    """Uniform tensor-product lattice over (the closure of) the domain box."""

    axes: tuple[Array, ...]

    def __post_init__(self):
        axes = tuple(np.asarray(ax, dtype=float) for ax in self.axes)
        for ax in axes:
            if ax.ndim != 1 or ax.shape[0] < 2 or np.any(np.diff(ax) <= 0):
                raise ValueError("each grid axis needs >= 2 increasing nodes")
        object.__setattr__(self, "axes", axes)

    @property
    def dim(self) -> int:
        return len(self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(ax.shape[0] for ax in self.axes)

    @property
    def n_nodes(self) -> int:
        return int(np.prod(self.shape))

    def nodes(self) -> Array:
        """All lattice nodes, shape (n_nodes, dim), last axis fastest."""
        mesh = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    @staticmethod
    def from_box(box: Box, dx: float) -> "Grid":
        axes = []
        for lo, hi in zip(box.lo, box.hi):
            n = int(round((hi - lo) / dx))
            if not np.isclose(lo + n * dx, hi, atol=1e-9):
                n = int(np.ceil((hi - lo) / dx))
            axes.append(lo + dx * np.arange(n + 1))
            axes[-1][-1] = hi
        return Grid(tuple(axes))

    def interp_weights(self, x: Array) -> tuple[Array, Array, int]:
        """Multilinear interpolation stencil for a state batch.

        Query points outside the lattice hull are clamped onto it; the count
        of clamped rows is returned so callers can track boundary activity.
        Returns (flat indices (n, 2^d), weights (n, 2^d), n_clamped).
        """
        xb, _ = _as_state_batch(x, self.dim)
        n = xb.shape[0]
        lo = np.array([ax[0] for ax in self.axes])
        hi = np.array([ax[-1] for ax in self.axes])
        clamped = ~np.all((xb >= lo) & (xb <= hi), axis=1)
        xq = np.clip(xb, lo, hi)

        idx0 = np.empty((n, self.dim), dtype=np.int64)
        frac = np.empty((n, self.dim))
        for k, ax in enumerate(self.axes):
            j = np.searchsorted(ax, xq[:, k], side="right") - 1
            j = np.clip(j, 0, ax.shape[0] - 2)
            idx0[:, k] = j
            frac[:, k] = (xq[:, k] - ax[j]) / (ax[j + 1] - ax[j])

        strides = np.ones(self.dim, dtype=np.int64)
        for k in range(self.dim - 2, -1, -1):
            strides[k] = strides[k + 1] * self.shape[k + 1]

        n_corners = 1 << self.dim
        flat = np.empty((n, n_corners), dtype=np.int64)
        w = np.empty((n, n_corners))
        for c in range(n_corners):
            bits = [(c >> k) & 1 for k in range(self.dim)]
            off = sum(bits[k] * strides[k] for k in range(self.dim))
            flat[:, c] = (idx0 * strides).sum(axis=1) + off
            wc = np.ones(n)
            for k in range(self.dim):
                wc = wc * (frac[:, k] if bits[k] else 1.0 - frac[:, k])
            w[:, c] = wc
        return flat, w, int(clamped.sum())

    def interpolate(self, values: Array, x: Array) -> Array:
        flat, w, _ = self.interp_weights(x)
        vals = np.asarray(values).reshape(self.n_nodes, -1)
        out = np.einsum("nc,nck->nk", w, vals[flat])
        return out[:, 0] if out.shape[1] == 1 else out


@dataclass
class GridValueFunction:
    """Value table on a lattice, one scalar per node or per (node, action).

    ``cap`` is the a priori bound M_f / delta; ``clamp_count`` records how
    many entries had to be projected into [0, cap] (must stay zero for
    converged solver output).
    """

    grid: Grid
    values: Array
    cap: float
    clamp_count: int = 0

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape[0] != self.grid.n_nodes:
            raise ValueError("value table does not match the grid")
        self.values = v

    @property
    def per_action(self) -> bool:
        return self.values.ndim == 2

    def enforce_bounds(self, slack: float = 1e-10) -> None:
        lo_bad = self.values < -slack
        hi_bad = self.values > self.cap + slack
        self.clamp_count += int(lo_bad.sum() + hi_bad.sum())
        np.clip(self.values, 0.0, self.cap, out=self.values)

    def __call__(self, x: Array, a_idx: Optional[int] = None) -> Array:
        vals = self.values if a_idx is None else self.values[:, a_idx]
        return self.grid.interpolate(vals, x)


# ---------------------------------------------------------------------------
# hypothesis checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class HypothesisCheck:
    name: str
    passed: bool
    measured: float
    bound: float
    detail: str = ""


@dataclass(frozen=True)
class HypothesisReport:
    checks: tuple[HypothesisCheck, ...]

    @property
    def all_passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def __str__(self) -> str:
        lines = []
        for c in self.checks:
            tag = "ok  " if c.passed else "FAIL"
            lines.append(
                f"[{tag}] {c.name}: measured {c.measured:.6g} vs bound {c.bound:.6g}"
                + (f" ({c.detail})" if c.detail else "")
            )
        return "\n".join(lines)


def validate_hypotheses(
    chars: LocalCharacteristics, probes: int = 2000, seed: int = 0
) -> HypothesisReport:
    """Spot-check the standing assumptions on random probe points.

    Draws probe states uniformly from the domain and random action indices,
    then verifies the declared bounds: |h| <= M_h, the x-Lipschitz constant
    of h at fixed action, lambda <= Lambda_max, 0 <= f <= M_f, and kernel
    quadrature row normalization.  Badly normalized kernels raise; bound
    violations are reported per hypothesis.
    """
    rng = np.random.default_rng(seed)
    m = chars.n_actions
    x = chars.domain.sample(rng, probes)
    a = rng.integers(0, m, probes)

    h = chars.drift(x, a)
    lam = chars.rate(x, a)
    f = chars.cost(x, a)
    w = chars.kernel.weights(x, a)
    atoms = chars.kernel.atoms(x, a)

    norm_err = float(np.abs(w.sum(axis=1) - 1.0).max())
    if norm_err > KERNEL_NORM_TOL:
        raise ValueError(
            f"kernel quadrature weights off normalization by {norm_err:.3e}"
        )
    if np.any(w < -KERNEL_NORM_TOL):
        raise ValueError("kernel quadrature weights must be nonnegative")

    # second probe set at the same actions for the Lipschitz estimate
    x2 = chars.domain.sample(rng, probes)
    h2 = chars.drift(x2, a)
    dx = np.linalg.norm(x - x2, axis=1)
    keep = dx > 1e-9
    lip = np.zeros(probes)
    lip[keep] = np.linalg.norm(h[keep] - h2[keep], axis=1) / dx[keep]

    b = chars.bounds
    checks = [
        HypothesisCheck(
            "drift bounded", float(np.abs(h).max()) <= b.drift_sup + 1e-9,
            float(np.abs(h).max()), b.drift_sup,
        ),
        HypothesisCheck(
            "drift Lipschitz in x", float(lip.max()) <= b.drift_lip + 1e-9,
            float(lip.max()), b.drift_lip, "secant estimate",
        ),
        HypothesisCheck(
            "rate bounded", float(lam.max()) <= b.rate_sup + 1e-9,
            float(lam.max()), b.rate_sup,
        ),
        HypothesisCheck(
            "rate nonnegative", float(lam.min()) >= -1e-12, float(lam.min()), 0.0,
        ),
        HypothesisCheck(
            "cost bounded", float(f.max()) <= b.cost_sup + 1e-9,
            float(f.max()), b.cost_sup,
        ),
        HypothesisCheck(
            "cost nonnegative", float(f.min()) >= -1e-12, float(f.min()), 0.0,
        ),
        HypothesisCheck(
            "kernel atoms inside domain",
            bool(np.all(chars.domain.contains(atoms.reshape(-1, chars.dim), slack=1e-9))),
            0.0, 0.0, "all quadrature atoms within the box",
        ),
        HypothesisCheck(
            "kernel weights normalized", True, norm_err, KERNEL_NORM_TOL,
        ),
    ]
    return HypothesisReport(tuple(checks))


def builtin_benchmark(name: str):
    """Look up one of the packaged benchmark problems by name."""
    from . import benchmarks

    return benchmarks.get(name)
