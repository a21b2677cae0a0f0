"""Command line interface, configuration, and the acceptance suite.

The CLI drives every solver in the package from an INI-style config plus
a handful of flags.  Each subcommand writes CSV tables (12 significant
digits, byte-reproducible under a fixed seed) and JSON traces into the
output directory and prints a one line summary.  `all` runs the full
acceptance suite, the same checks the test suite enforces.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import benchmarks, simulate
from ._engine import EngineRequest
from .bsde import (
    BasisConfig,
    constraint_violation,
    maximal_limit,
    penalized_grid_solve,
    picard_mc_solve,
)
from .girsanov import (
    a_shift_experiment,
    dual_battery_reweighted,
    dual_cost_direct,
    zsign_bang_bang,
)
from .hjb import GridSolverConfig, build_action_operators, solve_hjb
from .model import (
    ActionMeasure,
    Grid,
    IntensityControl,
    PiecewiseOpenLoopPolicy,
    validate_hypotheses,
)
from .simulate import SimulationConfig, mean_and_se

Array = np.ndarray


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------


class ConfigError(ValueError):
    """Raised for malformed run configuration; message names the key path."""


_SCHEMA = {
    "problem": (
        "name", "horizon", "discount", "lam0_scale", "action_weights",
        "x0", "a0",
    ),
    "grid": ("dx", "dt", "tol", "max_iter"),
    "bsde": (
        "n_schedule", "limit_tol", "basis_spacing", "k_max",
        "picard_n", "picard_horizon",
    ),
    "mc": ("n_paths", "dt", "seed", "threads"),
    "dual": ("nus", "nu_min", "eps", "target_a", "start_a"),
    "output": ("dir",),
}

_REQUIRED = (("problem", "name"),)


@dataclass
class RunSettings:
    """Fully resolved and validated run description."""

    problem: str = ""
    horizon: float = 20.0
    discount: Optional[float] = None
    lam0_scale: Optional[float] = None
    action_weights: Optional[tuple] = None
    x0: Optional[float] = None
    a0: Optional[int] = None
    dx: float = 0.05
    grid_dt: Optional[float] = None
    grid_tol: float = 1e-9
    max_iter: int = 200_000
    n_schedule: tuple = (1, 2, 4, 8, 16, 32)
    limit_tol: float = 1e-2
    basis_spacing: float = 0.1
    k_max: int = 6
    picard_n: int = 4
    picard_horizon: float = 6.0
    n_paths: int = 20_000
    mc_dt: float = 0.02
    seed: int = 0
    threads: int = 1
    nus: tuple = (0.75, 0.9, 1.0, 1.1, 1.25)
    nu_min: float = 1e-3
    eps: tuple = (0.2, 0.1, 0.05, 0.025)
    target_a: Optional[int] = None
    start_a: Optional[int] = None
    out_dir: str = "out"

    def grid_config(self) -> GridSolverConfig:
        return GridSolverConfig(
            dx=self.dx, dt=self.grid_dt, tol=self.grid_tol,
            max_iter=self.max_iter,
        )


def _parse_float(section: str, key: str, raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: could not parse {raw!r} as a number")


def _parse_int(section: str, key: str, raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{section}.{key}: could not parse {raw!r} as an integer")


def _parse_list(section: str, key: str, raw: str, conv) -> tuple:
    try:
        return tuple(conv(tok.strip()) for tok in raw.split(",") if tok.strip())
    except ValueError:
        raise ConfigError(f"{section}.{key}: could not parse {raw!r} as a list")


def load_config(path) -> RunSettings:
    """Read, default, and validate an INI run description.

    Unknown sections or keys are rejected with their full key path;
    missing required keys are reported all at once.
    """
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {p}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str.lower
    try:
        parser.read_string(p.read_text())
    except configparser.Error as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc

    unknown = []
    for section in parser.sections():
        if section not in _SCHEMA:
            unknown.append(f"[{section}]")
            continue
        for key in parser[section]:
            if key not in _SCHEMA[section]:
                unknown.append(f"{section}.{key}")
    if unknown:
        raise ConfigError("unknown config keys: " + ", ".join(sorted(unknown)))

    missing = [
        f"{sec}.{key}"
        for sec, key in _REQUIRED
        if not parser.get(sec, key, fallback="").strip()
    ]
    if missing:
        raise ConfigError("missing required keys: " + ", ".join(missing))

    def get(section: str, key: str) -> str:
        return parser.get(section, key, fallback="").strip()

    s = RunSettings()
    s.problem = get("problem", "name")
    if get("problem", "horizon"):
        s.horizon = _parse_float("problem", "horizon", get("problem", "horizon"))
    if get("problem", "discount"):
        s.discount = _parse_float("problem", "discount", get("problem", "discount"))
    if get("problem", "lam0_scale"):
        s.lam0_scale = _parse_float("problem", "lam0_scale", get("problem", "lam0_scale"))
    if get("problem", "action_weights"):
        s.action_weights = _parse_list(
            "problem", "action_weights", get("problem", "action_weights"), float
        )
    if get("problem", "x0"):
        s.x0 = _parse_float("problem", "x0", get("problem", "x0"))
    if get("problem", "a0"):
        s.a0 = _parse_int("problem", "a0", get("problem", "a0"))
    if get("grid", "dx"):
        s.dx = _parse_float("grid", "dx", get("grid", "dx"))
    if get("grid", "dt"):
        s.grid_dt = _parse_float("grid", "dt", get("grid", "dt"))
    if get("grid", "tol"):
        s.grid_tol = _parse_float("grid", "tol", get("grid", "tol"))
    if get("grid", "max_iter"):
        s.max_iter = _parse_int("grid", "max_iter", get("grid", "max_iter"))
    if get("bsde", "n_schedule"):
        s.n_schedule = _parse_list("bsde", "n_schedule", get("bsde", "n_schedule"), int)
    if get("bsde", "limit_tol"):
        s.limit_tol = _parse_float("bsde", "limit_tol", get("bsde", "limit_tol"))
    if get("bsde", "basis_spacing"):
        s.basis_spacing = _parse_float("bsde", "basis_spacing", get("bsde", "basis_spacing"))
    if get("bsde", "k_max"):
        s.k_max = _parse_int("bsde", "k_max", get("bsde", "k_max"))
    if get("bsde", "picard_n"):
        s.picard_n = _parse_int("bsde", "picard_n", get("bsde", "picard_n"))
    if get("bsde", "picard_horizon"):
        s.picard_horizon = _parse_float("bsde", "picard_horizon", get("bsde", "picard_horizon"))
    if get("mc", "n_paths"):
        s.n_paths = _parse_int("mc", "n_paths", get("mc", "n_paths"))
    if get("mc", "dt"):
        s.mc_dt = _parse_float("mc", "dt", get("mc", "dt"))
    if get("mc", "seed"):
        s.seed = _parse_int("mc", "seed", get("mc", "seed"))
    if get("mc", "threads"):
        s.threads = _parse_int("mc", "threads", get("mc", "threads"))
    if get("dual", "nus"):
        s.nus = _parse_list("dual", "nus", get("dual", "nus"), float)
    if get("dual", "nu_min"):
        s.nu_min = _parse_float("dual", "nu_min", get("dual", "nu_min"))
    if get("dual", "eps"):
        s.eps = _parse_list("dual", "eps", get("dual", "eps"), float)
    if get("dual", "target_a"):
        s.target_a = _parse_int("dual", "target_a", get("dual", "target_a"))
    if get("dual", "start_a"):
        s.start_a = _parse_int("dual", "start_a", get("dual", "start_a"))
    if get("output", "dir"):
        s.out_dir = get("output", "dir")

    validate_settings(s)
    return s


def validate_settings(s: RunSettings) -> None:
    if s.discount is not None and s.discount <= 0:
        raise ConfigError("problem.discount: discount must be positive")
    if s.lam0_scale is not None and s.lam0_scale <= 0:
        raise ConfigError("problem.lam0_scale: scale must be positive")
    if s.action_weights is not None and any(w <= 0 for w in s.action_weights):
        raise ConfigError(
            "problem.action_weights: action weights must be positive "
            "(the switching measure needs full support)"
        )
    if s.horizon <= 0:
        raise ConfigError("problem.horizon: horizon must be positive")
    if s.dx <= 0:
        raise ConfigError("grid.dx: spacing must be positive")
    if s.grid_tol <= 0:
        raise ConfigError("grid.tol: tolerance must be positive")
    if s.max_iter < 1:
        raise ConfigError("grid.max_iter: need at least one iteration")
    if (
        len(s.n_schedule) < 2
        or any(n < 1 for n in s.n_schedule)
        or any(b <= a for a, b in zip(s.n_schedule, s.n_schedule[1:]))
    ):
        raise ConfigError(
            "bsde.n_schedule: need an increasing list of positive levels"
        )
    if s.n_paths < 1:
        raise ConfigError("mc.n_paths: need at least one path")
    if s.mc_dt <= 0:
        raise ConfigError("mc.dt: step must be positive")
    if s.threads < 1:
        raise ConfigError("mc.threads: need at least one thread")
    if s.seed < 0:
        raise ConfigError("mc.seed: seed must be nonnegative")
    if not s.nus or any(v <= 0 for v in s.nus):
        raise ConfigError("dual.nus: constant controls must be positive")
    if s.nu_min <= 0:
        raise ConfigError("dual.nu_min: floor must be positive")
    if not s.eps or any(e <= 0 for e in s.eps):
        raise ConfigError("dual.eps: shift widths must be positive")


@dataclass
class RunContext:
    """A benchmark problem with every override applied, ready to solve."""

    settings: RunSettings
    bench: benchmarks.Benchmark
    out_dir: Path

    @property
    def chars(self):
        return self.bench.chars

    @property
    def lam0(self) -> ActionMeasure:
        return self.bench.action_measure

    @property
    def x0(self) -> Array:
        return self.bench.x0

    @property
    def a0(self) -> int:
        return self.bench.a0

    def sim_config(self, seed_offset: int = 0) -> SimulationConfig:
        return SimulationConfig(
            seed=self.settings.seed + seed_offset,
            horizon=self.settings.horizon,
            dt=self.settings.mc_dt,
        )


def resolve_run(settings: RunSettings) -> RunContext:
    if not settings.problem:
        raise ConfigError("missing required keys: problem.name")
    try:
        bench = benchmarks.get(settings.problem)
    except KeyError as exc:
        raise ConfigError(f"problem.name: {exc.args[0]}") from exc
    bench = benchmarks.with_overrides(
        bench, discount=settings.discount, lam0_scale=settings.lam0_scale
    )
    if settings.action_weights is not None:
        if len(settings.action_weights) != bench.chars.n_actions:
            raise ConfigError(
                f"problem.action_weights: expected {bench.chars.n_actions} "
                f"entries, got {len(settings.action_weights)}"
            )
        bench = benchmarks.Benchmark(
            name=bench.name,
            chars=bench.chars,
            action_measure=ActionMeasure(np.asarray(settings.action_weights)),
            x0=bench.x0,
            a0=bench.a0,
            horizon=bench.horizon,
            notes=bench.notes,
        )
    x0 = bench.x0 if settings.x0 is None else np.array([settings.x0])
    if not bool(bench.chars.domain.contains(x0.reshape(1, -1))[0]):
        raise ConfigError("problem.x0: start state outside the domain box")
    a0 = bench.a0 if settings.a0 is None else settings.a0
    if not 0 <= a0 < bench.chars.n_actions:
        raise ConfigError(
            f"problem.a0: action index out of range [0, {bench.chars.n_actions})"
        )
    bench = benchmarks.Benchmark(
        name=bench.name,
        chars=bench.chars,
        action_measure=bench.action_measure,
        x0=x0,
        a0=a0,
        horizon=settings.horizon,
        notes=bench.notes,
    )
    out_dir = Path(settings.out_dir)
    return RunContext(settings=settings, bench=bench, out_dir=out_dir)


def echo_config(settings: RunSettings, path: Path) -> None:
    """Write the fully resolved configuration next to the outputs."""
    s = settings

    def fmt(v) -> str:
        if v is None:
            return ""
        if isinstance(v, tuple):
            return ",".join(fmt(u) for u in v)
        if isinstance(v, float):
            return format(v, ".12g")
        return str(v)

    doc = {
        "problem": {
            "name": s.problem, "horizon": fmt(s.horizon),
            "discount": fmt(s.discount), "lam0_scale": fmt(s.lam0_scale),
            "action_weights": fmt(s.action_weights), "x0": fmt(s.x0),
            "a0": fmt(s.a0),
        },
        "grid": {
            "dx": fmt(s.dx), "dt": fmt(s.grid_dt), "tol": fmt(s.grid_tol),
            "max_iter": fmt(s.max_iter),
        },
        "bsde": {
            "n_schedule": fmt(s.n_schedule), "limit_tol": fmt(s.limit_tol),
            "basis_spacing": fmt(s.basis_spacing), "k_max": fmt(s.k_max),
            "picard_n": fmt(s.picard_n), "picard_horizon": fmt(s.picard_horizon),
        },
        "mc": {
            "n_paths": fmt(s.n_paths), "dt": fmt(s.mc_dt),
            "seed": fmt(s.seed), "threads": fmt(s.threads),
        },
        "dual": {
            "nus": fmt(s.nus), "nu_min": fmt(s.nu_min), "eps": fmt(s.eps),
            "target_a": fmt(s.target_a), "start_a": fmt(s.start_a),
        },
        "output": {"dir": s.out_dir},
    }
    lines = []
    for section, keys in doc.items():
        lines.append(f"[{section}]")
        for key, val in keys.items():
            lines.append(f"{key} = {val}")
        lines.append("")
    path.write_text("\n".join(lines))


# ---------------------------------------------------------------------------
# output helpers
# ---------------------------------------------------------------------------


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".12g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return str(v)


def write_csv(path: Path, header: Sequence[str], rows) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def write_json(path: Path, obj) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(v):
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, np.ndarray):
        return v.tolist()
    raise TypeError(f"not JSON serializable: {type(v)!r}")


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_validate(rc: RunContext) -> int:
    report = validate_hypotheses(rc.chars)
    rows = [
        (c.name, c.passed, c.measured, c.bound, c.detail)
        for c in report.checks
    ]
    write_csv(
        rc.out_dir / "hypotheses.csv",
        ("check", "passed", "measured", "bound", "detail"),
        rows,
    )
    n_ok = sum(c.passed for c in report.checks)
    print(
        f"validate {rc.bench.name}: {n_ok}/{len(report.checks)} hypothesis "
        f"checks pass -> {rc.out_dir / 'hypotheses.csv'}"
    )
    return 0 if report.all_passed else 1


def cmd_simulate(rc: RunContext) -> int:
    s = rc.settings
    cfg = rc.sim_config()
    res = simulate.run_randomized(
        rc.chars, rc.lam0, rc.x0, rc.a0, cfg, s.n_paths,
        request=EngineRequest(want_cost=True), threads=s.threads,
    )
    est, se = mean_and_se(res["cost"])
    tail = rc.chars.value_cap * math.exp(-rc.chars.discount * s.horizon)
    write_csv(
        rc.out_dir / "simulate.csv",
        (
            "n_paths", "horizon", "cost_mean", "cost_se", "tail_bound",
            "mean_jumps", "mean_action_jumps",
        ),
        [(
            s.n_paths, s.horizon, est, se, tail,
            float(res["n_jumps"].mean()),
            float(res["action_jumps"].mean()),
        )],
    )
    print(
        f"simulate {rc.bench.name}: {s.n_paths} pair paths, cost "
        f"{est:.6f} +- {se:.6f} (tail <= {tail:.2e}) -> "
        f"{rc.out_dir / 'simulate.csv'}"
    )
    return 0


def cmd_solve_hjb(rc: RunContext) -> int:
    sol = solve_hjb(rc.chars, rc.settings.grid_config())
    grid = sol.values.grid
    nodes = grid.nodes()
    m = rc.chars.n_actions
    header = ["x", "value", "best_action"] + [f"q_a{k}" for k in range(m)]
    best = np.argmin(sol.action_values, axis=1)
    rows = [
        tuple(nodes[i]) + (sol.values.values[i], int(best[i]))
        + tuple(sol.action_values[i])
        for i in range(nodes.shape[0])
    ]
    write_csv(rc.out_dir / "hjb_values.csv", header, rows)
    write_json(
        rc.out_dir / "hjb_trace.json",
        {
            "iterations": sol.iterations,
            "residual": sol.residual,
            "last_update": sol.last_update,
            "dt": sol.dt,
            "clamp_fraction": sol.clamp_fraction,
            "trace": sol.trace,
        },
    )
    v0 = float(sol.values(rc.x0.reshape(1, -1))[0])
    print(
        f"solve-hjb {rc.bench.name}: V(x0)={v0:.6f}, residual "
        f"{sol.residual:.2e} after {sol.iterations} iterations -> "
        f"{rc.out_dir / 'hjb_values.csv'}"
    )
    return 0


def cmd_solve_bsde(rc: RunContext) -> int:
    s = rc.settings
    lim = maximal_limit(
        rc.chars, rc.lam0, s.grid_config(), s.n_schedule, s.limit_tol
    )
    grid = lim.values.grid
    nodes = grid.nodes()
    m = rc.chars.n_actions
    per = lim.per_action.values
    spread = per.max(axis=1) - per.min(axis=1)
    header = ["x", "v_limit"] + [f"v_a{k}" for k in range(m)] + ["spread"]
    rows = [
        tuple(nodes[i]) + (lim.values.values[i],) + tuple(per[i]) + (spread[i],)
        for i in range(nodes.shape[0])
    ]
    write_csv(rc.out_dir / "bsde_values.csv", header, rows)
    write_csv(
        rc.out_dir / "bsde_schedule.csv",
        ("n", "iterations", "residual", "diff_prev", "spread"),
        [
            (r["n"], r["iterations"], r["residual"], r["diff_prev"], r["spread"])
            for r in lim.schedule
        ],
    )
    write_json(
        rc.out_dir / "bsde_trace.json",
        {"n_used": lim.n_used, "spread_sup": lim.spread_sup, "schedule": lim.schedule},
    )
    v0 = float(lim.values(rc.x0.reshape(1, -1))[0])
    run = picard_mc_solve(
        rc.chars, rc.lam0, s.picard_n, s.picard_horizon, rc.x0, rc.a0,
        s.n_paths, k_max=s.k_max, basis=BasisConfig(spacing=s.basis_spacing),
        seed=s.seed, threads=s.threads,
    )
    write_csv(
        rc.out_dir / "bsde_mc.csv",
        ("n", "horizon", "n_paths", "y0", "se", "sweeps", "clipped"),
        [(
            run.n, run.horizon, s.n_paths, run.y0, run.se,
            len(run.y0_sweeps), run.clip_count,
        )],
    )
    print(
        f"solve-bsde {rc.bench.name}: v_limit(x0)={v0:.6f} at n={lim.n_used}, "
        f"spread {lim.spread_sup:.2e}; regression MC at n={run.n}: "
        f"y0={run.y0:.6f}+-{run.se:.6f} -> {rc.out_dir / 'bsde_values.csv'}"
    )
    return 0


def cmd_dual_eval(rc: RunContext) -> int:
    s = rc.settings
    m = rc.chars.n_actions
    controls = [IntensityControl.constant(v, m) for v in s.nus]
    cfg = rc.sim_config()
    req = EngineRequest(want_cost=True, density_controls=tuple(controls))
    res = simulate.run_randomized(
        rc.chars, rc.lam0, rc.x0, rc.a0, cfg, s.n_paths,
        request=req, threads=s.threads,
    )
    cost = res["cost"]
    rows = []
    for k, level in enumerate(s.nus):
        w = np.exp(res["logL"][:, k])
        el, el_se = mean_and_se(w)
        rw, rw_se = mean_and_se(w * cost)
        di, di_se = dual_cost_direct(
            rc.chars, rc.lam0, rc.x0, rc.a0, controls[k],
            rc.sim_config(seed_offset=100 + k), s.n_paths, s.threads,
        )
        gap_se = math.hypot(rw_se, di_se)
        rows.append((level, el, el_se, rw, rw_se, di, di_se, gap_se))
    write_csv(
        rc.out_dir / "dual.csv",
        (
            "nu", "density_mean", "density_se", "reweighted", "reweighted_se",
            "direct", "direct_se", "gap_se",
        ),
        rows,
    )
    worst_el = max(abs(r[1] - 1.0) / max(r[2], 1e-300) for r in rows)
    worst_gap = max(abs(r[3] - r[5]) / max(r[7], 1e-300) for r in rows)
    print(
        f"dual-eval {rc.bench.name}: {len(rows)} controls, worst "
        f"|E[L]-1|={worst_el:.2f} se, worst reweighted-direct gap="
        f"{worst_gap:.2f} se -> {rc.out_dir / 'dual.csv'}"
    )
    return 0


def cmd_a_shift(rc: RunContext, nu_level: float, eps: Sequence[float]) -> int:
    s = rc.settings
    m = rc.chars.n_actions
    target = s.target_a if s.target_a is not None else rc.a0
    if not 0 <= target < m:
        raise ConfigError(f"dual.target_a: action index out of range [0, {m})")
    start = s.start_a if s.start_a is not None else (target + 1) % m
    if not 0 <= start < m:
        raise ConfigError(f"dual.start_a: action index out of range [0, {m})")
    base = IntensityControl.constant(nu_level, m)
    exp = a_shift_experiment(
        rc.chars, rc.lam0, rc.x0, target, start, base, eps,
        rc.sim_config(), s.n_paths, s.threads,
    )
    rows = [
        (e, est, se)
        for e, est, se in zip(exp["eps"], exp["estimates"], exp["se"])
    ]
    rows.append(("extrapolated", exp["extrapolated"][0], exp["extrapolated"][1]))
    rows.append(("reference", exp["reference"][0], exp["reference"][1]))
    write_csv(rc.out_dir / "a_shift.csv", ("eps", "estimate", "se"), rows)
    ref, ref_se = exp["reference"]
    ext, ext_se = exp["extrapolated"]
    gap = abs(ext - ref) / max(math.hypot(ext_se, ref_se), 1e-300)
    print(
        f"a-shift {rc.bench.name}: start a[{start}] -> target a[{target}], "
        f"eps->0 gap {gap:.2f} combined se (raw gap at smallest eps is "
        f"O(eps) by design) -> {rc.out_dir / 'a_shift.csv'}"
    )
    return 0


def cmd_compare(rc: RunContext) -> int:
    s = rc.settings
    x0r = rc.x0.reshape(1, -1)
    hjb = solve_hjb(rc.chars, s.grid_config())
    v_hjb = float(hjb.values(x0r)[0])
    # the agreement table needs a converged limit, so a schedule that
    # stops short is continued by doubling (solve-bsde, whose job is the
    # configured schedule itself, reports exhaustion instead)
    deepened = False
    try:
        lim = maximal_limit(
            rc.chars, rc.lam0, s.grid_config(), s.n_schedule, s.limit_tol
        )
    except RuntimeError:
        deeper = list(s.n_schedule)
        while deeper[-1] < 4096:
            deeper.append(deeper[-1] * 2)
        lim = maximal_limit(
            rc.chars, rc.lam0, s.grid_config(), tuple(deeper), s.limit_tol
        )
        deepened = True
    v_lim = float(lim.values(x0r)[0])
    m = rc.chars.n_actions
    nus = tuple(IntensityControl.constant(c, m) for c in s.nus)
    ests, ses = dual_battery_reweighted(
        rc.chars, rc.lam0, rc.x0, rc.a0, nus, rc.sim_config(),
        s.n_paths, s.threads,
    )
    k_min = int(np.argmin(ests))
    oracle = _oracle_at(rc.bench, rc.x0)
    rows = [
        ("hjb_grid", v_hjb, hjb.residual),
        ("bsde_limit", v_lim, lim.spread_sup),
    ] + [
        (f"dual_mc_nu{level:g}", float(ests[k]), float(ses[k]))
        for k, level in enumerate(s.nus)
    ]
    if oracle is not None:
        rows = [(name, val, stat, abs(val - oracle)) for name, val, stat in rows]
        header = ("method", "value_at_x0", "stat", "abs_err_vs_oracle")
    else:
        header = ("method", "value_at_x0", "stat")
    write_csv(rc.out_dir / "compare.csv", header, rows)
    note = f" (schedule deepened to n={lim.n_used})" if deepened else ""
    tagged = f", oracle={oracle:.6f}" if oracle is not None else ""
    print(
        f"compare {rc.bench.name}: hjb={v_hjb:.6f}, bsde={v_lim:.6f} "
        f"(|gap|={abs(v_hjb - v_lim):.2e}){note}, dual battery min "
        f"J={ests[k_min]:.6f}+-{ses[k_min]:.6f} at nu={s.nus[k_min]:g}"
        f"{tagged} -> {rc.out_dir / 'compare.csv'}"
    )
    return 0


def _oracle_at(bench: benchmarks.Benchmark, x0: Array) -> Optional[float]:
    name = bench.name
    if name.startswith("B1"):
        return benchmarks.b1_oracle_value()
    if name.startswith("B2"):
        support = np.array([-1.0, 0.0, 1.0])
        vals = benchmarks.b2_oracle()[0]
        idx = int(np.argmin(np.abs(support - float(x0[0]))))
        if abs(support[idx] - float(x0[0])) > 1e-9:
            return None
        return float(vals[idx])
    if name.startswith("B3"):
        return float(np.asarray(benchmarks.b3_oracle()(x0.reshape(1)))[0])
    return None


def cmd_all(rc: RunContext) -> int:
    results = run_acceptance(
        seed=rc.settings.seed, threads=rc.settings.threads, emit=print
    )
    write_csv(
        rc.out_dir / "acceptance.csv",
        ("criterion", "name", "passed", "elapsed_s", "detail"),
        [(r.index, r.name, r.passed, r.elapsed, r.detail) for r in results],
    )
    n_ok = sum(r.passed for r in results)
    print(f"acceptance: {n_ok}/{len(results)} criteria pass")
    return 0 if n_ok == len(results) else 1


# ---------------------------------------------------------------------------
# acceptance suite
# ---------------------------------------------------------------------------


@dataclass
class CriterionResult:
    index: int
    name: str
    passed: bool
    detail: str
    elapsed: float


class AcceptanceContext:
    """Caches solver output shared between acceptance criteria."""

    # benchmark -> (grid spacing, deepest penalization level) used throughout
    PLAN = {
        "b1": (0.05, 4),
        "b2": (0.05, 1024),
        "b3": (0.002, 1024),
        "b4": (0.02, 1024),
    }

    def __init__(self, seed: int = 0, threads: int = 1):
        self.seed = seed
        self.threads = threads
        self._hjb: dict = {}
        self._sched: dict = {}
        self._stage: dict = {}
        self._battery: dict = {}
        self.picard_run = None

    def bench(self, name: str) -> benchmarks.Benchmark:
        return benchmarks.get(name)

    def hjb(self, name: str):
        if name not in self._hjb:
            dx, _ = self.PLAN[name]
            cfg = GridSolverConfig(dx=dx, tol=1e-9)
            self._hjb[name] = solve_hjb(self.bench(name).chars, cfg)
        return self._hjb[name]

    def schedule(self, name: str, up_to: int):
        """Warm-started penalization ladder 1, 2, 4, ... up_to (cached)."""
        dx, _ = self.PLAN[name]
        b = self.bench(name)
        if name not in self._stage:
            cfg = GridSolverConfig(dx=dx, tol=1e-12)
            grid = Grid.from_box(b.chars.domain, cfg.dx)
            ops = build_action_operators(b.chars, grid, cfg.resolve_dt(b.chars))
            self._stage[name] = (cfg, grid, ops)
            self._sched[name] = []
        cfg, grid, ops = self._stage[name]
        sols = self._sched[name]
        n = 1 if not sols else sols[-1].n * 2
        while n <= up_to:
            warm = None if not sols else sols[-1].values.values
            sols.append(
                penalized_grid_solve(
                    b.chars, b.action_measure, n, cfg,
                    warm_start=warm, _ops=ops, _grid=grid,
                )
            )
            n *= 2
        return [s for s in sols if s.n <= up_to]

    def dual_battery(self, name: str):
        """E[L], reweighted, and direct dual costs for five constant controls."""
        if name in self._battery:
            return self._battery[name]
        b = self.bench(name)
        m = b.chars.n_actions
        levels = (0.75, 0.9, 1.0, 1.1, 1.25)
        controls = [IntensityControl.constant(v, m) for v in levels]
        cfg = SimulationConfig(seed=self.seed + 701, horizon=20.0, dt=0.02)
        res = simulate.run_randomized(
            b.chars, b.action_measure, b.x0, b.a0, cfg, 100_000,
            request=EngineRequest(want_cost=True, density_controls=tuple(controls)),
            threads=self.threads,
        )
        cost = res["cost"]
        rows = []
        for k, level in enumerate(levels):
            w = np.exp(res["logL"][:, k])
            el, el_se = mean_and_se(w)
            rw, rw_se = mean_and_se(w * cost)
            di, di_se = dual_cost_direct(
                b.chars, b.action_measure, b.x0, b.a0, controls[k],
                SimulationConfig(seed=self.seed + 711 + k, horizon=20.0, dt=0.02),
                100_000, self.threads,
            )
            rows.append(
                {
                    "nu": level, "el": el, "el_se": el_se,
                    "rw": rw, "rw_se": rw_se, "di": di, "di_se": di_se,
                }
            )
        self._battery[name] = rows
        return rows


def _crit_1(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Constant-cost problem: every solver returns exactly the cost to go."""
    b = ctx.bench("b1")
    hjb = ctx.hjb("b1")
    err_hjb = float(np.abs(hjb.values.values - 1.0).max())
    sols = ctx.schedule("b1", 4)
    err_lim = float(np.abs(sols[-1].values.values - 1.0).max())
    ok = err_hjb <= 1e-6 and err_lim <= 1e-6
    parts = [f"hjb_err={err_hjb:.2e}", f"limit_err={err_lim:.2e}"]
    tail = b.chars.value_cap * math.exp(-b.chars.discount * 20.0)
    for j, level in enumerate((1.0, 0.8)):
        est, se = dual_cost_direct(
            b.chars, b.action_measure, b.x0, b.a0,
            IntensityControl.constant(level, b.chars.n_actions),
            SimulationConfig(seed=ctx.seed + 31 + j, horizon=20.0, dt=0.02),
            2000, ctx.threads,
        )
        ok = ok and abs(est - 1.0) <= 3.0 * se + 1.01 * tail
        parts.append(f"dual(nu={level:g})={est:.9f}+-{se:.1e}")
    return ok, " ".join(parts)


def _crit_2(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Grid and penalized-limit tables against the independent oracles."""
    ok = True
    parts = []
    # three-state chain
    t0 = time.time()
    support = np.array([[-1.0], [0.0], [1.0]])
    oracle2 = benchmarks.b2_oracle()[0]
    hjb2 = ctx.hjb("b2")
    err_grid2 = float(np.abs(hjb2.values(support) - oracle2).max())
    lim2 = _limit_table(ctx.schedule("b2", 1024), 2e-3)
    err_lim2 = (
        math.inf if lim2 is None
        else float(np.abs(lim2(support).min(axis=1) - oracle2).max())
    )
    el2 = time.time() - t0
    ok &= err_grid2 < 5e-3 and err_lim2 < 5e-3 and el2 < 300.0
    parts.append(f"chain: grid={err_grid2:.2e} limit={err_lim2:.2e} ({el2:.0f}s)")
    # deterministic flow
    t0 = time.time()
    hjb3 = ctx.hjb("b3")
    nodes3 = hjb3.values.grid.nodes()
    oracle3 = np.asarray(benchmarks.b3_oracle()(nodes3[:, 0])).reshape(-1)
    err_grid3 = float(np.abs(hjb3.values.values - oracle3).max())
    lim3 = _limit_table(ctx.schedule("b3", 1024), 2e-3)
    err_lim3 = (
        math.inf if lim3 is None
        else float(np.abs(lim3.values.min(axis=1) - oracle3).max())
    )
    el3 = time.time() - t0
    ok &= err_grid3 < 5e-3 and err_lim3 < 5e-3 and el3 < 300.0
    parts.append(f"flow: grid={err_grid3:.2e} limit={err_lim3:.2e} ({el3:.0f}s)")
    return bool(ok), " ".join(parts)


def _limit_table(sols, tol: float):
    """First solution of a ladder whose sup-distance to its predecessor < tol."""
    for prev, cur in zip(sols, sols[1:]):
        diff = float(np.abs(cur.values.values - prev.values.values).max())
        if diff < tol:
            return cur.values
    return None


def _crit_3(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Primal grid against the penalized limit on the full problem."""
    hjb4 = ctx.hjb("b4")
    sols = ctx.schedule("b4", 32)
    collapsed = sols[-1].values.values.min(axis=1)
    nodes = hjb4.values.grid.nodes()[:, 0]
    lo, hi = nodes[0], nodes[-1]
    pad = 0.1 * (hi - lo)
    inner = (nodes >= lo + pad) & (nodes <= hi - pad)
    gap = float(np.abs(collapsed[inner] - hjb4.values.values[inner]).max())
    return gap < 1e-2, f"inner-80% gap at n=32: {gap:.2e}"


def _crit_4(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Ladder monotone in the penalization level, values inside the cap."""
    ok = True
    parts = []
    for name, (_, deep) in AcceptanceContext.PLAN.items():
        cap = ctx.bench(name).chars.value_cap
        sols = ctx.schedule(name, deep)
        worst = max(
            float((nxt.values.values - prv.values.values).max())
            for prv, nxt in zip(sols, sols[1:])
        )
        lo = min(float(s.values.values.min()) for s in sols)
        hi = max(float(s.values.values.max()) for s in sols)
        good = worst <= 1e-8 and lo >= 0.0 and hi <= cap + 1e-10
        ok &= good
        parts.append(f"{name}: mono={worst:.1e} range=[{lo:.3f},{hi:.3f}]")
    return bool(ok), " ".join(parts)


def _crit_5(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Regression Monte Carlo against the level-4 grid table."""
    b = ctx.bench("b4")
    sols = ctx.schedule("b4", 4)
    v4 = next(s for s in sols if s.n == 4)
    target = float(v4.values(b.x0.reshape(1, -1))[0, b.a0])
    run = picard_mc_solve(
        b.chars, b.action_measure, 4, 6.0, b.x0, b.a0, 100_000,
        seed=ctx.seed + 53, threads=ctx.threads,
    )
    ctx.picard_run = run
    gap = abs(run.y0 - target)
    tol = 5e-3 + 3.0 * run.se
    return gap < tol, (
        f"y0={run.y0:.6f}+-{run.se:.1e} grid={target:.6f} "
        f"gap={gap:.2e} < {tol:.2e}"
    )


def _crit_6(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Horizon sensitivity bounded by the discount tail."""
    b = ctx.bench("b4")
    runs = [
        picard_mc_solve(
            b.chars, b.action_measure, 4, t, b.x0, b.a0, 30_000,
            seed=ctx.seed + 57 + j, threads=ctx.threads,
        )
        for j, t in enumerate((4.0, 8.0))
    ]
    gap = abs(runs[0].y0 - runs[1].y0)
    bound = math.exp(-4.0) * b.chars.value_cap + 3.0 * math.hypot(
        runs[0].se, runs[1].se
    )
    return gap <= bound, (
        f"|Y0(4)-Y0(8)|={gap:.2e} <= {bound:.2e} "
        f"(y0: {runs[0].y0:.5f} vs {runs[1].y0:.5f})"
    )


def _crit_7(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Exchange-of-measure bookkeeping: unit density mean, matching costs."""
    ok = True
    parts = []
    for name in ("b1", "b2", "b3", "b4"):
        rows = ctx.dual_battery(name)
        worst_el = 0.0
        worst_gap = 0.0
        for r in rows:
            el_dev = abs(r["el"] - 1.0)
            ok &= el_dev <= 3.0 * r["el_se"] + 1e-12
            worst_el = max(worst_el, el_dev / max(r["el_se"], 1e-12))
            gap = abs(r["rw"] - r["di"])
            gse = math.hypot(r["rw_se"], r["di_se"])
            ok &= gap <= 3.0 * gse
            worst_gap = max(worst_gap, gap / max(gse, 1e-300))
        parts.append(f"{name}: |EL-1|<={worst_el:.2f}se gap<={worst_gap:.2f}se")
    return bool(ok), " ".join(parts)


def _crit_8(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Bang-bang control from the level-4 table attains the level-4 value."""
    ok = True
    parts = []
    for j, name in enumerate(("b2", "b4")):
        b = ctx.bench(name)
        v4 = next(s for s in ctx.schedule(name, 4) if s.n == 4)
        target = float(v4.values(b.x0.reshape(1, -1))[0, b.a0])
        control = zsign_bang_bang(v4.values, level=4.0, floor=1e-3)
        est, se = dual_cost_direct(
            b.chars, b.action_measure, b.x0, b.a0, control,
            SimulationConfig(seed=ctx.seed + 61 + j, horizon=20.0, dt=0.02),
            100_000, ctx.threads,
        )
        attain = abs(est - target) <= 5e-3 + 3.0 * se
        beaten = False
        for r in ctx.dual_battery(name):
            if r["di"] < est - 3.0 * math.hypot(r["di_se"], se):
                beaten = True
        ok &= attain and not beaten
        parts.append(
            f"{name}: bang-bang={est:.6f}+-{se:.1e} v4={target:.6f}"
            + (" UNDERCUT" if beaten else "")
        )
    return bool(ok), " ".join(parts)


def _crit_9(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Switching-gain violation vanishing along the penalization ladder."""
    ok = True
    parts = []
    for name, (_, deep) in AcceptanceContext.PLAN.items():
        b = ctx.bench(name)
        sols = ctx.schedule(name, deep)
        gs = [
            constraint_violation(
                s, b.chars, b.action_measure, b.x0, b.a0, 2.0,
                n_paths=20_000, seed=ctx.seed + 17, threads=ctx.threads,
            )
            for s in sols
        ]
        decreasing = all(b_ <= a_ + 1e-6 for a_, b_ in zip(gs, gs[1:]))
        ok &= gs[-1] < 1e-3 and decreasing
        parts.append(
            f"{name}: G(n={sols[-1].n})={gs[-1]:.2e}"
            + ("" if decreasing else " NOT-DECREASING")
        )
    return bool(ok), " ".join(parts)


def _crit_10(ctx: AcceptanceContext) -> tuple[bool, str]:
    """Start-action independence: flat tables and vanishing shift gap."""
    b = ctx.bench("b4")
    sols = ctx.schedule("b4", 1024)
    spread = float(sols[-1].spread().max())
    exp = a_shift_experiment(
        b.chars, b.action_measure, b.x0, b.a0, (b.a0 + 1) % 3,
        IntensityControl.constant(1.0, 3), (0.2, 0.1, 0.05, 0.025),
        SimulationConfig(seed=ctx.seed + 71, horizon=20.0, dt=0.02),
        20_000, ctx.threads,
    )
    ref, ref_se = exp["reference"]
    # the raw gap at fixed eps carries an O(eps) washout bias, so the
    # comparison happens at the experiment's own eps -> 0 readout
    # (anchored at the 0.05/0.025 pair); the raw gaps must still shrink
    raw_gaps = [abs(e - ref) for e in exp["estimates"]]
    shrinking = all(b < a for a, b in zip(raw_gaps, raw_gaps[1:]))
    ext, ext_se = exp["extrapolated"]
    gap = abs(ext - ref)
    band = 3.0 * math.hypot(ext_se, ref_se)
    ok = spread < 1e-2 and shrinking and gap <= band
    return ok, (
        f"spread(n={sols[-1].n})={spread:.2e}; raw shift gaps "
        + ">".join(f"{g:.4f}" for g in raw_gaps)
        + f"; eps->0: |{ext:.5f}-{ref:.5f}|={gap:.2e} <= {band:.2e}"
    )


def _crit_11(ctx: AcceptanceContext) -> tuple[bool, str]:
    """First-jump laws, compensator centering, and thread determinism."""
    from scipy import stats

    ok = True
    parts = []
    # Kolmogorov-Smirnov on exponential first-jump times (constant total rate)
    ks_cases = []
    for j, name in enumerate(("b1", "b2", "b3")):
        b = ctx.bench(name)
        lam = float(
            b.chars.rate(b.x0.reshape(1, -1), np.array([b.a0]))[0]
        )
        rate = lam + b.action_measure.mass
        cfg = SimulationConfig(seed=ctx.seed + 81 + j, horizon=20.0, dt=0.02)
        res = simulate.run_randomized(
            b.chars, b.action_measure, b.x0, b.a0, cfg, 10_000,
            request=EngineRequest(want_t1=True), threads=ctx.threads,
        )
        ks_cases.append((f"{name} pair", res["t1_time"], rate))
    b1 = ctx.bench("b1")
    res = simulate.run_primal(
        b1.chars, PiecewiseOpenLoopPolicy.constant(0), b1.x0,
        SimulationConfig(seed=ctx.seed + 85, horizon=20.0, dt=0.02),
        10_000, request=EngineRequest(want_t1=True), threads=ctx.threads,
    )
    ks_cases.append(("b1 policy", res["t1_time"], 1.0))
    for label, t1, rate in ks_cases:
        finite = t1[np.isfinite(t1)]
        pv = float(
            stats.kstest(finite, stats.expon(scale=1.0 / rate).cdf).pvalue
        )
        ok &= finite.size == t1.size and pv >= 0.01
        parts.append(f"KS[{label}] p={pv:.3f}")
    # compensator residual of the counting measure on every benchmark
    def unit_test_fn(t, x, bcol):
        return np.ones(np.asarray(t).shape[0])

    for j, name in enumerate(("b1", "b2", "b3", "b4")):
        b = ctx.bench(name)
        cfg = SimulationConfig(seed=ctx.seed + 91 + j, horizon=10.0, dt=0.02)
        res = simulate.run_randomized(
            b.chars, b.action_measure, b.x0, b.a0, cfg, 20_000,
            request=EngineRequest(compensator=(unit_test_fn, 10.0)),
            threads=ctx.threads,
        )
        mean, se = mean_and_se(res["compensator_residual"])
        ok &= abs(mean) <= 3.0 * se
        parts.append(f"comp[{name}]={mean / se if se else 0.0:+.2f}se")
    # identical output at 1, 4, and 8 worker threads
    b4 = ctx.bench("b4")
    cfg = SimulationConfig(seed=ctx.seed + 97, horizon=20.0, dt=0.02)
    req = EngineRequest(want_cost=True, want_t1=True)
    runs = [
        simulate.run_randomized(
            b4.chars, b4.action_measure, b4.x0, b4.a0, cfg, 10_000,
            request=req, threads=k,
        )
        for k in (1, 4, 8)
    ]
    same = all(
        np.array_equal(runs[0][key], r[key])
        for r in runs[1:]
        for key in ("cost", "t1_time", "final_x", "n_jumps")
    )
    ok &= same
    parts.append("threads 1/4/8 " + ("identical" if same else "DIFFER"))
    return bool(ok), " ".join(parts)


_CRITERIA = (
    ("constant-cost identity", _crit_1),
    ("oracle agreement", _crit_2),
    ("cross-method value agreement", _crit_3),
    ("penalized monotonicity and bounds", _crit_4),
    ("regression MC / grid consistency", _crit_5),
    ("horizon truncation rate", _crit_6),
    ("density and reweighting consistency", _crit_7),
    ("dual bang-bang attainment", _crit_8),
    ("constraint attainment", _crit_9),
    ("start-action independence", _crit_10),
    ("simulator laws and determinism", _crit_11),
)

_RUNTIME_LIMITS = {1: 60.0, 2: 600.0, 3: 900.0}


def run_criterion(ctx: AcceptanceContext, index: int) -> CriterionResult:
    """Run one acceptance criterion (1-based) and wrap its verdict."""
    name, fn = _CRITERIA[index - 1]
    t0 = time.time()
    try:
        passed, detail = fn(ctx)
    except Exception as exc:  # honest failure, never a crash
        passed, detail = False, f"error: {type(exc).__name__}: {exc}"
    elapsed = time.time() - t0
    limit = _RUNTIME_LIMITS.get(index)
    if limit is not None and elapsed > limit:
        passed = False
        detail += f" [over runtime budget {limit:.0f}s]"
    return CriterionResult(index, name, bool(passed), detail, elapsed)


def run_acceptance(
    seed: int = 0, threads: int = 1, emit: Optional[Callable] = None
) -> list:
    """Run all acceptance criteria, emitting one PASS/FAIL line each."""
    ctx = AcceptanceContext(seed=seed, threads=threads)
    results = []
    for index in range(1, len(_CRITERIA) + 1):
        r = run_criterion(ctx, index)
        results.append(r)
        if emit is not None:
            emit(
                f"criterion {r.index:2d} [{r.name}] "
                f"{'PASS' if r.passed else 'FAIL'} ({r.elapsed:.1f}s) {r.detail}"
            )
    return results


# ---------------------------------------------------------------------------
# CLI
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pdmp-control",
        description="Optimal control of piecewise deterministic Markov "
        "processes: grid, penalized-switching, and dual Monte Carlo solvers.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    specs = {
        "validate": "check the standing assumptions on the problem data",
        "simulate": "sample pair-process paths and estimate the running cost",
        "solve-hjb": "dynamic-programming grid solve of the value function",
        "solve-bsde": "penalized switching ladder up to its maximal limit",
        "dual-eval": "density and dual-cost battery of constant controls",
        "a-shift": "start-action shift experiment with extrapolation",
        "compare": "cross-method agreement table at the start state",
        "all": "full acceptance suite",
    }
    for cmd, help_text in specs.items():
        sp = sub.add_parser(cmd, help=help_text)
        sp.add_argument("--config", help="INI run description")
        sp.add_argument("--problem", help="benchmark name (b1..b4)")
        sp.add_argument("--seed", type=int, help="base RNG seed")
        sp.add_argument("--threads", type=int, help="worker thread count")
        sp.add_argument("--out", help="output directory")
        if cmd == "a-shift":
            sp.add_argument(
                "--nu", default="const1",
                help="base control, e.g. const1 or 0.8 (constant level)",
            )
            sp.add_argument(
                "--eps", help="comma separated shift widths, largest first"
            )
    return parser


def _parse_nu_level(raw: str) -> float:
    text = raw.strip().lower()
    if text.startswith("const"):
        text = text[5:]
    try:
        level = float(text)
    except ValueError:
        raise ConfigError(f"--nu: could not parse {raw!r} as a constant level")
    if level <= 0:
        raise ConfigError("--nu: constant control must be positive")
    return level


def cli_main(argv: Optional[Sequence[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        settings = (
            load_config(args.config) if args.config else RunSettings()
        )
        if args.problem:
            settings.problem = args.problem
        if args.seed is not None:
            settings.seed = args.seed
        if args.threads is not None:
            settings.threads = args.threads
        if args.out:
            settings.out_dir = args.out
        if getattr(args, "eps", None):
            settings.eps = _parse_list("dual", "eps", args.eps, float)
        validate_settings(settings)
        rc = resolve_run(settings)
        rc.out_dir.mkdir(parents=True, exist_ok=True)
        echo_config(settings, rc.out_dir / "resolved_config.ini")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2

    try:
        if args.command == "validate":
            return cmd_validate(rc)
        if args.command == "simulate":
            return cmd_simulate(rc)
        if args.command == "solve-hjb":
            return cmd_solve_hjb(rc)
        if args.command == "solve-bsde":
            return cmd_solve_bsde(rc)
        if args.command == "dual-eval":
            return cmd_dual_eval(rc)
        if args.command == "a-shift":
            return cmd_a_shift(rc, _parse_nu_level(args.nu), settings.eps)
        if args.command == "compare":
            return cmd_compare(rc)
        if args.command == "all":
            return cmd_all(rc)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (RuntimeError, ValueError, NotImplementedError) as exc:
        print(f"{args.command} failed: {exc}", file=sys.stderr)
        return 1
    raise AssertionError(f"unhandled command {args.command!r}")


def main() -> None:
    sys.exit(cli_main())


if __name__ == "__main__":
    main()
