"""Three unrelated solvers, one value.

The constant-cost benchmark pays 1 per unit time no matter what, so the
discounted value is exactly 1 everywhere.  Dynamic programming on a grid,
the penalized switching system, and intensity-control Monte Carlo compute
it three independent ways.  None of them is told the answer.
"""

import math

from pdmp_control import (
    IntensityControl,
    SimulationConfig,
    builtin_benchmark,
    dual_cost_direct,
    maximal_limit,
    solve_hjb,
)
from pdmp_control.hjb import GridSolverConfig

bench = builtin_benchmark("b1")
x0r = bench.x0.reshape(1, -1)
cfg = GridSolverConfig(dx=0.05)

sol = solve_hjb(bench.chars, cfg)
v_grid = float(sol.values(x0r)[0])
print(f"dynamic programming:    V(x0) = {v_grid:.9f}")

lim = maximal_limit(bench.chars, bench.action_measure, cfg)
v_lim = float(lim.values(x0r)[0])
print(f"penalized limit (n={lim.n_used}):  v(x0) = {v_lim:.9f}")

horizon = 16.0
nu = IntensityControl.constant(1.0, bench.chars.n_actions)
est, se = dual_cost_direct(
    bench.chars, bench.action_measure, bench.x0, bench.a0, nu,
    SimulationConfig(seed=7, horizon=horizon, dt=0.02), 20_000,
)
tail = bench.chars.value_cap * math.exp(-bench.delta * horizon)
print(f"dual Monte Carlo:       J(x0) = {est:.9f} +- {se:.2e} "
      f"(finite-horizon tail <= {tail:.1e})")

assert abs(v_grid - 1.0) < 1e-6
assert abs(v_lim - 1.0) < 1e-6
assert abs(est - 1.0) <= 3.0 * se + tail
print("all three agree on 1.0")
