"""Trust, then verify the simulator.

Everything downstream rides on the path sampler, so it gets its own
audit: jump times against the closed-form clock, the compensator
martingale property (the ledger of realized jumps minus the ledger of
predicted jump intensity must be centered), and byte-stable replays
under a fixed seed regardless of thread count.
"""

import numpy as np
from scipy import stats

from pdmp_control import (
    SimulationConfig,
    builtin_benchmark,
    mean_and_se,
    run_randomized,
)
from pdmp_control.simulate import EngineRequest

bench = builtin_benchmark("b2")
cfg = SimulationConfig(seed=11, horizon=6.0, dt=0.01)

# first-jump times: the pair process jumps at total rate lam + lam0 mass
res = run_randomized(
    bench.chars, bench.action_measure, bench.x0, bench.a0, cfg, 8000,
    request=EngineRequest(want_t1=True),
)
t1 = res["t1_time"]
rate = 1.0 + float(bench.action_measure.mass)  # lam(a=0) + lam0 mass
observed = t1[np.isfinite(t1)]
ks = stats.kstest(observed, "expon", args=(0.0, 1.0 / rate))
print(f"first-jump KS against Exp({rate:g}): statistic {ks.statistic:.4f}, "
      f"p = {ks.pvalue:.3f}")
assert ks.pvalue > 0.01

# compensator residual: realized jumps minus integrated intensity
test_fn = lambda t, x, a: 1.0 + 0.1 * x[:, 0]
res_c = run_randomized(
    bench.chars, bench.action_measure, bench.x0, bench.a0, cfg, 5000,
    request=EngineRequest(compensator=(test_fn, cfg.horizon)),
)
mean, se = mean_and_se(res_c["compensator_residual"])
pull = abs(mean) / se
print(f"compensator residual: {mean:+.5f} +- {se:.5f} "
      f"({pull:.2f} se from zero)")
assert pull <= 3.0

# determinism: the thread count partitions work but not randomness
runs = [
    run_randomized(
        bench.chars, bench.action_measure, bench.x0, bench.a0, cfg, 2000,
        request=EngineRequest(want_cost=True), threads=k,
    )["cost"]
    for k in (1, 4, 8)
]
assert np.array_equal(runs[0], runs[1]) and np.array_equal(runs[0], runs[2])
print("costs byte-identical at 1, 4, and 8 threads")
