# Repeated trials: adaptive policy, its recycling variant, a fixed
# explore-then-commit plan and plain Monte Carlo on a budget grid.
#
# Two cheap surrogates explain almost all of the response variance, which
# is the regime where multifidelity estimation pays off the most.

import numpy as np

from aetc import CostSchedule, SyntheticLinearSpec, TrialSpec, run_trials

cov = np.array([[1.0, 0.5], [0.5, 1.0]])
spec = SyntheticLinearSpec(meanX=[1.0, 2.0], covX=cov, beta=[0.0, 1.0, 1.0], noiseCov=0.01,
                           costs=CostSchedule(1000.0, (1.0, 1.0)))

trials = TrialSpec(ensemble=spec, budgets=[5e4, 1e5, 2e5], trials_per_budget=40,
                   methods=("aetc", "aetc-re", "etc-fixed", "mc"), base_seed=3)
report = run_trials(trials)

print(f"limiting subset: {report.limiting_S}")
print(f"{'method':<10}{'budget':>10}{'median MSE':>14}{'q95 MSE':>12}{'median m':>10}")
for c in report.cells:
    print(f"{c['method']:<10}{c['budget']:10.0f}{c['mseQ50']:14.3e}{c['mseQ95']:12.3e}"
          f"{c['medianMExplore']:10.0f}")

B = trials.budgets[-1]
gain = report.cell("mc", B)["mseQ50"] / report.cell("aetc", B)["mseQ50"]
print(f"\nat B={B:.0f} the adaptive estimator is {gain:.0f}x more accurate than MC (median)")

report.write("trials_out")
print("report.csv, trials.csv and manifest.json written to trials_out/")
