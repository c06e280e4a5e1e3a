# Plugging in your own models.
#
# The "high-fidelity" model integrates exp(-x t^2) over [0, 1] with a fine
# trapezoid rule, the surrogates use 3 and 9 points. Each joint draw
# samples x once and evaluates every model at it. There is no closed-form
# oracle here, so the reference value comes from a long MC run.

import numpy as np

from aetc import AetcConfig, CallableEnsemble, CostSchedule, run_aetc, run_mc


trapezoid = getattr(np, "trapezoid", None) or np.trapz  # renamed in numpy 2


def quad(x, points):
    t = np.linspace(0.0, 1.0, points)
    return trapezoid(np.exp(-x * t**2), t)


def joint(rng):
    x = rng.uniform(0.5, 3.0)
    return np.array([quad(x, 3), quad(x, 9)]), [quad(x, 2001)]


def regressors(rng):
    x = rng.uniform(0.5, 3.0)
    return np.array([quad(x, 3), quad(x, 9)])


ens = CallableEnsemble(CostSchedule(c0=200.0, c=(3.0, 9.0)), k0=1, joint=joint, regressors=regressors)

ref = run_mc(ens, 200.0 * 20000, seed=0).value[0]
res = run_aetc(ens, AetcConfig(budget=5e4, seed=1))
mc = run_mc(ens, 5e4, seed=1).value[0]
print(f"reference {ref:.6f}")
print(f"AETC      {res.estimate[0]:.6f}  (S={res.chosen_S}, m={res.m_explore}, N={res.n_exploit})")
print(f"MC        {mc:.6f}  ({int(5e4 // 200)} high-fidelity samples)")
