# Vector-valued responses and the Q-risk.
#
# The response has three components; Q picks the quantity we care about,
# here the difference between the first and last component. Different Q
# can favour different subsets.

import numpy as np

from aetc import AetcConfig, CostSchedule, SyntheticLinearSpec, oracle_best_subset, run_aetc

rng = np.random.default_rng(0)
beta = np.array([[0.0, 1.0, 0.0, 0.2],
                 [1.0, 0.5, 0.5, 0.5],
                 [0.0, 0.0, 0.1, 1.0]])
spec = SyntheticLinearSpec(meanX=[1.0, 0.0, -1.0], covX=np.eye(3), beta=beta,
                           noiseCov=0.02 * np.eye(3), costs=CostSchedule(200.0, (2.0, 1.0, 2.0)))

for name, Q in [("identity", None), ("first minus last", np.array([[1.0, 0.0, -1.0]])),
                ("first only", np.array([[1.0, 0.0, 0.0]]))]:
    S_star, _ = oracle_best_subset(spec, Q=Q)
    res = run_aetc(spec, AetcConfig(budget=1e5, Q=Q, seed=1))
    err = res.estimate - spec.mean_response()
    risk = float(err @ err) if Q is None else float(np.sum((Q @ err) ** 2))
    print(f"{name:<18} oracle S*={str(S_star):<10} chosen={str(res.chosen_S):<10} "
          f"m={res.m_explore:<4d} Q-risk={risk:.2e}")
