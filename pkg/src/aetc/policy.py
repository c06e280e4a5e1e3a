"""
Adaptive explore-then-commit (AETC) for scalar and vector responses.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .ensemble import ModelEnsemble, all_subsets, as_subset
from .errors import ConfigError, InfeasibleBudgetError, NumericalFailure
from .losscalc import (LrmcEstimate, empirical_mse, k_coefficients, optimal_round,
                       selection_key)
from .regress import ExplorationLog, fit_subset, fit_subsets

EXPLOIT_CHUNK = 1 << 16


@dataclass(frozen=True)
class AetcConfig:
    """Inputs of one AETC run.

    ``reg_base`` sets the regularization ``alpha_t = reg_base**(-t)`` added
    to ``k2``. ``Q`` switches to the Q-risk; with ``Q=None`` a scalar
    response uses the plain MSE and a vector response the identity Q.
    """

    budget: float
    max_card: Optional[int] = None
    reg_base: float = 4.0
    recycle: bool = False
    Q: Optional[np.ndarray] = None
    seed: int = 0

    def __post_init__(self):
        if not self.budget > 0:
            raise ConfigError("budget must be positive")
        if self.max_card is not None and self.max_card < 1:
            raise ConfigError("maxCard must be at least 1")
        if not self.reg_base > 1:
            raise ConfigError("regBase must exceed 1")
        if self.Q is not None:
            object.__setattr__(self, "Q", np.atleast_2d(np.asarray(self.Q, dtype=float)))

    def alpha(self, t: int) -> float:
        return self.reg_base ** (-t)


@dataclass(frozen=True)
class RoundRecord:
    """Decision inputs at exploration round ``t`` for the selected subset."""

    t: int
    S: Optional[tuple]
    m_opt: float
    h: float
    k1: float
    k2: float
    alpha: float
    n_feasible: int


@dataclass
class AetcResult:
    chosen_S: tuple
    m_explore: int
    estimate: np.ndarray
    n_exploit: int
    budget_spent: float
    budget: float
    trail: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "chosenS": list(self.chosen_S),
            "mExplore": self.m_explore,
            "estimate": [float(v) for v in self.estimate],
            "nExploit": self.n_exploit,
            "budgetSpent": self.budget_spent,
            "budget": self.budget,
            "flags": list(self.flags),
            "trail": [_record_dict(r) for r in self.trail],
        }

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    def trail_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "S", "mOpt", "h", "k1", "k2", "alpha", "nFeasible"])
        for r in self.trail:
            S = " ".join(map(str, r.S)) if r.S else ""
            w.writerow([r.t, S, repr(r.m_opt), repr(r.h), repr(r.k1), repr(r.k2), repr(r.alpha), r.n_feasible])
        return buf.getvalue()


def _record_dict(r: RoundRecord) -> dict:
    return {"t": r.t, "S": list(r.S) if r.S else None, "mOpt": r.m_opt, "h": r.h,
            "k1": r.k1, "k2": r.k2, "alpha": r.alpha, "nFeasible": r.n_feasible}


def enumerate_subsets(n: int, max_card: int) -> list:
    """Nonempty subsets of ``1..n`` with at most ``max_card`` members, by size then lexicographically."""
    if not 1 <= max_card <= n:
        raise ValueError(f"maxCard must be in [1, {n}], got {max_card}")
    return list(all_subsets(n, max_card))


def affordable(remaining: float, unit_cost: float) -> int:
    """Largest integer count whose total cost stays within ``remaining``."""
    if remaining < unit_cost:
        return 0
    k = math.floor(remaining / unit_cost)
    # guard floor() against quotient rounding in either direction
    while k > 0 and k * unit_cost > remaining:
        k -= 1
    while (k + 1) * unit_cost <= remaining:
        k += 1
    return k


def _exploit_mean(ensemble: ModelEnsemble, S: tuple, count: int, seq: np.random.SeedSequence) -> np.ndarray:
    """Mean of ``count`` fresh regressor draws, generated in fixed-size chunks
    from per-chunk substreams so the result does not depend on chunking order."""
    n_chunks = -(-count // EXPLOIT_CHUNK)
    total = np.zeros(len(S))
    for i, child in enumerate(seq.spawn(n_chunks)):
        size = min(EXPLOIT_CHUNK, count - i * EXPLOIT_CHUNK)
        total += ensemble.sample_regressors(S, size, np.random.default_rng(child)).sum(axis=0)
    return total / count


def _score_round(log: ExplorationLog, subset_costs: dict, config: AetcConfig, costs, t: int, M: int):
    B = config.budget
    c_epr = costs.c_epr()
    alpha = config.alpha(t)
    best = None
    n_feasible = 0
    for S, stats in fit_subsets(log, subset_costs).items():
        if not stats.feasible:
            continue
        n_feasible += 1
        k1, k2_raw = k_coefficients(stats, costs, config.Q, 0.0, c_ept=subset_costs[S])
        k2 = k2_raw + alpha
        m_S = optimal_round(B, c_epr, k1, k2)
        if k1 <= 0 and k2_raw <= 0:
            # the plug-in loss is already zero, further rounds cannot improve it
            m_S = float(t)
        m_eval = max(m_S, t)
        if k1 <= 0:
            h = empirical_mse(B, min(m_eval, M), c_epr, k1, k2)
        elif m_eval * c_epr >= B:
            h = math.inf
        else:
            h = empirical_mse(B, m_eval, c_epr, k1, k2)
        key = selection_key(h, subset_costs[S], S)
        if best is None or key < best[0]:
            best = (key, RoundRecord(t=t, S=S, m_opt=m_S, h=h, k1=k1, k2=k2, alpha=alpha, n_feasible=0))
    if best is None:
        return RoundRecord(t=t, S=None, m_opt=math.nan, h=math.nan, k1=math.nan, k2=math.nan,
                           alpha=alpha, n_feasible=0)
    r = best[1]
    return RoundRecord(t=r.t, S=r.S, m_opt=r.m_opt, h=r.h, k1=r.k1, k2=r.k2, alpha=r.alpha,
                       n_feasible=n_feasible)


def run_aetc(ensemble: ModelEnsemble, config: AetcConfig) -> AetcResult:
    """Explore jointly until the estimated optimal round of the currently best
    subset has been reached, then spend the rest of the budget on that subset.

    The first ``n + 2`` rounds are mandatory. If the budget runs out
    (``t = floor(B / c_epr)``) before the stopping rule fires, the best
    subset at that round is exploited and the ``budget-exhausted`` flag is set.
    """
    costs = ensemble.costs
    n = ensemble.n
    c_epr = costs.c_epr()
    B = config.budget
    max_card = n if config.max_card is None else config.max_card
    if max_card > n:
        raise ConfigError(f"maxCard {max_card} exceeds the number of models {n}")
    if config.Q is not None and config.Q.shape[1] != ensemble.k0:
        raise ConfigError(f"Q has {config.Q.shape[1]} columns, response dimension is {ensemble.k0}")
    M = affordable(B, c_epr)
    if M < n + 2:
        raise InfeasibleBudgetError(
            f"budget {B} affords {M} exploration rounds, the warm-up needs {n + 2}")
    subset_costs = {S: costs.c_ept(S) for S in enumerate_subsets(n, max_card)}

    explore_seq, exploit_seq = np.random.SeedSequence(config.seed).spawn(2)
    rng = np.random.default_rng(explore_seq)
    log = ExplorationLog(n, ensemble.k0, capacity=max(2 * (n + 2), 64))
    log.append(*ensemble.sample_joint(n + 2, rng))

    trail = []
    flags = []
    t = n + 2
    while True:
        rec = _score_round(log, subset_costs, config, costs, t, M)
        trail.append(rec)
        if rec.S is None:
            if t >= M:
                raise NumericalFailure(
                    f"every candidate subset has a rank-deficient design at the final round t={t}")
        elif rec.m_opt <= t:
            break
        elif t >= M:
            flags.append("budget-exhausted")
            break
        log.append(*ensemble.sample_joint(1, rng))
        t += 1

    S = rec.S
    stats = fit_subsets(log, [S])[S]
    c_ept = costs.c_ept(S)
    N = affordable(B - c_epr * t, c_ept)
    idx = np.asarray(S) - 1
    if N == 0:
        # nothing left to exploit: fall back to the exploration draws
        flags.append("no-exploitation-budget")
        xbar = log.rows[:, idx].mean(axis=0)
    else:
        xbar = _exploit_mean(ensemble, S, N, exploit_seq)
        if config.recycle:
            xbar = (N * xbar + log.rows[:, idx].sum(axis=0)) / (N + t)
    estimate = stats.beta_hat @ np.concatenate([[1.0], xbar])
    return AetcResult(chosen_S=S, m_explore=t, estimate=estimate, n_exploit=N,
                      budget_spent=t * c_epr + N * c_ept, budget=B, trail=trail, flags=flags)


def run_etc_fixed(ensemble: ModelEnsemble, S: Sequence[int], m: int, budget: float, seed: int,
                  recycle: bool = False) -> LrmcEstimate:
    """Uniform exploration policy with a prescribed subset and round count."""
    costs = ensemble.costs
    S = as_subset(S, ensemble.n)
    s = len(S)
    c_epr = costs.c_epr()
    c_ept = costs.c_ept(S)
    if m < s + 2:
        raise ConfigError(f"m={m} is below the minimum {s + 2} for a {s}-regressor model")
    if m * c_epr > budget:
        raise InfeasibleBudgetError(f"{m} exploration rounds cost {m * c_epr}, budget is {budget}")
    N = affordable(budget - m * c_epr, c_ept)
    if N < 1:
        raise InfeasibleBudgetError("no exploitation budget left after exploration")
    explore_seq, exploit_seq = np.random.SeedSequence(seed).spawn(2)
    log = ExplorationLog.from_arrays(*ensemble.sample_joint(m, np.random.default_rng(explore_seq)))
    stats = fit_subset(log, S)
    if not stats.feasible:
        raise NumericalFailure(f"design for subset {S} is rank deficient at m={m}")
    xbar = _exploit_mean(ensemble, S, N, exploit_seq)
    if recycle:
        xbar = (N * xbar + log.rows[:, np.asarray(S) - 1].sum(axis=0)) / (N + m)
    value = stats.beta_hat @ np.concatenate([[1.0], xbar])
    return LrmcEstimate(value=value, S=S, n_exploit=N, m_explore=m, budget_spent=m * c_epr + N * c_ept)
