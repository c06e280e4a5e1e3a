"""
LRMC estimators and the exploration/exploitation loss calculus.

The asymptotic loss of exploring ``m`` rounds and exploiting subset ``S``
with the rest of a budget ``B`` is

    k1 / (B - c_epr * m) + k2 / m,

which is minimized at ``m_S = B / (c_epr + sqrt(c_epr * k1 / k2))`` with
value ``(sqrt(k1) + sqrt(c_epr * k2))**2 / B``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .ensemble import CostSchedule, SyntheticLinearSpec, all_subsets, as_subset, oracle_quantities
from .regress import SubsetStats, trace_risk_terms


@dataclass(frozen=True)
class LossProfile:
    S: tuple
    k1: float
    k2: float
    m_opt: float
    opt_loss: float
    feasible: bool = True


@dataclass(frozen=True)
class LrmcEstimate:
    value: np.ndarray
    S: tuple
    n_exploit: int
    m_explore: int
    budget_spent: float


def _beta_of(stats_or_beta) -> np.ndarray:
    beta = stats_or_beta.beta_hat if isinstance(stats_or_beta, SubsetStats) else stats_or_beta
    return np.atleast_2d(np.asarray(beta, dtype=float))


def _draws(draws, s: int) -> np.ndarray:
    draws = np.asarray(draws, dtype=float)
    if draws.ndim == 1:
        draws = draws.reshape(-1, s)
    if draws.shape[0] == 0:
        raise ValueError("need at least one regressor draw")
    if draws.shape[1] != s:
        raise ValueError(f"draws have {draws.shape[1]} columns, model has {s} regressors")
    return draws


def lrmc(stats: Union[SubsetStats, np.ndarray], exploit_draws) -> np.ndarray:
    """Average of fitted predictions over the exploitation draws."""
    beta = _beta_of(stats)
    draws = _draws(exploit_draws, beta.shape[1] - 1)
    xbar = np.concatenate([[1.0], draws.mean(axis=0)])
    return beta @ xbar


def lrmc_recycled(stats: Union[SubsetStats, np.ndarray], exploration_regressors, exploit_draws) -> np.ndarray:
    """LRMC over the pooled exploration and exploitation regressor draws."""
    beta = _beta_of(stats)
    s = beta.shape[1] - 1
    a = _draws(exploration_regressors, s)
    b = _draws(exploit_draws, s)
    xbar = (a.sum(axis=0) + b.sum(axis=0)) / (len(a) + len(b))
    return beta @ np.concatenate([[1.0], xbar])


def _qmat(Q, k0):
    return np.eye(k0) if Q is None else np.atleast_2d(np.asarray(Q, dtype=float))


def conditional_mse(beta_hat, beta, x, Sigma, n_exploit: int, Q=None) -> float:
    """Exact MSE (or Q-risk) of LRMC given the fitted coefficients.

    Squared bias ``|Q (beta_hat - beta) x|^2`` plus exploitation variance
    ``tr(Sigma beta_hat^T Q^T Q beta_hat) / N``.
    """
    bh = np.atleast_2d(np.asarray(beta_hat, dtype=float))
    b = np.atleast_2d(np.asarray(beta, dtype=float))
    Q = _qmat(Q, bh.shape[0])
    bias = Q @ ((bh - b) @ np.asarray(x, dtype=float))
    W = Q @ bh
    var = np.sum((W @ np.asarray(Sigma, dtype=float)) * W) / n_exploit
    return float(bias @ bias + var)


def avg_conditional_mse(beta, Sigma, x, noise, gram, n_exploit: int, Q=None) -> float:
    """Conditional MSE averaged over the exploration noise at a fixed design.

    ``noise`` is the residual variance (scalar) or covariance; ``gram`` is
    ``Z^T Z``.
    """
    b = np.atleast_2d(np.asarray(beta, dtype=float))
    Sigma = np.asarray(Sigma, dtype=float)
    x = np.asarray(x, dtype=float)
    Q = _qmat(Q, b.shape[0])
    noise = np.atleast_2d(np.asarray(noise, dtype=float))
    gram = np.asarray(gram, dtype=float)
    if np.linalg.matrix_rank(gram) < gram.shape[0]:
        raise np.linalg.LinAlgError("design Gram matrix is singular")
    ginv = np.linalg.inv(gram)
    tr_noise = float(np.sum((Q @ noise) * Q))
    W = Q @ b
    explained = float(np.sum((W @ Sigma) * W))
    return (explained + tr_noise * float(np.sum(Sigma * ginv))) / n_exploit + tr_noise * float(x @ ginv @ x)


def avg_conditional_mse_recycled(beta, Sigma, x, sigma2: float, lam, m: int, n_exploit: int, x_hat) -> float:
    """Asymptotic average conditional MSE of the recycled LRMC (scalar response).

    Terms: pooled exploitation variance, exploration error, and the squared
    drift of the exploration sample mean weighted by ``(m / (N + m))**2``.
    """
    beta = np.asarray(beta, dtype=float).ravel()
    x = np.asarray(x, dtype=float)
    N = n_exploit
    term1 = N / (N + m) ** 2 * float(beta @ np.asarray(Sigma) @ beta)
    term2 = sigma2 * float(x @ np.linalg.solve(np.asarray(lam), x)) / m
    drift = float((np.asarray(x_hat) - x) @ beta)
    return term1 + term2 + (m / (N + m)) ** 2 * drift ** 2


def k_coefficients(stats: SubsetStats, costs: CostSchedule, Q=None, alpha: float = 0.0,
                   c_ept: Optional[float] = None) -> tuple[float, float]:
    """Plug-in ``(k1, k2)`` for a fitted subset, with ``alpha`` added to ``k2``.

    With ``Q=None`` and a scalar response this is the plain MSE calculus;
    otherwise it is the Q-risk version. ``c_ept`` may be passed to skip the
    cost lookup.
    """
    tr_beta, tr_gamma = trace_risk_terms(stats, Q)
    k1 = (costs.c_ept(stats.S) if c_ept is None else c_ept) * tr_beta
    xh = stats.x_hat
    k2 = tr_gamma * float(xh @ stats.lambda_inv @ xh) + alpha
    return k1, k2


def optimal_round(B: float, c_epr: float, k1: float, k2: float) -> float:
    """Continuous loss-minimizing exploration round count."""
    if not (B > 0 and c_epr > 0):
        raise ValueError("budget and exploration cost must be positive")
    if not k2 > 0:
        raise ValueError(f"k2 must be positive, got {k2}")
    if k1 <= 0:
        return B / c_epr
    return B / (c_epr + math.sqrt(c_epr * k1 / k2))


def optimal_loss(B: float, c_epr: float, k1: float, k2: float) -> float:
    return (math.sqrt(k1) + math.sqrt(c_epr * k2)) ** 2 / B


def empirical_mse(B: float, m: float, c_epr: float, k1: float, k2: float) -> float:
    """Asymptotic loss of exploring ``m`` rounds; ``k1``, ``k2`` already cost-weighted."""
    limit = B / c_epr
    if k1 <= 0:
        if not 0 < m <= limit:
            raise ValueError(f"m={m} outside (0, {limit}]")
        return k2 / m
    if not 0 < m < limit:
        raise ValueError(f"m={m} outside (0, {limit})")
    return k1 / (B - c_epr * m) + k2 / m


def oracle_k_coefficients(spec: SyntheticLinearSpec, S: Sequence[int], Q=None,
                          costs: Optional[CostSchedule] = None) -> tuple[float, float, bool]:
    """Exact ``(k1, k2, degenerate)`` from the population quantities of ``S``."""
    costs = spec.costs if costs is None else costs
    o = oracle_quantities(spec, S)
    Qm = _qmat(Q, spec.k0)
    W = Qm @ o.beta
    k1 = costs.c_ept(o.S) * float(np.sum((W @ o.Sigma) * W))
    tr_noise = float(np.sum((Qm @ o.noise_cov) * Qm))
    # Lambda is singular for degenerate and for constant regressors
    lam_inv = np.linalg.pinv(o.lam) if o.degenerate or not np.any(o.Sigma) else np.linalg.inv(o.lam)
    k2 = tr_noise * float(o.x @ lam_inv @ o.x)
    return k1, k2, o.degenerate


def selection_key(loss: float, cost: float, S: tuple) -> tuple:
    """Ordering for argmin over subsets: loss, then exploitation cost, then indices."""
    return (loss, cost, S)


def oracle_best_subset(spec: SyntheticLinearSpec, costs: Optional[CostSchedule] = None, Q=None,
                       max_card: Optional[int] = None, budget: float = 1.0):
    """Exhaustive search for the subset with the smallest optimal loss.

    Returns ``(S_star, profiles)`` with one :class:`LossProfile` per subset
    with at most ``max_card`` members, in enumeration order. Subsets whose
    regressor covariance is singular are reported but not selected.
    """
    costs = spec.costs if costs is None else costs
    c_epr = costs.c_epr()
    profiles = []
    best = None
    for S in all_subsets(spec.n, max_card):
        k1, k2, degenerate = oracle_k_coefficients(spec, S, Q, costs)
        if k2 > 0:
            m_opt = optimal_round(budget, c_epr, k1, k2)
        else:
            m_opt = budget / c_epr if k1 == 0 else 0.0
        loss = optimal_loss(budget, c_epr, k1, k2)
        prof = LossProfile(S=S, k1=k1, k2=k2, m_opt=m_opt, opt_loss=loss, feasible=not degenerate)
        profiles.append(prof)
        if prof.feasible:
            key = selection_key(loss, costs.c_ept(S), S)
            if best is None or key < best[0]:
                best = (key, S)
    if best is None:
        raise ValueError("every subset is oracle-degenerate")
    return best[1], profiles
