"""
Least-squares fits and moment estimates from exploration data.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .ensemble import as_subset

COND_THRESHOLD = 1e12


class ExplorationLog:
    """Append-only table of joint exploration rounds.

    ``rows`` is ``t x n`` (regressors), ``responses`` is ``t x k0``.
    """

    def __init__(self, n: int, k0: int, capacity: int = 64):
        self.n = int(n)
        self.k0 = int(k0)
        self._X = np.empty((capacity, self.n))
        self._F = np.empty((capacity, self.k0))
        self.t = 0

    @classmethod
    def from_arrays(cls, X, F) -> "ExplorationLog":
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.asarray(F, dtype=float)
        if F.ndim == 1:
            F = F[:, None]
        log = cls(X.shape[1], F.shape[1], capacity=max(len(X), 1))
        log.append(X, F)
        return log

    def append(self, X, F) -> None:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        F = np.asarray(F, dtype=float).reshape(len(X), self.k0)
        if X.shape[1] != self.n:
            raise ValueError(f"expected {self.n} regressors per round, got {X.shape[1]}")
        need = self.t + len(X)
        if need > len(self._X):
            cap = max(need, 2 * len(self._X))
            self._X = np.resize(self._X, (cap, self.n))
            self._F = np.resize(self._F, (cap, self.k0))
        self._X[self.t:need] = X
        self._F[self.t:need] = F
        self.t = need

    @property
    def rows(self) -> np.ndarray:
        v = self._X[: self.t]
        v.flags.writeable = False
        return v

    @property
    def responses(self) -> np.ndarray:
        v = self._F[: self.t]
        v.flags.writeable = False
        return v

    def head(self, t: int) -> "ExplorationLog":
        """Snapshot of the first ``t`` rounds."""
        return ExplorationLog.from_arrays(self._X[:t], self._F[:t])

    def to_csv(self, fh=None) -> Optional[str]:
        """Write ``x1..xn,y1..yk0`` rows; returns the text when ``fh`` is None."""
        buf = io.StringIO() if fh is None else fh
        w = csv.writer(buf, lineterminator="\n")
        w.writerow([f"x{i}" for i in range(1, self.n + 1)] + [f"y{j}" for j in range(1, self.k0 + 1)])
        for x, f in zip(self.rows, self.responses):
            w.writerow([repr(float(v)) for v in x] + [repr(float(v)) for v in f])
        return buf.getvalue() if fh is None else None

    @classmethod
    def from_csv(cls, fh) -> "ExplorationLog":
        if isinstance(fh, str):
            fh = io.StringIO(fh)
        reader = csv.reader(fh)
        header = next(reader)
        xcols = [i for i, h in enumerate(header) if h.startswith("x")]
        ycols = [i for i, h in enumerate(header) if h.startswith("y")]
        if len(xcols) + len(ycols) != len(header) or not ycols:
            raise ValueError(f"unrecognized exploration log header {header}")
        data = np.array([[float(v) for v in row] for row in reader if row], dtype=float)
        data = data.reshape(-1, len(header))
        log = cls(len(xcols), len(ycols), capacity=max(len(data), 1))
        if len(data):
            log.append(data[:, xcols], data[:, ycols])
        return log


@dataclass(frozen=True)
class SubsetStats:
    """Plug-in estimates for subset ``S`` after ``t`` exploration rounds.

    ``beta_hat`` is ``k0 x (s+1)``; ``gamma_hat`` is the residual covariance
    (``k0 x k0``) and ``sigma_hat_sq`` its scalar value when ``k0 == 1``.
    ``lambda_inv`` is ``(Z^T Z / t)^{-1}``. ``feasible`` is False when the
    design is numerically rank deficient.
    """

    S: tuple
    t: int
    beta_hat: np.ndarray
    x_hat: np.ndarray
    gamma_hat: np.ndarray
    sigma_hat_sq: Optional[float]
    lambda_inv: np.ndarray
    sigma_hat_mat: np.ndarray
    condition_estimate: float
    feasible: bool = True


def design_matrix(log: ExplorationLog, S: Sequence[int]) -> np.ndarray:
    """Intercept column followed by the ``S`` columns of the log (``t x (s+1)``)."""
    S = as_subset(S, log.n)
    if log.t < 1:
        raise ValueError("exploration log is empty")
    Z = np.empty((log.t, len(S) + 1))
    Z[:, 0] = 1.0
    Z[:, 1:] = log.rows[:, np.asarray(S) - 1]
    return Z


def _stats_from_factor(S, t, R, x_hat, sigma_hat_mat, log) -> SubsetStats:
    """Assemble :class:`SubsetStats` from the triangular factor of ``[Z_S, Y]``.

    For ``[Z_S, Y] = Q R`` with ``R = [[R_S, c], [0, R_y]]`` the coefficients
    solve ``R_S beta^T = c`` and the residual cross-product is ``R_y^T R_y``.
    """
    s = len(S)
    p = s + 1
    R_S = R[:p, :p]
    sv = np.linalg.svd(R_S, compute_uv=False)
    cond = float(sv[0] / sv[-1]) if sv[-1] > 0 else np.inf
    if cond > COND_THRESHOLD:
        return _degenerate_fit(log, S, x_hat, sigma_hat_mat, cond)
    beta = solve_triangular(R_S, R[:p, p:]).T
    Rinv = solve_triangular(R_S, np.eye(p))
    lambda_inv = t * (Rinv @ Rinv.T)
    R_y = R[p:, p:]
    gamma_hat = R_y.T @ R_y / (t - s - 1)
    gamma_hat = 0.5 * (gamma_hat + gamma_hat.T)
    sigma_hat_sq = float(gamma_hat[0, 0]) if gamma_hat.shape[0] == 1 else None
    return SubsetStats(S=S, t=t, beta_hat=beta, x_hat=x_hat, gamma_hat=gamma_hat,
                       sigma_hat_sq=sigma_hat_sq, lambda_inv=lambda_inv,
                       sigma_hat_mat=sigma_hat_mat, condition_estimate=cond)


def _degenerate_fit(log, S, x_hat, sigma_hat_mat, cond) -> SubsetStats:
    t = log.t
    s = len(S)
    Z = design_matrix(log, S)
    Y = log.responses
    lambda_inv = np.linalg.pinv(Z.T @ Z / t)
    feasible = not np.any(sigma_hat_mat)
    if feasible:
        # all regressor columns constant: the fit is the response mean
        beta = np.zeros((Y.shape[1], s + 1))
        beta[:, 0] = Y.mean(axis=0)
    else:
        beta = np.linalg.lstsq(Z, Y, rcond=None)[0].T
    resid = Y - Z @ beta.T
    gamma_hat = resid.T @ resid / (t - s - 1)
    sigma_hat_sq = float(gamma_hat[0, 0]) if Y.shape[1] == 1 else None
    return SubsetStats(S=S, t=t, beta_hat=beta, x_hat=x_hat, gamma_hat=gamma_hat,
                       sigma_hat_sq=sigma_hat_sq, lambda_inv=lambda_inv,
                       sigma_hat_mat=sigma_hat_mat, condition_estimate=cond, feasible=feasible)


def _moments(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x_hat = Z.mean(axis=0)
    D = Z - x_hat
    D[:, 0] = 0.0
    return x_hat, D.T @ D / (len(Z) - 1)


def _check_rounds(S, t):
    if t < len(S) + 2:
        raise ValueError(f"need at least {len(S) + 2} rounds to fit a {len(S)}-regressor model, have {t}")


def fit_subset(log: ExplorationLog, S: Sequence[int]) -> SubsetStats:
    """Least-squares fit of every response column on ``(1, X_S)`` via QR.

    Needs ``t >= s + 2`` so that the residual divisor ``t - s - 1`` is positive.
    A rank-deficient design whose regressor columns are all constant is
    still usable: the fit collapses to the response mean and the regressor
    covariance is zero. Any other rank deficiency returns ``feasible=False``.
    """
    S = as_subset(S, log.n)
    t = log.t
    _check_rounds(S, t)
    Z = design_matrix(log, S)
    x_hat, sigma_hat_mat = _moments(Z)
    R = np.linalg.qr(np.hstack([Z, log.responses]), mode="r")
    return _stats_from_factor(S, t, R, x_hat, sigma_hat_mat, log)


def fit_subsets(log: ExplorationLog, subsets) -> dict:
    """:func:`fit_subset` for many subsets sharing one factorization.

    ``[1, X, Y]`` is factored once; each subset then only needs the QR of
    the selected columns of that small triangular factor, done in stacks of
    equal-size subsets.
    """
    t = log.t
    n = log.n
    k0 = log.k0
    Zfull = np.empty((t, n + 1))
    Zfull[:, 0] = 1.0
    Zfull[:, 1:] = log.rows
    x_full, sig_full = _moments(Zfull)
    Rfull = np.linalg.qr(np.hstack([Zfull, log.responses]), mode="r")
    ycols = np.arange(n + 1, n + 1 + k0)

    subsets = [as_subset(S, n) for S in subsets]
    by_size = {}
    for S in subsets:
        _check_rounds(S, t)
        by_size.setdefault(len(S), []).append(S)

    out = {}
    for s, group in by_size.items():
        p = s + 1
        cols = np.array([(0,) + S for S in group])
        sel = np.concatenate([cols, np.broadcast_to(ycols, (len(group), k0))], axis=1)
        R = np.linalg.qr(np.moveaxis(Rfull[:, sel], 1, 0), mode="r")
        R_S = R[:, :p, :p]
        sv = np.linalg.svd(R_S, compute_uv=False)
        with np.errstate(divide="ignore"):
            cond = sv[:, 0] / sv[:, -1]
        ok = cond <= COND_THRESHOLD
        if ok.any():
            Rinv = np.linalg.inv(R_S[ok])
            beta = np.swapaxes(Rinv @ R[ok, :p, p:], 1, 2)
            lam_inv = t * (Rinv @ np.swapaxes(Rinv, 1, 2))
            R_y = R[ok, p:, p:]
            gam = np.swapaxes(R_y, 1, 2) @ R_y / (t - s - 1)
            gam = 0.5 * (gam + np.swapaxes(gam, 1, 2))
        j = 0
        for i, S in enumerate(group):
            c = cols[i]
            xh = x_full[c]
            sh = sig_full[c[:, None], c]
            if not ok[i]:
                out[S] = _degenerate_fit(log, S, xh, sh, float(cond[i]))
                continue
            g = gam[j]
            out[S] = SubsetStats(S=S, t=t, beta_hat=beta[j], x_hat=xh, gamma_hat=g,
                                 sigma_hat_sq=float(g[0, 0]) if k0 == 1 else None,
                                 lambda_inv=lam_inv[j], sigma_hat_mat=sh,
                                 condition_estimate=float(cond[i]))
            j += 1
    return {S: out[S] for S in subsets}


def trace_risk_terms(stats: SubsetStats, Q: Optional[np.ndarray] = None) -> tuple[float, float]:
    """``(tr(Sigma beta^T Q^T Q beta), tr(Q Gamma Q^T))`` for the fitted stats.

    ``Q=None`` is the identity on the response space.
    """
    beta = stats.beta_hat
    gamma = stats.gamma_hat
    k0 = beta.shape[0]
    if Q is None:
        W = beta
        tr_gamma = float(np.trace(gamma))
    else:
        Q = np.atleast_2d(np.asarray(Q, dtype=float))
        if Q.shape[1] != k0:
            raise ValueError(f"Q has {Q.shape[1]} columns, responses have dimension {k0}")
        if Q.shape[0] > k0:
            # stay in k0 x k0 rather than q x q
            G = Q.T @ Q
            tr_beta = float(np.sum((beta @ stats.sigma_hat_mat @ beta.T) * G))
            return tr_beta, float(np.sum(G * gamma))
        W = Q @ beta
        tr_gamma = float(np.sum((Q @ gamma) * Q))
    tr_beta = float(np.sum((W @ stats.sigma_hat_mat) * W))
    return tr_beta, tr_gamma
