"""
Model ensembles: cost schedules, joint/regressor sampling and oracle moments.

Subsets of low-fidelity models are 1-based index tuples, e.g. ``(1, 3)``
selects the first and third regressor.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import combinations
from typing import Callable, Optional, Protocol, Sequence

import numpy as np

from .errors import ConfigError, SamplingError

PSD_SLACK = 1e-10

Subset = tuple


def as_subset(S: Sequence[int], n: Optional[int] = None) -> tuple:
    """Normalize a subset to a sorted tuple of 1-based indices and validate it."""
    out = tuple(sorted(int(i) for i in S))
    if not out:
        raise ValueError("subset must be nonempty")
    if len(set(out)) != len(out):
        raise ValueError(f"subset {out} has repeated indices")
    if out[0] < 1 or (n is not None and out[-1] > n):
        raise ValueError(f"subset {out} has an index out of range 1..{n}")
    return out


def check_psd(mat: np.ndarray, name: str) -> None:
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConfigError(f"{name} must be square, got shape {mat.shape}")
    if not np.allclose(mat, mat.T, rtol=1e-12, atol=1e-14):
        raise ConfigError(f"{name} must be symmetric")
    if mat.size == 0:
        return
    eig = np.linalg.eigvalsh(mat)
    if eig[0] < -PSD_SLACK * max(eig[-1], 0.0):
        raise ConfigError(f"{name} is not positive semidefinite (min eigenvalue {eig[0]:.3e})")


@dataclass(frozen=True)
class CostSchedule:
    """Cost of one high-fidelity query ``c0`` and of each low-fidelity query ``c``."""

    c0: float
    c: tuple

    def __post_init__(self):
        c = tuple(float(v) for v in np.atleast_1d(self.c))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "c0", float(self.c0))
        if not self.c0 > 0 or not all(v > 0 for v in c):
            raise ConfigError("all costs must be strictly positive")

    @property
    def n(self) -> int:
        return len(self.c)

    def c_epr(self) -> float:
        """Cost of one joint exploration round: every model plus the high-fidelity one."""
        return self.c0 + float(sum(self.c))

    def c_ept(self, S: Sequence[int]) -> float:
        """Cost of one exploitation draw of the regressors in ``S``."""
        S = as_subset(S, self.n)
        return float(sum(self.c[i - 1] for i in S))


class ModelEnsemble(Protocol):
    """Anything that can be explored jointly and exploited per subset."""

    n: int
    k0: int
    costs: CostSchedule

    def sample_joint(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        ...

    def sample_regressors(self, S: Sequence[int], count: int, rng: np.random.Generator) -> np.ndarray:
        ...


def _sqrt_psd(mat: np.ndarray) -> np.ndarray:
    """Symmetric square root of a PSD matrix (eigenvalues clipped at zero)."""
    w, v = np.linalg.eigh(mat)
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.T


@dataclass(frozen=True)
class OracleStats:
    """Exact population quantities of the linear model restricted to ``S``.

    ``beta`` is ``k0 x (s+1)`` with the intercept first, ``noise_cov`` is the
    residual covariance ``k0 x k0`` and ``lam = x x^T + Sigma``.
    """

    S: tuple
    x: np.ndarray
    Sigma: np.ndarray
    beta: np.ndarray
    noise_cov: np.ndarray
    lam: np.ndarray
    degenerate: bool = False

    @property
    def sigma2(self) -> float:
        if self.noise_cov.shape != (1, 1):
            raise ValueError("sigma2 is only defined for scalar responses")
        return float(self.noise_cov[0, 0])


@dataclass(frozen=True, eq=False)
class SyntheticLinearSpec:
    """Linear-Gaussian (or affine-uniform) ensemble with closed-form oracles.

    The regressors ``X`` have mean ``meanX`` and covariance ``covX``; the
    response is ``f(Y) = beta @ (1, X) + eps`` with ``eps ~ N(0, noiseCov)``
    independent of ``X``.
    """

    meanX: np.ndarray
    covX: np.ndarray
    beta: np.ndarray
    noiseCov: np.ndarray
    costs: CostSchedule
    regressorLaw: str = "gaussian"
    seed: Optional[int] = None
    _xroot: np.ndarray = field(init=False, repr=False)
    _noiseroot: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        meanX = np.atleast_1d(np.asarray(self.meanX, dtype=float))
        n = meanX.shape[0]
        covX = np.asarray(self.covX, dtype=float).reshape(n, n)
        beta = np.asarray(self.beta, dtype=float)
        if beta.ndim == 1:
            beta = beta[None, :]
        if beta.shape[1] != n + 1:
            raise ConfigError(f"beta must have n+1={n + 1} columns, got {beta.shape[1]}")
        k0 = beta.shape[0]
        noise = np.asarray(self.noiseCov, dtype=float)
        if noise.ndim < 2:
            noise = noise.reshape(1, 1) if noise.size == 1 else np.diag(noise)
        if noise.shape != (k0, k0):
            raise ConfigError(f"noiseCov must be {k0}x{k0}, got {noise.shape}")
        check_psd(covX, "covX")
        check_psd(noise, "noiseCov")
        if self.costs.n != n:
            raise ConfigError(f"costs list {self.costs.n} low-fidelity models, meanX has {n}")
        if self.regressorLaw not in ("gaussian", "uniform-affine"):
            raise ConfigError(f"unknown regressorLaw {self.regressorLaw!r}")
        for name, val in (("meanX", meanX), ("covX", covX), ("beta", beta), ("noiseCov", noise)):
            val.setflags(write=False)
            object.__setattr__(self, name, val)
        xroot = _sqrt_psd(covX)
        if self.regressorLaw == "uniform-affine":
            # U ~ Unif[-1, 1] has variance 1/3
            xroot = xroot * np.sqrt(3.0)
        object.__setattr__(self, "_xroot", xroot)
        object.__setattr__(self, "_noiseroot", _sqrt_psd(noise))

    @property
    def n(self) -> int:
        return self.meanX.shape[0]

    @property
    def k0(self) -> int:
        return self.beta.shape[0]

    def mean_response(self) -> np.ndarray:
        """Exact E[f(Y)]."""
        return self.beta[:, 0] + self.beta[:, 1:] @ self.meanX

    def response_cov(self) -> np.ndarray:
        """Exact Cov[f(Y)]."""
        B = self.beta[:, 1:]
        return B @ self.covX @ B.T + self.noiseCov

    def _draw_base(self, count: int, rng: np.random.Generator) -> np.ndarray:
        if self.regressorLaw == "gaussian":
            return rng.standard_normal((count, self.n))
        return rng.uniform(-1.0, 1.0, (count, self.n))

    def sample_joint(self, count: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Draw ``count`` joint samples; returns ``(X, F)`` of shapes ``count x n`` and ``count x k0``."""
        if count < 1:
            raise ValueError("count must be at least 1")
        X = self.meanX + self._draw_base(count, rng) @ self._xroot
        eps = rng.standard_normal((count, self.k0)) @ self._noiseroot
        F = self.beta[:, 0] + X @ self.beta[:, 1:].T + eps
        return X, F

    def sample_regressors(self, S: Sequence[int], count: int, rng: np.random.Generator) -> np.ndarray:
        """Draw ``count`` regressor vectors restricted to ``S`` (``count x s``)."""
        S = as_subset(S, self.n)
        if count < 1:
            raise ValueError("count must be at least 1")
        idx = np.asarray(S) - 1
        if self.regressorLaw == "gaussian":
            # the S-marginal is Gaussian, so draw it directly
            root = _sqrt_psd(self.covX[np.ix_(idx, idx)])
            return self.meanX[idx] + rng.standard_normal((count, len(idx))) @ root
        return self.meanX[idx] + self._draw_base(count, rng) @ self._xroot[:, idx]

    def oracle(self, S: Sequence[int]) -> OracleStats:
        return oracle_quantities(self, S)

    # -- serialization -------------------------------------------------

    def to_dict(self) -> dict:
        k0 = self.k0
        return {
            "meanX": self.meanX.tolist(),
            "covX": self.covX.tolist(),
            "beta": self.beta.tolist(),
            "noiseCov": self.noiseCov.tolist() if k0 > 1 else float(self.noiseCov[0, 0]),
            "costs": {"c0": self.costs.c0, "c": list(self.costs.c)},
            "regressorLaw": self.regressorLaw,
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SyntheticLinearSpec":
        try:
            costs = CostSchedule(d["costs"]["c0"], d["costs"]["c"])
            return cls(
                meanX=d["meanX"],
                covX=d["covX"],
                beta=d["beta"],
                noiseCov=d["noiseCov"],
                costs=costs,
                regressorLaw=d.get("regressorLaw", "gaussian"),
                seed=d.get("seed"),
            )
        except KeyError as exc:
            raise ConfigError(f"ensemble spec is missing field {exc}") from None
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"malformed ensemble spec: {exc}") from None

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_json(cls, text: str) -> "SyntheticLinearSpec":
        return cls.from_dict(json.loads(text))


def sample_joint(ensemble: ModelEnsemble, count: int, stream: np.random.Generator):
    """Joint exploration draws; the caller charges ``count * c_epr``."""
    return ensemble.sample_joint(count, stream)


def sample_regressors(ensemble: ModelEnsemble, S: Sequence[int], count: int, stream: np.random.Generator):
    """Exploitation draws of the ``S`` coordinates; the caller charges ``count * c_ept(S)``."""
    return ensemble.sample_regressors(S, count, stream)


def oracle_quantities(spec: SyntheticLinearSpec, S: Sequence[int]) -> OracleStats:
    """Population least-squares projection of ``f(Y)`` onto ``(1, X_S)``.

    Uses Gaussian conditioning; for the uniform law this is the population
    projection, not the conditional mean. A singular nonzero ``covX[S, S]``
    makes the coefficients non-unique; the result is marked ``degenerate``
    and falls back to the minimum-norm solution. Constant regressors
    (``covX[S, S] == 0``) are not degenerate: the slope is zero.
    """
    S = as_subset(S, spec.n)
    idx = np.asarray(S) - 1
    s = len(S)
    C = spec.covX
    B = spec.beta[:, 1:]
    Css = C[np.ix_(idx, idx)]
    cross = B @ C[:, idx]  # Cov(f, X_S), k0 x s

    scale = max(np.abs(Css).max(), 1e-300)
    # constant regressors (Css == 0) pin the projection to the response mean,
    # which is well defined; only a nonzero singular Css is ambiguous
    degenerate = bool(np.any(Css) and np.linalg.matrix_rank(Css, tol=1e-12 * scale) < s)
    if s == spec.n:
        # the full model is the generating model
        beta_S = spec.beta.copy()
        noise_S = spec.noiseCov.copy()
    else:
        singular = degenerate or not np.any(Css)
        coef = np.linalg.pinv(Css) @ cross.T if singular else np.linalg.solve(Css, cross.T)
        coef = coef.T  # k0 x s
        intercept = spec.mean_response() - coef @ spec.meanX[idx]
        beta_S = np.column_stack([intercept, coef])
        # residual covariance: explained part removed from the full response covariance
        noise_S = spec.response_cov() - coef @ Css @ coef.T
        noise_S = 0.5 * (noise_S + noise_S.T)

    x = np.concatenate([[1.0], spec.meanX[idx]])
    Sigma = np.zeros((s + 1, s + 1))
    Sigma[1:, 1:] = Css
    lam = np.outer(x, x) + Sigma
    return OracleStats(S=S, x=x, Sigma=Sigma, beta=beta_S, noise_cov=noise_S, lam=lam,
                       degenerate=degenerate)


# Oracle statistics of the compliance ensembles (f(Y), X1..X6), square and L-shape domains.
TABLE_CALIBRATION = {
    "square": {
        "corr": (0.998, 0.992, 0.976, 0.940, 0.841, -0.146),
        "mean": (9.641, 9.197, 8.749, 8.287, 7.782, 7.141, 6.160),
        "std": (0.127, 0.113, 0.099, 0.086, 0.072, 0.052, 0.027),
        "cost": (4096, 1024, 256, 64, 16, 4, 1),
    },
    "L-shape": {
        "corr": (0.999, 0.995, 0.980, 0.932, 0.733, -0.344),
        "mean": (25.940, 24.256, 22.902, 21.180, 19.054, 16.072, 12.275),
        "std": (0.290, 0.242, 0.195, 0.149, 0.104, 0.061, 0.070),
        "cost": (4096, 1024, 256, 64, 16, 4, 1),
    },
}


def table_calibrated_spec(domain: str = "square", seed: Optional[int] = None) -> SyntheticLinearSpec:
    """One-factor Gaussian ensemble matching the tabulated means, deviations,
    costs and correlations with ``f(Y)``.

    Every model loads on a single common factor; ``corr(X_i, X_j)`` is then
    ``rho_i * rho_j``, which the table itself does not fix.
    """
    try:
        tab = TABLE_CALIBRATION[domain]
    except KeyError:
        raise ConfigError(f"unknown domain {domain!r}; choose from {sorted(TABLE_CALIBRATION)}") from None
    rho = np.array(tab["corr"])
    mean = np.array(tab["mean"])
    sd = np.array(tab["std"])
    # joint covariance of (f, X1..Xn)
    load = np.concatenate([[1.0], rho])
    corr = np.outer(load, load)
    np.fill_diagonal(corr, 1.0)
    cov = corr * np.outer(sd, sd)
    Cxx = cov[1:, 1:]
    cfx = cov[0, 1:]
    coef = np.linalg.solve(Cxx, cfx)
    intercept = mean[0] - coef @ mean[1:]
    noise = cov[0, 0] - cfx @ coef
    costs = CostSchedule(tab["cost"][0], tab["cost"][1:])
    return SyntheticLinearSpec(
        meanX=mean[1:], covX=Cxx, beta=np.concatenate([[intercept], coef]),
        noiseCov=max(noise, 0.0), costs=costs, seed=seed,
    )


class CallableEnsemble:
    """Ensemble backed by a user-supplied per-sample function.

    ``joint(rng)`` returns ``(x, f)`` with ``x`` of length ``n`` and ``f`` of
    length ``k0``. Regressor-only draws use ``regressors(rng)`` when given,
    otherwise the regressor part of a joint draw. Oracle quantities are not
    available for these ensembles.
    """

    def __init__(self, costs: CostSchedule, k0: int,
                 joint: Callable[[np.random.Generator], tuple],
                 regressors: Optional[Callable[[np.random.Generator], np.ndarray]] = None):
        self.costs = costs
        self.n = costs.n
        self.k0 = int(k0)
        self._joint = joint
        self._regressors = regressors

    def sample_joint(self, count, rng):
        if count < 1:
            raise ValueError("count must be at least 1")
        X = np.empty((count, self.n))
        F = np.empty((count, self.k0))
        for i in range(count):
            try:
                x, f = self._joint(rng)
                X[i] = x
                F[i] = f
            except Exception as exc:
                raise SamplingError(i, exc) from exc
        return X, F

    def sample_regressors(self, S, count, rng):
        S = as_subset(S, self.n)
        if count < 1:
            raise ValueError("count must be at least 1")
        idx = np.asarray(S) - 1
        out = np.empty((count, len(idx)))
        for i in range(count):
            try:
                x = self._regressors(rng) if self._regressors is not None else self._joint(rng)[0]
                out[i] = np.asarray(x, dtype=float)[idx]
            except Exception as exc:
                raise SamplingError(i, exc) from exc
        return out


def all_subsets(n: int, max_card: Optional[int] = None):
    max_card = n if max_card is None else max_card
    for k in range(1, max_card + 1):
        yield from combinations(range(1, n + 1), k)
