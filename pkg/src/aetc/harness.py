"""
Repeated-trial experiments over budget grids and oracle reports.

Per-trial seeds come from ``derive_seed(base_seed, method, budget_index,
trial_index)``, a :class:`numpy.random.SeedSequence` hash of those four
values, so results do not depend on method order or worker count. The
``aetc-re`` method shares the ``aetc`` seed tag: both see the same
exploration and exploitation draws and differ only by sample recycling.
"""

from __future__ import annotations

import csv
import io
import json
import math
import zlib
from collections import Counter
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .baseline import run_mc
from .ensemble import SyntheticLinearSpec, as_subset
from .errors import AetcError, ConfigError
from .losscalc import oracle_best_subset, oracle_k_coefficients, optimal_round
from .policy import AetcConfig, run_aetc, run_etc_fixed

METHODS = ("aetc", "aetc-re", "mc", "etc-fixed")
QUANTILES = (0.05, 0.50, 0.95)

_SEED_TAGS = {"aetc": "aetc", "aetc-re": "aetc", "mc": "mc", "etc-fixed": "etc-fixed"}


def derive_seed(base_seed: int, method: str, budget_index: int, trial: int) -> int:
    tag = zlib.crc32(_SEED_TAGS.get(method, method).encode())
    seq = np.random.SeedSequence([int(base_seed) & (2**64 - 1), tag, budget_index, trial])
    return int(seq.generate_state(1, np.uint64)[0])


def format_subset(S: Optional[Sequence[int]]) -> str:
    return " ".join(map(str, S)) if S else "-"


@dataclass
class TrialSpec:
    ensemble: object
    budgets: Sequence[float]
    trials_per_budget: int
    methods: Sequence[str] = ("aetc", "mc")
    aetc: AetcConfig = field(default_factory=lambda: AetcConfig(budget=1.0))
    base_seed: int = 0
    ground_truth: Optional[np.ndarray] = None
    etc_fixed_S: Optional[tuple] = None
    etc_fixed_m: Optional[int] = None

    def __post_init__(self):
        self.budgets = [float(b) for b in self.budgets]
        if self.trials_per_budget < 1:
            raise ConfigError("trialsPerBudget must be at least 1")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])) or not self.budgets:
            raise ConfigError("budgets must be a nonempty strictly increasing list")
        unknown = set(self.methods) - set(METHODS)
        if unknown:
            raise ConfigError(f"unknown methods {sorted(unknown)}; choose from {METHODS}")
        if self.ground_truth is None:
            if not isinstance(self.ensemble, SyntheticLinearSpec):
                raise ConfigError("groundTruth is required for non-synthetic ensembles")
            self.ground_truth = self.ensemble.mean_response()
        self.ground_truth = np.atleast_1d(np.asarray(self.ground_truth, dtype=float))

    def echo(self) -> dict:
        ens = self.ensemble.to_dict() if isinstance(self.ensemble, SyntheticLinearSpec) else repr(self.ensemble)
        a = self.aetc
        return {
            "ensemble": ens,
            "budgets": list(self.budgets),
            "trialsPerBudget": self.trials_per_budget,
            "methods": list(self.methods),
            "aetc": {"maxCard": a.max_card, "regBase": a.reg_base,
                     "Q": None if a.Q is None else a.Q.tolist()},
            "baseSeed": self.base_seed,
            "groundTruth": self.ground_truth.tolist(),
            "etcFixed": {"S": list(self.etc_fixed_S) if self.etc_fixed_S else None, "m": self.etc_fixed_m},
        }


@dataclass(frozen=True)
class TrialRecord:
    method: str
    budget: float
    trial: int
    seed: int
    sq_error: float
    S: Optional[tuple]
    m_explore: Optional[int]
    n_exploit: Optional[int]
    failure: Optional[str] = None


@dataclass
class TrialReport:
    cells: list
    records: list
    spec: TrialSpec
    limiting_S: Optional[tuple] = None

    def cell(self, method: str, budget: float) -> dict:
        for c in self.cells:
            if c["method"] == method and c["budget"] == float(budget):
                return c
        raise KeyError((method, budget))

    def errors(self, method: str, budget: float) -> np.ndarray:
        return np.array([r.sq_error for r in self.records
                         if r.method == method and r.budget == float(budget) and r.failure is None])

    def to_csv(self) -> str:
        cols = ["method", "budget", "trials", "failures", "mseMean", "mseQ05", "mseQ50", "mseQ95",
                "medianMExplore", "medianNExploit", "limitingFreq", "subsetFreq"]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for c in self.cells:
            freq = ";".join(f"{k}:{v!r}" for k, v in c["subsetFreq"].items())
            w.writerow([c["method"], repr(c["budget"]), c["trials"], c["failures"]]
                       + [repr(c[k]) for k in cols[4:11]] + [freq])
        return buf.getvalue()

    def trials_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["method", "budget", "trial", "seed", "sqError", "S", "mExplore", "nExploit", "failure"])
        for r in self.records:
            w.writerow([r.method, repr(r.budget), r.trial, r.seed, repr(r.sq_error), format_subset(r.S),
                        "" if r.m_explore is None else r.m_explore,
                        "" if r.n_exploit is None else r.n_exploit, r.failure or ""])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {"spec": self.spec.echo(),
                "limitingS": list(self.limiting_S) if self.limiting_S else None,
                "files": ["report.csv", "trials.csv"]}

    def write(self, out_dir) -> None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.csv").write_text(self.to_csv())
        (out / "trials.csv").write_text(self.trials_csv())
        (out / "manifest.json").write_text(json.dumps(self.manifest(), indent=2) + "\n")


def _q_error(est, truth, Q) -> float:
    d = np.asarray(est, dtype=float) - truth
    if Q is not None:
        d = Q @ d
    return float(d @ d)


def _etc_fixed_plan(spec: TrialSpec, budget: float):
    if spec.etc_fixed_S is not None and spec.etc_fixed_m is not None:
        return as_subset(spec.etc_fixed_S), int(spec.etc_fixed_m)
    ens = spec.ensemble
    if not isinstance(ens, SyntheticLinearSpec):
        raise ConfigError("etc-fixed needs etcFixed.S and etcFixed.m for non-synthetic ensembles")
    S = as_subset(spec.etc_fixed_S) if spec.etc_fixed_S is not None else \
        oracle_best_subset(ens, Q=spec.aetc.Q, max_card=spec.aetc.max_card)[0]
    if spec.etc_fixed_m is not None:
        return S, int(spec.etc_fixed_m)
    k1, k2, _ = oracle_k_coefficients(ens, S, spec.aetc.Q)
    m = math.floor(optimal_round(budget, ens.costs.c_epr(), k1, k2)) if k2 > 0 else len(S) + 2
    return S, max(m, len(S) + 2)


def run_one(spec: TrialSpec, method: str, budget_index: int, trial: int) -> TrialRecord:
    budget = spec.budgets[budget_index]
    seed = derive_seed(spec.base_seed, method, budget_index, trial)
    Q = spec.aetc.Q
    try:
        if method in ("aetc", "aetc-re"):
            cfg = replace(spec.aetc, budget=budget, seed=seed, recycle=(method == "aetc-re"))
            res = run_aetc(spec.ensemble, cfg)
            return TrialRecord(method, budget, trial, seed, _q_error(res.estimate, spec.ground_truth, Q),
                               res.chosen_S, res.m_explore, res.n_exploit)
        if method == "mc":
            res = run_mc(spec.ensemble, budget, seed)
            return TrialRecord(method, budget, trial, seed, _q_error(res.value, spec.ground_truth, Q),
                               None, 0, res.n_samples)
        S, m = _etc_fixed_plan(spec, budget)
        res = run_etc_fixed(spec.ensemble, S, m, budget, seed)
        return TrialRecord(method, budget, trial, seed, _q_error(res.value, spec.ground_truth, Q),
                           res.S, res.m_explore, res.n_exploit)
    except AetcError as exc:
        return TrialRecord(method, budget, trial, seed, math.nan, None, None, None,
                           failure=f"{type(exc).__name__}: {exc}")


def _aggregate(method, budget, records, limiting_S) -> dict:
    ok = [r for r in records if r.failure is None]
    err = np.array([r.sq_error for r in ok])
    nan = math.nan
    q = np.quantile(err, QUANTILES) if len(err) else [nan] * 3
    counts = Counter(format_subset(r.S) for r in ok)
    freq = {k: counts[k] / len(ok) for k in sorted(counts)}
    lim = nan
    if limiting_S is not None and method in ("aetc", "aetc-re") and ok:
        lim = sum(r.S == limiting_S for r in ok) / len(ok)
    m_vals = [r.m_explore for r in ok if r.m_explore is not None]
    n_vals = [r.n_exploit for r in ok if r.n_exploit is not None]
    return {
        "method": method, "budget": budget, "trials": len(records), "failures": len(records) - len(ok),
        "mseMean": float(err.mean()) if len(err) else nan,
        "mseQ05": float(q[0]), "mseQ50": float(q[1]), "mseQ95": float(q[2]),
        "medianMExplore": float(np.median(m_vals)) if m_vals else nan,
        "medianNExploit": float(np.median(n_vals)) if n_vals else nan,
        "limitingFreq": lim, "subsetFreq": freq,
    }


def run_trials(spec: TrialSpec) -> TrialReport:
    """Run every (method, budget, trial) cell and aggregate squared errors."""
    limiting = None
    if isinstance(spec.ensemble, SyntheticLinearSpec):
        limiting = oracle_best_subset(spec.ensemble, Q=spec.aetc.Q, max_card=spec.aetc.max_card)[0]
    records, cells = [], []
    for method in spec.methods:
        for bi, budget in enumerate(spec.budgets):
            recs = [run_one(spec, method, bi, i) for i in range(spec.trials_per_budget)]
            records.extend(recs)
            cells.append(_aggregate(method, budget, recs, limiting))
    return TrialReport(cells=cells, records=records, spec=spec, limiting_S=limiting)


def oracle_report(spec: SyntheticLinearSpec, budget: float = 1.0, Q=None, max_card: Optional[int] = None):
    """Per-subset oracle loss table; returns ``(S_star, profiles, csv_text)``."""
    S_star, profiles = oracle_best_subset(spec, Q=Q, max_card=max_card, budget=budget)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["S", "k1", "k2", "mOpt", "optLoss", "feasible"])
    for p in profiles:
        w.writerow([format_subset(p.S), repr(p.k1), repr(p.k2), repr(p.m_opt), repr(p.opt_loss),
                    int(p.feasible)])
    return S_star, profiles, buf.getvalue()
