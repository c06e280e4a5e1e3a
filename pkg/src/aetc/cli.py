"""
Command-line entry point: ``aetc {run,trials,oracle,mc}``.

The config file is JSON with an ``ensemble`` section (the synthetic spec)
and optional ``aetc``, ``trials`` and ``mc`` sections. A bare ensemble spec
is also accepted. Exit codes: 0 success, 2 config error, 3 infeasible
budget, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .baseline import run_mc
from .ensemble import SyntheticLinearSpec
from .errors import AetcError, ConfigError
from .harness import TrialSpec, oracle_report, run_trials
from .policy import AetcConfig, run_aetc


def load_config(path) -> dict:
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    if "ensemble" not in doc:
        doc = {"ensemble": doc}
    return doc


def _ensemble(doc) -> SyntheticLinearSpec:
    return SyntheticLinearSpec.from_dict(doc["ensemble"])


def _aetc_config(doc, budget=None, seed=None, recycle=False) -> AetcConfig:
    a = doc.get("aetc", {})
    budget = a.get("budget") if budget is None else budget
    if budget is None:
        raise ConfigError("no budget given (aetc.budget or --budget)")
    if seed is None:
        seed = a.get("seed", doc["ensemble"].get("seed") or 0)
    return AetcConfig(budget=float(budget), max_card=a.get("maxCard"), reg_base=float(a.get("regBase", 4.0)),
                      recycle=bool(a.get("recycle", False) or recycle), Q=a.get("Q"), seed=int(seed))


def _dump(obj) -> str:
    return json.dumps(obj, indent=2) + "\n"


def cmd_run(args, doc):
    cfg = _aetc_config(doc, budget=args.budget, seed=args.seed, recycle=args.recycle)
    res = run_aetc(_ensemble(doc), cfg)
    sys.stdout.write(_dump(res.to_dict()))


def cmd_trials(args, doc):
    t = doc.get("trials")
    if t is None:
        raise ConfigError("config has no 'trials' section")
    try:
        fixed = t.get("etcFixed") or {}
        spec = TrialSpec(
            ensemble=_ensemble(doc),
            budgets=t["budgets"],
            trials_per_budget=int(t.get("trialsPerBudget", 200)),
            methods=tuple(t.get("methods", ("aetc", "mc"))),
            aetc=_aetc_config(doc, budget=1.0, seed=0),
            base_seed=int(t.get("baseSeed", 0)),
            ground_truth=t.get("groundTruth"),
            etc_fixed_S=tuple(fixed["S"]) if fixed.get("S") else None,
            etc_fixed_m=fixed.get("m"),
        )
    except KeyError as exc:
        raise ConfigError(f"trials section is missing {exc}") from None
    report = run_trials(spec)
    report.write(args.out)
    sys.stdout.write(report.to_csv())


def cmd_oracle(args, doc):
    spec = _ensemble(doc)
    a = doc.get("aetc", {})
    max_card = args.max_card if args.max_card is not None else a.get("maxCard")
    Q = a.get("Q")
    budget = args.budget if args.budget is not None else a.get("budget", 1.0)
    S_star, _, text = oracle_report(spec, budget=float(budget), Q=None if Q is None else np.asarray(Q, float),
                                    max_card=max_card)
    sys.stdout.write(text)


def cmd_mc(args, doc):
    seed = args.seed if args.seed is not None else doc.get("mc", {}).get("seed", doc["ensemble"].get("seed") or 0)
    res = run_mc(_ensemble(doc), args.budget, int(seed))
    sys.stdout.write(_dump(res.to_dict()))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="aetc", description="Budget-limited multifidelity mean estimation.")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="one AETC run; result JSON on stdout")
    r.add_argument("--config", required=True)
    r.add_argument("--seed", type=int)
    r.add_argument("--budget", type=float)
    r.add_argument("--recycle", action="store_true")
    r.set_defaults(func=cmd_run)

    t = sub.add_parser("trials", help="repeated trials over a budget grid")
    t.add_argument("--config", required=True)
    t.add_argument("--out", required=True)
    t.set_defaults(func=cmd_trials)

    o = sub.add_parser("oracle", help="per-subset oracle loss table as CSV")
    o.add_argument("--config", required=True)
    o.add_argument("--max-card", type=int)
    o.add_argument("--budget", type=float)
    o.set_defaults(func=cmd_oracle)

    m = sub.add_parser("mc", help="classical Monte Carlo baseline")
    m.add_argument("--config", required=True)
    m.add_argument("--budget", type=float, required=True)
    m.add_argument("--seed", type=int)
    m.set_defaults(func=cmd_mc)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        doc = load_config(args.config)
        args.func(args, doc)
    except AetcError as exc:
        print(f"aetc: {exc}", file=sys.stderr)
        return exc.exit_code
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"aetc: numerical failure: {exc}", file=sys.stderr)
        return 4
    except (ValueError, TypeError) as exc:
        print(f"aetc: invalid input: {exc}", file=sys.stderr)
        return ConfigError.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
