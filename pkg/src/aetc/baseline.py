"""
Single-fidelity Monte Carlo under a fixed budget.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ensemble import ModelEnsemble
from .errors import InfeasibleBudgetError
from .policy import EXPLOIT_CHUNK, affordable


@dataclass(frozen=True)
class McEstimate:
    value: np.ndarray
    n_samples: int
    budget_spent: float

    def to_dict(self) -> dict:
        return {"value": [float(v) for v in self.value], "nSamples": self.n_samples,
                "budgetSpent": self.budget_spent}


def run_mc(ensemble: ModelEnsemble, budget: float, seed: int) -> McEstimate:
    """Average of ``floor(budget / c0)`` high-fidelity draws; leftover budget is unspent."""
    c0 = ensemble.costs.c0
    if budget < c0:
        raise InfeasibleBudgetError(f"budget {budget} cannot afford one high-fidelity sample at cost {c0}")
    N = affordable(budget, c0)
    n_chunks = -(-N // EXPLOIT_CHUNK)
    total = np.zeros(ensemble.k0)
    for i, child in enumerate(np.random.SeedSequence(seed).spawn(n_chunks)):
        size = min(EXPLOIT_CHUNK, N - i * EXPLOIT_CHUNK)
        _, F = ensemble.sample_joint(size, np.random.default_rng(child))
        total += F.sum(axis=0)
    return McEstimate(value=total / N, n_samples=N, budget_spent=N * c0)
