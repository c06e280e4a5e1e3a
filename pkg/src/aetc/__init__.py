"""Multifidelity mean estimation with adaptive explore-then-commit (AETC)."""

from .baseline import McEstimate, run_mc
from .ensemble import (CallableEnsemble, CostSchedule, OracleStats, SyntheticLinearSpec, oracle_quantities,
                       sample_joint, sample_regressors, table_calibrated_spec)
from .errors import AetcError, ConfigError, InfeasibleBudgetError, NumericalFailure, SamplingError
from .harness import TrialReport, TrialSpec, derive_seed, oracle_report, run_trials
from .losscalc import (LossProfile, LrmcEstimate, avg_conditional_mse, avg_conditional_mse_recycled,
                       conditional_mse, empirical_mse, k_coefficients, lrmc, lrmc_recycled,
                       oracle_best_subset, oracle_k_coefficients, optimal_loss, optimal_round)
from .policy import AetcConfig, AetcResult, enumerate_subsets, run_aetc, run_etc_fixed
from .regress import ExplorationLog, SubsetStats, design_matrix, fit_subset, trace_risk_terms

__version__ = "0.1.0"
