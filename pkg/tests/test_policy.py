from math import comb

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from aetc import (AetcConfig, CallableEnsemble, ConfigError, CostSchedule, InfeasibleBudgetError,
                  NumericalFailure, SyntheticLinearSpec, enumerate_subsets, oracle_best_subset,
                  oracle_k_coefficients, optimal_loss, optimal_round, run_aetc, run_etc_fixed)
from aetc.policy import EXPLOIT_CHUNK, _exploit_mean, affordable
from aetc.regress import ExplorationLog, fit_subset


def point_mass(noise=0.0):
    return SyntheticLinearSpec(meanX=[1.0, 2.0], covX=np.zeros((2, 2)), beta=[0.0, 3.0, 4.0],
                               noiseCov=noise, costs=CostSchedule(10, (1, 1)))


def test_enumerate_subsets():
    assert enumerate_subsets(2, 2) == [(1,), (2,), (1, 2)]
    assert enumerate_subsets(3, 1) == [(1,), (2,), (3,)]
    assert len(enumerate_subsets(12, 5)) == sum(comb(12, j) for j in range(1, 6)) == 1585
    with pytest.raises(ValueError):
        enumerate_subsets(3, 4)


@pytest.mark.parametrize("kw", [dict(budget=0), dict(budget=10, max_card=0), dict(budget=10, reg_base=1.0)])
def test_config_validation(kw):
    with pytest.raises(ConfigError):
        AetcConfig(**kw)


def test_alpha_decreases():
    cfg = AetcConfig(budget=1.0, reg_base=4.0)
    assert cfg.alpha(3) == 4.0 ** -3
    assert all(cfg.alpha(t + 1) < cfg.alpha(t) for t in range(1, 50))


@settings(max_examples=300, deadline=None)
@given(st.floats(0, 1e9), st.floats(1e-3, 1e4))
def test_affordable_is_floor(remaining, cost):
    k = affordable(remaining, cost)
    assert k >= 0
    assert k * cost <= remaining
    assert (k + 1) * cost > remaining


def test_affordable_exact_multiples():
    # 3 * 0.1 rounds to just above 0.3, so only two draws fit
    assert affordable(0.3, 0.1) == 2
    assert affordable(0.75, 0.25) == 3
    assert affordable(108 * 7, 108) == 7


def test_point_mass_stops_at_first_decision_round():
    res = run_aetc(point_mass(), AetcConfig(budget=1000, seed=1))
    assert res.m_explore == 4
    assert len(res.trail) == 1
    np.testing.assert_array_equal(res.estimate, [11.0])
    assert res.flags == []


def test_run_invariants(spec4):
    B = 2e4
    c_epr = spec4.costs.c_epr()
    for seed in range(5):
        res = run_aetc(spec4, AetcConfig(budget=B, seed=seed))
        c_ept = spec4.costs.c_ept(res.chosen_S)
        assert res.m_explore >= spec4.n + 2
        assert len(res.trail) == res.m_explore - (spec4.n + 1)
        assert res.budget_spent == res.m_explore * c_epr + res.n_exploit * c_ept
        assert res.budget_spent <= B
        assert res.n_exploit == affordable(B - res.m_explore * c_epr, c_ept)
        # stopping rule read off the trail
        assert res.trail[-1].m_opt <= res.trail[-1].t == res.m_explore
        assert all(r.m_opt > r.t for r in res.trail[:-1])
        assert [r.t for r in res.trail] == list(range(spec4.n + 2, res.m_explore + 1))
        assert res.trail[-1].S == res.chosen_S
        assert all(r.alpha == 4.0 ** -r.t for r in res.trail)


def test_determinism(spec4):
    a = run_aetc(spec4, AetcConfig(budget=2e4, seed=42))
    b = run_aetc(spec4, AetcConfig(budget=2e4, seed=42))
    assert a.to_json() == b.to_json()
    assert a.trail_csv() == b.trail_csv()
    c = run_aetc(spec4, AetcConfig(budget=2e4, seed=43))
    assert c.to_json() != a.to_json()


def test_budget_exhaustion_and_empty_exploitation():
    spec = point_mass(noise=1.0)  # k1 = 0 while k2 > 0: never stops early
    res = run_aetc(spec, AetcConfig(budget=12 * 40 + 5, seed=0))
    assert res.m_explore == 40
    assert "budget-exhausted" in res.flags
    assert res.n_exploit == 5
    res = run_aetc(spec, AetcConfig(budget=12 * 40, seed=0))
    # here B / c_epr is exactly M, so the stopping rule itself fires at M
    assert res.flags == ["no-exploitation-budget"]
    assert res.m_explore == 40
    assert res.n_exploit == 0 and res.budget_spent == 480
    assert np.isfinite(res.estimate).all()


def test_warmup_budget_error(spec4):
    with pytest.raises(InfeasibleBudgetError):
        run_aetc(spec4, AetcConfig(budget=108 * 5.5))
    run_aetc(spec4, AetcConfig(budget=108 * 6))


def test_config_mismatch_errors(spec4, vspec):
    with pytest.raises(ConfigError):
        run_aetc(spec4, AetcConfig(budget=1e4, max_card=5))
    with pytest.raises(ConfigError):
        run_aetc(vspec, AetcConfig(budget=1e4, Q=np.eye(2)))


def test_collinear_pair_is_skipped():
    def joint(rng):
        x = rng.standard_normal()
        return np.array([x, 2 * x]), [x + rng.standard_normal()]

    ens = CallableEnsemble(CostSchedule(10, (1, 1)), 1, joint)
    res = run_aetc(ens, AetcConfig(budget=600, seed=0))
    assert len(res.chosen_S) == 1
    assert all(r.n_feasible == 2 for r in res.trail)


def test_all_subsets_infeasible_is_reported():
    # nearly constant but not constant columns: every design is ill-conditioned
    def joint(rng):
        z = rng.standard_normal(2)
        return 1e6 + 1e-9 * z, [rng.standard_normal()]

    ens = CallableEnsemble(CostSchedule(10, (1, 1)), 1, joint)
    with pytest.raises(NumericalFailure, match="rank-deficient"):
        run_aetc(ens, AetcConfig(budget=120, seed=0))


def test_vector_response_run(vspec):
    res = run_aetc(vspec, AetcConfig(budget=2e4, seed=3, Q=np.array([[1.0, 0.0, -1.0]])))
    assert res.estimate.shape == (3,)
    assert res.budget_spent <= 2e4
    res_id = run_aetc(vspec, AetcConfig(budget=2e4, seed=3))
    res_eye = run_aetc(vspec, AetcConfig(budget=2e4, seed=3, Q=np.eye(3)))
    assert res_id.chosen_S == res_eye.chosen_S and res_id.m_explore == res_eye.m_explore
    np.testing.assert_allclose(res_id.estimate, res_eye.estimate, rtol=1e-12)


def test_max_card_restricts_choice(spec4):
    res = run_aetc(spec4, AetcConfig(budget=2e4, seed=0, max_card=1))
    assert len(res.chosen_S) == 1
    assert res.trail[0].n_feasible == 4


def test_recycling_pairs_with_plain_run(spec4):
    a = run_aetc(spec4, AetcConfig(budget=2e4, seed=5))
    b = run_aetc(spec4, AetcConfig(budget=2e4, seed=5, recycle=True))
    assert (a.chosen_S, a.m_explore, a.n_exploit) == (b.chosen_S, b.m_explore, b.n_exploit)
    # rebuild both estimates from the documented stream layout
    explore_seq, exploit_seq = np.random.SeedSequence(5).spawn(2)
    rng = np.random.default_rng(explore_seq)
    log = ExplorationLog(4, 1)
    log.append(*spec4.sample_joint(6, rng))
    for _ in range(a.m_explore - 6):
        log.append(*spec4.sample_joint(1, rng))
    beta = fit_subset(log, a.chosen_S).beta_hat
    xbar = _exploit_mean(spec4, a.chosen_S, a.n_exploit, exploit_seq)
    np.testing.assert_allclose(a.estimate, beta @ np.concatenate([[1.0], xbar]), rtol=1e-12)
    explo = log.rows[:, np.asarray(a.chosen_S) - 1]
    pooled = (a.n_exploit * xbar + explo.sum(axis=0)) / (a.n_exploit + a.m_explore)
    np.testing.assert_allclose(b.estimate, beta @ np.concatenate([[1.0], pooled]), rtol=1e-12)


def test_exploit_mean_chunks_are_independent_substreams(spec4):
    seq = np.random.SeedSequence(9)
    count = EXPLOIT_CHUNK + 10
    got = _exploit_mean(spec4, (1, 2), count, seq)
    children = np.random.SeedSequence(9).spawn(2)
    a = spec4.sample_regressors((1, 2), EXPLOIT_CHUNK, np.random.default_rng(children[0]))
    b = spec4.sample_regressors((1, 2), 10, np.random.default_rng(children[1]))
    np.testing.assert_allclose(got, (a.sum(axis=0) + b.sum(axis=0)) / count, rtol=1e-12)


def test_etc_fixed_preconditions(spec4):
    with pytest.raises(ConfigError):
        run_etc_fixed(spec4, (1, 2), 3, 1e4, 0)
    with pytest.raises(InfeasibleBudgetError):
        run_etc_fixed(spec4, (1, 2), 100, 1e4, 0)
    # exploring leaves less than one exploitation draw
    with pytest.raises(InfeasibleBudgetError):
        run_etc_fixed(spec4, (1, 2), 10, 108 * 10 + 5, 0)
    res = run_etc_fixed(spec4, (1, 2), 4, 1e4, 0)
    assert np.isfinite(res.value).all()
    assert res.budget_spent == 4 * 108 + res.n_exploit * 6 <= 1e4


def test_etc_fixed_near_oracle_loss(spec4):
    B = 2e4
    S = (1, 2)
    k1, k2, _ = oracle_k_coefficients(spec4, S)
    m = int(optimal_round(B, 108.0, k1, k2))
    truth = spec4.mean_response()[0]
    err = [(run_etc_fixed(spec4, S, m, B, seed).value[0] - truth) ** 2 for seed in range(500)]
    ratio = np.mean(err) / optimal_loss(B, 108.0, k1, k2)
    assert 1 / 1.5 <= ratio <= 1.5


@pytest.mark.slow
def test_exploration_rounds_scale_with_budget(spec4):
    m1 = np.median([run_aetc(spec4, AetcConfig(budget=2.5e4, seed=s)).m_explore for s in range(100)])
    m4 = np.median([run_aetc(spec4, AetcConfig(budget=1e5, seed=s)).m_explore for s in range(100)])
    assert 3.2 <= m4 / m1 <= 4.8


@pytest.mark.slow
def test_two_model_selection():
    spec = SyntheticLinearSpec(meanX=[1.0, 0.0], covX=[[1.0, 0.3], [0.3, 1.0]], beta=[0.0, 1.0, 0.0],
                               noiseCov=0.1, costs=CostSchedule(100.0, (1.0, 20.0)))
    S_star, _ = oracle_best_subset(spec)
    assert S_star == (1,)
    B = 5e4
    k1, k2, _ = oracle_k_coefficients(spec, S_star)
    assert optimal_round(B, spec.costs.c_epr(), k1, k2) >= 200
    hits = sum(run_aetc(spec, AetcConfig(budget=B, seed=s)).chosen_S == S_star for s in range(100))
    assert hits >= 90
