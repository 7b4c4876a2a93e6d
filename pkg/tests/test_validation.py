import math

import numpy as np
import pytest
from scipy import stats

from hybridmpp import (ConstantRate, ContinuousStates, DiscreteStates, DiscreteTable,
                       ExponentialKernel, MarkovRate, ModelSpec, SimConfig, StateDependentHawkes,
                       Trajectory, constant_increments, from_enumeration, gaussian_increments,
                       simulate)
from hybridmpp.errors import InsufficientEvents, SingularSystem, UnstableModel
from hybridmpp.validation import (compensator, compound_poisson_check, ctmc_stationary_oracle,
                                  hawkes_mean_rate_oracle, ks_exp1, rescaled_residuals,
                                  state_occupancy, transition_frequency_test)

from helpers import random_model, random_table

FLIP = DiscreteTable([[[0.0, 1.0]], [[1.0, 0.0]]])


# -- KS


def test_ks_calibration_under_the_null():
    rng = np.random.default_rng(0)
    passes = sum(ks_exp1(rng.exponential(size=10_000)).passed for _ in range(200))
    assert passes >= 194  # nominal 99%


def test_ks_power_against_wrong_rate():
    rng = np.random.default_rng(1)
    assert not any(ks_exp1(rng.exponential(0.5, size=10_000)).passed for _ in range(200))


def test_ks_degenerate_and_small_samples():
    r = ks_exp1(np.zeros(100))
    assert r.statistic == 1.0 and not r.passed
    assert not ks_exp1(np.ones(10)).reliable
    with pytest.raises(InsufficientEvents):
        ks_exp1([])


def test_ks_statistic_matches_scipy():
    x = np.random.default_rng(2).exponential(size=500)
    assert ks_exp1(x).statistic == pytest.approx(stats.kstest(x, "expon").statistic, abs=1e-14)


# -- compensator and residuals


def test_poisson_compensator_is_linear():
    m = ModelSpec([1.0, 1.0], DiscreteStates(1), DiscreteTable.identity(1, 2),
                  ConstantRate([2.0, 0.5]))
    tr = simulate(m, SimConfig(100.0, seed=1)).trajectory
    last = tr.times[-1]
    assert np.allclose(compensator(tr, m), [2.0 * last, 0.5 * last], rtol=1e-12)
    assert np.allclose(compensator(tr, m, 0.0, 250.0), [500.0, 125.0], rtol=1e-12)


def test_hawkes_compensator_by_hand():
    m = ModelSpec([1.0], DiscreteStates(1), DiscreteTable.identity(1, 1),
                  StateDependentHawkes([1.0], ExponentialKernel([[0.5]], 2.0)),
                  initial=from_enumeration([(-1.0, (0, 0))], 0))
    tr = from_enumeration([(-1.0, (0, 0)), (0.5, (0, 0)), (2.0, (0, 0))], 0)
    # int_0^2 [1 + 0.5*2 e^{-2(s+1)} + 1{s>0.5} 0.5*2 e^{-2(s-0.5)}] ds
    expected = 2.0 + 0.5 * (math.exp(-2.0) - math.exp(-6.0)) + 0.5 * (1 - math.exp(-3.0))
    assert compensator(tr, m)[0] == pytest.approx(expected, rel=1e-13)


def test_compensator_additivity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_model(rng)
        tr = simulate(m, SimConfig(20.0, seed=int(rng.integers(10 ** 6)))).trajectory
        if tr.n_new < 2:
            continue
        new = tr.times[tr.n_initial:]
        s = float(new[len(new) // 2] + new[len(new) // 2 - 1]) / 2
        whole = compensator(tr, m, 0.0, 20.0)
        split = compensator(tr, m, 0.0, s) + compensator(tr, m, s, 20.0)
        assert np.allclose(whole, split, rtol=1e-11, atol=1e-12)


def test_residual_count_conservation():
    rng = np.random.default_rng(4)
    for _ in range(20):
        m = random_model(rng)
        tr = simulate(m, SimConfig(30.0, seed=int(rng.integers(10 ** 6)))).trajectory
        rs = rescaled_residuals(tr, m)
        counts = np.bincount(tr.events[tr.n_initial:], minlength=m.n_events)
        for e in range(m.n_events):
            assert len(rs.residuals[e]) == max(counts[e] - 1, 0)


def test_residuals_detect_wrong_rate():
    m = ModelSpec([1.0], DiscreteStates(1), DiscreteTable.identity(1, 1), ConstantRate([1.0]))
    tr = simulate(m, SimConfig(2000.0, seed=5)).trajectory
    assert rescaled_residuals(tr, m).passed
    assert not rescaled_residuals(tr, m.replace(functional=ConstantRate([1.5]))).passed


def test_few_events_flagged_unreliable():
    m = ModelSpec([1.0], DiscreteStates(1), DiscreteTable.identity(1, 1), ConstantRate([1.0]))
    tr = simulate(m, SimConfig(10.0, seed=0)).trajectory
    rs = rescaled_residuals(tr, m)
    assert not rs.reliable
    assert rs.to_dict()["per_type"][0]["reliable"] is False


# -- transition test


def _two_by_two(table, seed, n_events=10_000):
    m = ModelSpec([1.0, 1.0], DiscreteStates(2), table, ConstantRate([1.0, 1.0]))
    return simulate(m, SimConfig(1e9, seed=seed, max_events=n_events)).trajectory


def test_deterministic_rows_give_zero_statistic():
    m = ModelSpec([1.0], DiscreteStates(2), FLIP, ConstantRate([1.0]))
    tr = simulate(m, SimConfig(200.0, seed=0)).trajectory
    rep = transition_frequency_test(tr, FLIP)
    assert rep.statistic == 0.0 and rep.passed


def test_transition_test_calibration_and_power():
    table = DiscreteTable([[[0.7, 0.3], [0.2, 0.8]], [[0.4, 0.6], [0.9, 0.1]]])
    swapped = DiscreteTable(table.probs[::-1].copy())
    ok = sum(transition_frequency_test(_two_by_two(table, s), table).passed for s in range(100))
    rejected = sum(not transition_frequency_test(_two_by_two(swapped, s), table).passed
                   for s in range(100))
    assert ok >= 95
    assert rejected >= 99


def test_transition_groups_follow_state_before_event():
    tr = from_enumeration([(1.0, (0, 1)), (2.0, (0, 1)), (3.0, (1, 0))], 0)
    rep = transition_frequency_test(tr, DiscreteTable([[[0.5, 0.5]] * 2] * 2))
    obs = {k: g.observed.tolist() for k, g in rep.groups.items()}
    assert obs == {(0, 0): [0.0, 1.0], (1, 0): [0.0, 1.0], (1, 1): [1.0, 0.0]}
    assert rep.skipped == [(0, 1)]


def test_impossible_transition_rejects_outright():
    tr = from_enumeration([(1.0, (0, 0))], 0)
    rep = transition_frequency_test(tr, FLIP)
    assert rep.p_value == 0.0 and not rep.passed


# -- oracles


def test_ctmc_oracle_examples():
    assert np.allclose(ctmc_stationary_oracle([1.0, 2.0], FLIP), [2 / 3, 1 / 3], atol=1e-14)
    assert np.allclose(ctmc_stationary_oracle([1.0, 1.0], FLIP), [0.5, 0.5], atol=1e-14)
    with pytest.raises(SingularSystem):
        ctmc_stationary_oracle([1.0, 1.0], DiscreteTable.identity(2, 1))


def test_ctmc_oracle_against_eigenvector():
    rng = np.random.default_rng(7)
    for _ in range(20):
        nx, d = int(rng.integers(2, 5)), int(rng.integers(1, 3))
        table = random_table(rng, nx, d)
        c = rng.uniform(0.5, 3.0, size=nx)
        Q = np.einsum("x,xey->xy", c, table.probs)
        np.fill_diagonal(Q, 0.0)
        Q -= np.diag(Q.sum(axis=1))
        vals, vecs = np.linalg.eig(Q.T)
        v = np.real(vecs[:, np.argmin(np.abs(vals))])
        assert np.allclose(ctmc_stationary_oracle(c, table), v / v.sum(), atol=1e-10)


def test_hawkes_oracle_examples():
    assert hawkes_mean_rate_oracle([1.0], ExponentialKernel([[0.5]], 1.0), [1.0]) == \
        pytest.approx([2.0])
    assert hawkes_mean_rate_oracle([1.0, 3.0], ExponentialKernel(np.zeros((2, 2)), 1.0),
                                   [1.0, 1.0]).tolist() == [1.0, 3.0]
    alpha = np.array([[0.2, 0.3], [0.4, 0.1]])
    m = hawkes_mean_rate_oracle([1.0, 1.0], ExponentialKernel(alpha, 1.0), [1.0, 1.0])
    assert m == pytest.approx([13 / 6, 11 / 6], abs=1e-14)
    # Neumann series: m = sum_k (K^T)^k nu
    acc, term = np.zeros(2), np.ones(2)
    for _ in range(200):
        acc += term
        term = alpha.T @ term
    assert m == pytest.approx(acc, abs=1e-12)
    with pytest.raises(UnstableModel):
        hawkes_mean_rate_oracle([1.0], ExponentialKernel([[1.5]], 1.0), [1.0])


def _gillespie_occupancy(c, horizon, rng):
    """Independent SSA for the two-state flip chain."""
    t, x, occ = 0.0, 0, np.zeros(2)
    while True:
        dt = rng.exponential(1.0 / c[x])
        if t + dt >= horizon:
            occ[x] += horizon - t
            return occ / horizon
        occ[x] += dt
        t += dt
        x = 1 - x


def test_oracle_consistency_markov_vs_uniformized_vs_gillespie():
    c, horizon, runs = (1.0, 2.0), 200.0, 60
    markov = ModelSpec([1.0], DiscreteStates(2), FLIP, MarkovRate(list(c)))
    # same chain through the generic machinery: constant rate 2, flip w.p. c(x)/2
    unif = ModelSpec([1.0], DiscreteStates(2),
                     DiscreteTable([[[0.5, 0.5]], [[1.0, 0.0]]]), ConstantRate([2.0]))
    a = [state_occupancy(simulate(markov, SimConfig(horizon, seed=s)).trajectory, horizon, 2)[0]
         for s in range(runs)]
    b = [state_occupancy(simulate(unif, SimConfig(horizon, seed=1000 + s)).trajectory,
                         horizon, 2)[0] for s in range(runs)]
    rng = np.random.default_rng(8)
    g = [_gillespie_occupancy(c, horizon, rng)[0] for _ in range(runs)]
    assert stats.ttest_ind(a, b, equal_var=False).pvalue > 0.001
    assert stats.ttest_ind(a, g, equal_var=False).pvalue > 0.001
    assert abs(np.mean(a) - 2 / 3) < 4 * np.std(a) / math.sqrt(runs)


def test_state_occupancy_by_hand():
    tr = from_enumeration([(1.0, (0, 1)), (3.0, (0, 0))], 0)
    assert state_occupancy(tr, 4.0, 2).tolist() == [0.5, 0.5]


# -- compound Poisson


def _cp_model(nu, family):
    return ModelSpec([1.0], ContinuousStates(), family, ConstantRate([nu]), x0=0.0)


def test_compound_poisson_zero_rate_keeps_state():
    m = _cp_model(0.0, gaussian_increments(1.0, 2.0))
    res = simulate(m, SimConfig(10.0, seed=0))
    assert res.trajectory.n_new == 0


def test_compound_poisson_unit_jumps_count_events():
    m = _cp_model(3.0, constant_increments(1.0))
    tr = simulate(m, SimConfig(50.0, seed=2)).trajectory
    assert tr.states[-1] - 0.0 == tr.n_new


def test_compound_poisson_moments():
    nu, mu, sd, horizon = 2.0, 0.5, 1.5, 20.0
    m = _cp_model(nu, gaussian_increments(mu, sd))
    trajs = [simulate(m, SimConfig(horizon, seed=s)).trajectory for s in range(200)]
    rep = compound_poisson_check(trajs, nu, mu, sd ** 2, horizon)
    assert rep.expected_mean == nu * horizon * mu
    assert rep.expected_variance == pytest.approx(nu * horizon * (sd ** 2 + mu ** 2))
    assert rep.passed
    bad = compound_poisson_check(trajs, nu, mu + 0.5, sd ** 2, horizon)
    assert not bad.passed
