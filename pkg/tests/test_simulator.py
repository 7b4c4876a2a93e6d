import math
from dataclasses import replace

import numpy as np
import pytest
from scipy import stats

from hybridmpp import (RNG_ID, ConstantRate, CountDominated, DiscreteStates, DiscreteTable,
                       Driver, ExponentialKernel, MarkovRate, ModelSpec, SimConfig,
                       StateDependentHawkes, Status, Trajectory, detect_explosion,
                       from_enumeration, intensity_path, simulate, simulate_batch,
                       simulate_coupled, state_maximized)
from hybridmpp.driver import BLOCK, CoupledSource, fork_for_coupling, pick
from hybridmpp.errors import DominationBreach, InvalidModel, MajorantViolation, ZeroMajorant
from hybridmpp.simulator import _simulate_generic

from helpers import Affine, random_model


def single(f, d=1, nx=1, table=None, initial=None):
    table = table or DiscreteTable.identity(nx, d)
    return ModelSpec([1.0] * d, DiscreteStates(nx), table, f, initial)


def hawkes(alpha, nu=1.0, beta=1.0):
    return single(StateDependentHawkes([nu], ExponentialKernel([[alpha]], beta)))


# -- driver


def test_rng_id_is_published():
    assert RNG_ID.startswith("philox4x64-10")


def test_same_seed_same_candidates():
    a, b = Driver(3), Driver(3)
    bounds, w = [1.0, 2.5], [1.0, 0.5]
    for _ in range(2 * BLOCK + 10):
        assert a.next_candidate(bounds, w) == b.next_candidate(bounds, w)
    assert Driver(4).raw() != Driver(3).raw()


def test_raw_block_matches_raw_calls():
    a, b = Driver(9), Driver(9)
    a.raw()
    b.raw()
    blk = a.raw_block(BLOCK + 7)
    one = [b.raw() for _ in range(BLOCK + 7)]
    for arr, col in zip(blk, zip(*one)):
        assert arr.tolist() == list(col)


def test_candidate_law():
    drv = Driver(0)
    bounds, w = [2.0, 1.0], [1.0, 3.0]
    c = [drv.next_candidate(bounds, w) for _ in range(50_000)]
    gaps = np.diff([0.0] + [x.time for x in c])
    assert stats.kstest(gaps * 5.0, "expon").pvalue > 0.001
    types = np.array([x.event for x in c])
    assert abs(types.mean() - 0.6) < 4 * math.sqrt(0.24 / len(types))
    h0 = np.array([x.height for x in c if x.event == 0])
    assert h0.max() < 2.0 and stats.kstest(h0 / 2.0, "uniform").pvalue > 0.001


def test_zero_majorant():
    with pytest.raises(ZeroMajorant):
        Driver(0).next_candidate([0.0], [1.0])


def test_pick_skips_empty_strips():
    assert pick([0.0, 1.0, 0.0, 2.0], 0.5) == 1
    assert pick([0.0, 1.0, 0.0, 2.0], 1.5) == 3
    assert pick([1.0, 0.0], 1.0) == 0


def test_fork_requires_fresh_driver_and_preserves_single_consumer():
    drv = Driver(5)
    drv.raw()
    with pytest.raises(ValueError):
        fork_for_coupling(drv)
    src = fork_for_coupling(Driver(5))
    plain = Driver(5)
    for _ in range(100):
        assert src.next_candidate([[1.5]], [1.0]) == plain.next_candidate([1.5], [1.0])
    assert isinstance(src, CoupledSource)


# -- simulate


def test_constant_rate_run_completes():
    res = simulate(single(ConstantRate([2.0])), SimConfig(100.0, seed=1))
    assert res.status is Status.COMPLETED
    assert res.trajectory.n_new == res.diagnostics["accepted"]
    assert np.all(res.trajectory.times[res.trajectory.n_initial:] <= 100.0)
    assert detect_explosion(res).kind == "NonExplosive"


def test_replay_is_bit_identical():
    m = random_model(np.random.default_rng(2), "exp_hawkes")
    a = simulate(m, SimConfig(200.0, seed=17))
    b = simulate(m, SimConfig(200.0, seed=17))
    c = simulate(m, SimConfig(200.0, seed=18))
    assert a.trajectory == b.trajectory
    assert a.trajectory.times.tobytes() == b.trajectory.times.tobytes()
    assert not a.trajectory == c.trajectory


def test_initial_condition_fidelity():
    rng = np.random.default_rng(3)
    for _ in range(20):
        m = random_model(rng)
        res = simulate(m, SimConfig(5.0, seed=int(rng.integers(1000))))
        assert res.trajectory.initial_condition() == m.initial


def test_candidate_at_horizon_is_included():
    m = single(ConstantRate([1.0]))
    first = simulate(m, SimConfig(1e6, seed=4, max_events=1)).trajectory.times[0]
    res = simulate(m, SimConfig(float(first), seed=4))
    assert res.trajectory.n_new == 1 and res.trajectory.times[-1] == first


def test_acceptance_log_is_exact():
    m = random_model(np.random.default_rng(8), "exp_hawkes")
    res = simulate(m, SimConfig(50.0, seed=2, record_diagnostics=True))
    log = res.diagnostics["candidate_log"]
    assert sum(1 for *_, acc in log if acc) == res.trajectory.n_new
    tr = res.trajectory
    for t, e, u, lam, acc in log:
        direct = m.functional.intensity(e, tr.history(t))
        assert lam == pytest.approx(direct, rel=1e-12)
        assert acc == (u < lam)


def test_markov_run_switches_rate():
    flip = DiscreteTable([[[0.0, 1.0]], [[1.0, 0.0]]])
    res = simulate(single(MarkovRate([1.0, 2.0]), nx=2, table=flip), SimConfig(50.0, seed=0))
    st = res.trajectory.states
    assert np.all(st[1:] != st[:-1]) and st[0] == 1


def test_count_fast_path_matches_generic_loop():
    for seed in range(5):
        for d, table in ((1, DiscreteTable.identity(1, 1)),
                         (2, DiscreteTable.from_rows([[0.3, 0.7], [0.9, 0.1]], 2))):
            m = ModelSpec([1.0, 0.5][:d], DiscreteStates(table.n_states), table,
                          CountDominated(Affine(1.0, 0.05), n_events=d))
            cfg = SimConfig(30.0, seed=seed)
            fast = simulate(m, cfg)
            slow = _simulate_generic(m, cfg, Driver(seed))
            assert fast.diagnostics.get("fast_path")
            assert fast.trajectory == slow.trajectory
            assert fast.status is slow.status
            assert fast.diagnostics["candidates"] == slow.diagnostics["candidates"]


def test_pure_birth_explodes():
    m = single(CountDominated(lambda n: (1.0 + n) ** 2))
    res = simulate(m, SimConfig(10.0, seed=0, max_events=20_000))
    assert res.status is Status.EXPLOSION_SUSPECTED
    v = detect_explosion(res)
    assert v.explosive and v.kind == "SuspectedExplosive"
    assert 0 < v.t_inf < 10.0


def test_candidate_budget():
    res = simulate(hawkes(0.5), SimConfig(1e9, seed=0, max_candidates=100))
    assert res.status is Status.CANDIDATE_BUDGET_EXHAUSTED
    assert res.diagnostics["candidates"] == 100


def test_majorant_violation_is_detected():
    class Liar:
        monotone = True
        n_events = 1

        def tracker(self, initial):
            return self

        def bounds(self, t0):
            return [1.0]

        def rates(self, t):
            return [2.0]

        def rate(self, e, t):
            return 2.0

        def push(self, *a):
            pass

    with pytest.raises(MajorantViolation):
        simulate(single(Liar()), SimConfig(10.0))


def test_ground_is_simple_for_random_models():
    rng = np.random.default_rng(4)
    for i in range(200):
        res = simulate(random_model(rng), SimConfig(10.0, seed=i))
        assert np.all(np.diff(res.trajectory.times) > 0)


# -- coupling


def test_coupling_identical_models():
    m = random_model(np.random.default_rng(6), "exp_hawkes")
    a, b = simulate_coupled(m, m, SimConfig(100.0, seed=3))
    assert a.trajectory == b.trajectory


def test_coupled_single_consumer_matches_plain_run():
    m = hawkes(0.4)
    a, _ = simulate_coupled(m, m, SimConfig(100.0, seed=12))
    assert a.trajectory == simulate(m, SimConfig(100.0, seed=12)).trajectory


def test_coupling_containment():
    weak, strong = hawkes(0.3), hawkes(0.5)
    for seed in range(50):
        a, b = simulate_coupled(weak, strong, SimConfig(100.0, seed=seed))
        pa = set(zip(a.trajectory.times.tolist(), a.trajectory.events.tolist()))
        pb = set(zip(b.trajectory.times.tolist(), b.trajectory.events.tolist()))
        assert pa <= pb


def test_coupling_breach_reports_first_offending_event():
    with pytest.raises(DominationBreach) as info:
        simulate_coupled(hawkes(0.5, nu=2.0), hawkes(0.5), SimConfig(100.0, seed=0),
                         spot_checks=0)
    assert info.value.time is not None and info.value.event == 0
    with pytest.raises(DominationBreach):
        simulate_coupled(hawkes(0.5, nu=2.0), hawkes(0.5), SimConfig(100.0, seed=0))


def test_coupling_rejects_non_monotone_functionals():
    m = single(MarkovRate([1.0]))
    with pytest.raises(InvalidModel):
        simulate_coupled(m, m, SimConfig(1.0))


# -- analysis helpers


def test_intensity_path():
    c = intensity_path(single(ConstantRate([2.0])), Trajectory.empty(0), [0.0, 1.0, 7.5])
    assert c.tolist() == [[2.0], [2.0], [2.0]]
    init = from_enumeration([(-1.0, (0, 0))], 0)
    m = single(StateDependentHawkes([1.0], ExponentialKernel([[0.5]], 1.0)), initial=init)
    tr = from_enumeration([(-1.0, (0, 0)), (1.0, (0, 0))], 0)
    grid = np.array([0.0, 0.5, 1.0, 2.0])
    path = intensity_path(m, tr, grid)[:, 0]
    expected = [1 + 0.5 * math.exp(-1.0), 1 + 0.5 * math.exp(-1.5), 1 + 0.5 * math.exp(-2.0),
                1 + 0.5 * math.exp(-3.0) + 0.5 * math.exp(-1.0)]
    assert np.allclose(path, expected, rtol=1e-13)
    # left limit: the record at t=1 is excluded at t=1 itself
    direct = [m.functional.intensity(0, tr.history(t)) for t in grid]
    assert np.allclose(path, direct, rtol=1e-13)


def test_batch_matches_serial_and_pool():
    m = hawkes(0.5)
    cfg = SimConfig(50.0)
    serial = simulate_batch(m, cfg, range(4), workers=1)
    pooled = simulate_batch(m, cfg, range(4), workers=2)
    for s, p, seed in zip(serial, pooled, range(4)):
        assert s.trajectory == p.trajectory == simulate(m, replace(cfg, seed=seed)).trajectory


def test_state_maximized_dominator_contains_state_dependent_model():
    rng = np.random.default_rng(21)
    m = random_model(rng, "exp_hawkes", with_initial=False)
    dom = m.replace(functional=StateDependentHawkes(m.functional.nu,
                                                    state_maximized(m.functional.kernel)))
    for seed in range(20):
        a, b = simulate_coupled(m, dom, SimConfig(50.0, seed=seed))
        assert set(a.trajectory.times.tolist()) <= set(b.trajectory.times.tolist())


def test_time_resolution_exhaustion_is_reported_as_explosion():
    # seed 4 drives the gaps below double spacing near t = 0.9 after 75157 events
    m = single(CountDominated(lambda n: (1.0 + n) ** 2))
    cfg = SimConfig(10.0, seed=4, max_events=100_000)
    fast = simulate(m, cfg)
    slow = _simulate_generic(m, cfg, Driver(4))
    for res in (fast, slow):
        assert res.status is Status.EXPLOSION_SUSPECTED
        assert res.diagnostics["time_resolution_exhausted"]
        assert res.trajectory.n_new == 75157
    assert fast.trajectory == slow.trajectory


def test_pure_birth_explosion_time_law():
    # T_inf = sum_n E_n / (1 + n)^2 with E_n i.i.d. Exp(1): sample it directly and compare
    m = single(CountDominated(lambda n: (1.0 + n) ** 2))
    sim = np.array([detect_explosion(simulate(m, SimConfig(10.0, seed=s, max_events=100_000))).t_inf
                    for s in range(200)])
    rng = np.random.default_rng(0)
    inv = 1.0 / (1.0 + np.arange(100_000)) ** 2
    direct = np.array([rng.exponential(size=inv.size) @ inv for _ in range(200)])
    assert stats.ks_2samp(sim, direct).pvalue > 0.001
    se = sim.std(ddof=1) / math.sqrt(len(sim))
    assert abs(sim.mean() - math.pi ** 2 / 6) < 3 * se
