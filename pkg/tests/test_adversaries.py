import numpy as np
import pytest

from netsched.adversaries import (
    AdversaryParams,
    ArrivalDist,
    CyclicArrivalAdversary,
    CyclicConfig,
    CyclicEdgeArrivalAdversary,
    ExponentialAdversary,
    IIDAdversary,
    WitnessSchedule,
    arrival_choice,
    check_witness_compliance,
    cyclic_arrival_adversary_step,
    cyclic_edge_and_arrival_adversary_step,
    exponential_adversary_step,
    exponential_witness,
    feasible_in_rate_set,
    parallel_network,
    phase_bounds,
    phase_index,
)
from netsched.engine import run
from netsched.kernels import run_exponential_kernel
from netsched.model import (
    ExplicitRates,
    InjectionEvent,
    MatchingRates,
    NetworkSpec,
    QueueMatrix,
    validate_rate_set,
)


def test_adversary_params_validation():
    with pytest.raises(ValueError):
        AdversaryParams(0, 0.5)
    with pytest.raises(ValueError):
        AdversaryParams(1, 0.0)
    ap = AdversaryParams(3, 0.2)
    assert ap.window(2) == (6, 8)
    assert ap.window_of(8) == 2


# --- exponential adversary --------------------------------------------------

def test_exponential_step_fresh_system():
    spec = parallel_network(3, 0.1)
    q = QueueMatrix.zeros(spec)
    rs, inj, ip = exponential_adversary_step(0, q, 3, 0.1)
    assert ip == 0
    assert rs.vectors == ((1.0, 0.0, 0.0),)
    assert inj == [(0, 3, pytest.approx(0.9))]


def test_exponential_step_second_level():
    spec = parallel_network(3, 0.1)
    q = QueueMatrix.zeros(spec)
    q.set(0, 3, 0.9)
    rs, inj, ip = exponential_adversary_step(1, q, 3, 0.1)
    assert ip == 1
    assert rs.vectors == ((0.9, 0.0, 0.0), (0.0, 0.45, 0.0))
    (node, dest, size), = inj
    assert (node, dest) == (1, 4) and size == pytest.approx(0.405)
    validate_rate_set(rs, spec)


def test_exponential_run_reaches_doubling_milestones():
    mq, po, bk, ob, dl, ms, steps, halted, qf = run_exponential_kernel(3, 0.1, 1.0, 100_000)
    assert halted
    assert mq.max() >= 0.9 * 4
    assert (ms >= 0).all()  # every threshold reached at least once


def test_exponential_generic_engine_matches_kernel():
    spec = parallel_network(3, 0.1)
    tr = run(spec, ExponentialAdversary(3, 0.1), 300, seed=0, use_kernel=False)
    mq, po, bk, ob, dl, ms, steps, halted, qf = run_exponential_kernel(3, 0.1, 1.0, 300)
    assert tr.slots == steps and tr.halted == halted
    assert np.array_equal(tr.max_queue, mq)
    assert np.array_equal(tr.objective, ob)
    assert np.allclose(tr.potential, po, rtol=1e-12, atol=1e-12)


# --- phase clock -------------------------------------------------------------

def test_phase_index_examples():
    assert phase_index(1) == 1
    assert phase_index(2) == 1
    assert phase_index(3) == 2
    assert phase_index(4) == 2
    assert phase_index(8) == 3  # cumulative sums: ceil(7.125) = 8
    assert phase_bounds(1) == (1, 2)
    assert phase_bounds(2) == (3, 4)
    assert phase_bounds(3) == (5, 8)
    with pytest.raises(ValueError):
        phase_index(0)


def test_phase_intervals_partition_time():
    end = 0
    for i in range(1, 30):
        lo, hi = phase_bounds(i)
        assert lo == end + 1 and hi >= lo
        end = hi
    for t in range(1, 2000):
        lo, hi = phase_bounds(phase_index(t))
        assert lo <= t <= hi


# --- cyclic adversaries -----------------------------------------------------

def small_cyclic_config(seed=0):
    spec = NetworkSpec(3, ((0, 1), (1, 0), (1, 2), (2, 1)), (0, 1, 2),
                       r_min=0.4, r_max=2.0)
    caps = (
        (1.0, 0.8, 1.2, 0.6),
        (0.9, 1.1, 0.5, 0.7),
        (0.6, 0.6, 1.4, 1.0),
    )
    gammas = ((1.0, 0.5), (0.7, 0.9), (0.4, 1.3))
    c = tuple(tuple(0.1 * (i + 1) for j in range(3)) for i in range(3))
    pairs = ((0, 2), (2, 0))
    return CyclicConfig(spec, caps, gammas, c, pairs, seed)


def test_cyclic_arrival_step_rotates_by_phase():
    cfg = small_cyclic_config()
    # slots 0,1 are phase 1 (arrival vector 0), slots 2,3 phase 2 (vector 1)
    rs0, tri0 = cyclic_arrival_adversary_step(0, cfg, rate_idx=1)
    rs2, tri2 = cyclic_arrival_adversary_step(2, cfg, rate_idx=1)
    assert isinstance(rs0, MatchingRates) and rs0.caps == cfg.caps[1]
    assert rs2.caps == cfg.caps[1]  # edge rates fixed across phases
    assert tri0 == [(0, 2, pytest.approx(0.2 * 1.0)), (2, 0, pytest.approx(0.2 * 0.5))]
    assert tri2 == [(0, 2, pytest.approx(0.2 * 0.7)), (2, 0, pytest.approx(0.2 * 0.9))]
    # constant within a phase
    assert cyclic_arrival_adversary_step(1, cfg, 1)[1] == tri0


def test_cyclic_edge_arrival_rotates_caps_mod_3():
    cfg = small_cyclic_config()
    rs, _ = cyclic_edge_and_arrival_adversary_step(0, cfg)   # phase 1 -> caps 0
    assert rs.caps == cfg.caps[0]
    # phase 4 starts at protocol time 9 -> slot 8; 4 = 1 mod 3 -> caps 0 again
    rs4, _ = cyclic_edge_and_arrival_adversary_step(8, cfg)
    assert rs4.caps == cfg.caps[0]
    # the phase-wise arrival choice is deterministic in (seed, phase)
    assert arrival_choice(7, 3) == arrival_choice(7, 3)
    j = arrival_choice(cfg.seed, 1)
    _, tri = cyclic_edge_and_arrival_adversary_step(0, cfg)
    expect = cfg.c_table[0][j]
    assert tri[0][2] == pytest.approx(expect * cfg.gammas[j][0])


def test_cyclic_adversary_determinism_across_runs():
    cfg = small_cyclic_config(seed=5)
    a1 = CyclicEdgeArrivalAdversary(cfg)
    a2 = CyclicEdgeArrivalAdversary(cfg)
    a1.reset(np.random.default_rng(0))
    a2.reset(np.random.default_rng(99))  # rng is not used by cyclic adversaries
    for t in range(40):
        q = QueueMatrix.zeros(cfg.spec)
        rs1, ev1 = a1.step(t, q)
        rs2, ev2 = a2.step(t, q)
        assert rs1 == rs2
        assert [(e.node, e.dest, e.size) for e in ev1] == \
               [(e.node, e.dest, e.size) for e in ev2]


def test_generated_rate_sets_respect_bounds():
    cfg = small_cyclic_config()
    adv = CyclicArrivalAdversary(cfg, 0)
    adv.reset(np.random.default_rng(0))
    for t in range(20):
        rs, _ = adv.step(t, QueueMatrix.zeros(cfg.spec))
        validate_rate_set(rs, cfg.spec)


def test_arrival_averages_do_not_converge():
    # running averages at consecutive phase boundaries keep moving
    cfg = small_cyclic_config()
    horizon = 20_000
    totals = np.zeros(2)
    averages = []
    boundary = []
    i = 1
    while phase_bounds(i)[1] <= horizon:
        boundary.append(phase_bounds(i)[1])
        i += 1
    bi = 0
    for t in range(1, horizon + 1):
        _, tri = cyclic_arrival_adversary_step(t - 1, cfg, rate_idx=0)
        totals += [a for _, _, a in tri]
        if bi < len(boundary) and t == boundary[bi]:
            averages.append(totals / t)
            bi += 1
    diffs = [float(np.abs(averages[k + 1] - averages[k]).max())
             for k in range(len(averages) - 1)]
    assert sum(d > 0.005 for d in diffs[-8:]) >= 4


# --- i.i.d. adversary ---------------------------------------------------------

def test_iid_degenerate_is_constant():
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    rs = ExplicitRates(((1.0,),), spec.directed_edges)
    adv = IIDAdversary((rs,), (ArrivalDist(0, 1, 0.3, 0.3),))
    adv.reset(np.random.default_rng(1))
    q = QueueMatrix.zeros(spec)
    steps = [adv.step(t, q) for t in range(10)]
    assert all(s[0] == rs for s in steps)
    assert all(s[1][0].size == 0.3 for s in steps)


def test_iid_two_rate_sets_frequency():
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    a = ExplicitRates(((1.0,),), spec.directed_edges)
    b = ExplicitRates(((0.5,),), spec.directed_edges)
    adv = IIDAdversary((a, b), ())
    adv.reset(np.random.default_rng(123))
    q = QueueMatrix.zeros(spec)
    n = 100_000
    count_a = sum(adv.step(t, q)[0] == a for t in range(n))
    assert 0.49 <= count_a / n <= 0.51


def test_iid_zero_arrivals_keeps_potential_monotone():
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    a = ExplicitRates(((1.0,),), spec.directed_edges)
    b = ExplicitRates(((0.0,),), spec.directed_edges)
    adv = IIDAdversary((a, b), ())
    q0 = QueueMatrix.from_dict(spec, {(0, 1): 5.0})
    tr = run(spec, adv, 500, seed=3, q0=q0)
    assert (np.diff(tr.potential) <= 1e-9).all()


# --- witness compliance -------------------------------------------------------

def _recorded_exponential(n=3, eps=0.2, slots=120):
    spec = parallel_network(n, eps)
    tr = run(spec, ExponentialAdversary(n, eps), slots, seed=0, audit=True,
             use_kernel=False)
    events = [ev for rec in tr.records for ev in rec.injections]
    rates = {rec.slot: rec.rate_set for rec in tr.records}
    return spec, tr, events, rates


def test_exponential_witness_passes_compliance():
    spec, tr, events, rates = _recorded_exponential()
    ws = exponential_witness(tr.records)
    rep = check_witness_compliance(ws, events, rates, AdversaryParams(1, 0.2), spec)
    assert rep.ok, rep.violations[:3]
    assert rep.packets_checked == len(events) > 0


def test_empty_injection_stream_passes_vacuously():
    spec = parallel_network(2, 0.2)
    rep = check_witness_compliance(WitnessSchedule(), [], {}, AdversaryParams(1, 0.2), spec)
    assert rep.ok and rep.packets_checked == 0


def test_witness_move_with_zero_rate_fails():
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    ws = WitnessSchedule()
    ws.add_move(0, 0, 0, 0.5)
    ws.rate_vectors[0] = (0.0,)
    events = [InjectionEvent(0, 0, 0, 1, 0.5)]
    rates = {0: ExplicitRates(((1.0,),), spec.directed_edges)}
    rep = check_witness_compliance(ws, events, rates, AdversaryParams(1, 0.2), spec)
    assert not rep.ok
    assert any("exceed" in v or "capacity" in v for v in rep.violations)


def test_missing_witness_for_packet_fails():
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    events = [InjectionEvent(0, 0, 0, 1, 0.5)]
    rep = check_witness_compliance(WitnessSchedule(), events, {},
                                   AdversaryParams(1, 0.2), spec)
    assert not rep.ok
    assert "no witness moves" in rep.first_violation


def test_witness_window_overuse_fails():
    # moving more than (1 - eps) of the window capacity on an edge
    spec = NetworkSpec(2, ((0, 1),), (1,), r_min=0.1, r_max=1.0)
    ws = WitnessSchedule()
    ws.add_move(0, 0, 0, 0.95)
    ws.rate_vectors[0] = (1.0,)
    events = [InjectionEvent(0, 0, 0, 1, 0.95)]
    rates = {0: ExplicitRates(((1.0,),), spec.directed_edges)}
    rep = check_witness_compliance(ws, events, rates, AdversaryParams(1, 0.2), spec)
    assert not rep.ok


def test_witness_forwarding_before_arrival_fails():
    # two-hop relay but both hops in the same slot
    spec = NetworkSpec(3, ((0, 1), (1, 2)), (2,), r_min=0.1, r_max=1.0)
    ws = WitnessSchedule()
    ws.add_move(0, 0, 0, 0.5)
    ws.add_move(0, 1, 0, 0.5)
    ws.rate_vectors[0] = (1.0, 1.0)
    events = [InjectionEvent(0, 0, 0, 2, 0.5)]
    rates = {0: ExplicitRates(((1.0, 1.0),), spec.directed_edges)}
    rep = check_witness_compliance(ws, events, rates, AdversaryParams(2, 0.4), spec)
    assert not rep.ok
    assert any("before it arrived" in v for v in rep.violations)


def test_feasible_in_rate_set():
    edges = ((0, 1), (1, 2))
    rs = MatchingRates((1.0, 1.0), edges)
    assert feasible_in_rate_set((0.5, 0.0), rs)
    assert not feasible_in_rate_set((0.5, 0.5), rs)   # incident pairs
    assert not feasible_in_rate_set((1.5, 0.0), rs)   # above cap
    ex = ExplicitRates(((1.0, 0.0),), edges)
    assert feasible_in_rate_set((0.7, 0.0), ex)
    assert not feasible_in_rate_set((0.7, 0.1), ex)
