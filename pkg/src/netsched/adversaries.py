"""Traffic/interference generators and witness-schedule compliance.

An adversary produces, per slot, the feasible rate set and the injections.
Window-constrained adversaries are certified by a witness schedule: a
fractional routing that delivers most of each packet within its window while
using only a (1 - eps) fraction of the capacity it assigns, and the
compliance checker verifies exactly that.
"""

from __future__ import annotations

import itertools
import math
from bisect import bisect_left
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .kernels import PhasePlan
from .model import (
    EPS_TOL,
    ExplicitRates,
    InjectionEvent,
    MatchingRates,
    NetworkSpec,
    QueueMatrix,
    RateSet,
    matching_matrix,
    undirected_support,
)


@dataclass(frozen=True)
class AdversaryParams:
    """Window length and slack of a window-constrained adversary."""

    omega: int
    eps: float

    def __post_init__(self):
        if self.omega < 1:
            raise ValueError("omega must be >= 1")
        if not (0.0 < self.eps < 1.0):
            raise ValueError("eps must be in (0, 1)")

    def window(self, j: int) -> tuple[int, int]:
        """Inclusive slot range of window j."""
        return j * self.omega, (j + 1) * self.omega - 1

    def window_of(self, slot: int) -> int:
        return slot // self.omega


@dataclass
class WitnessSchedule:
    """Feasibility certificate: fractional per-packet movements
    (packet_id, edge_id, slot) -> amount, plus the rate vector the witness
    itself uses per slot."""

    moves: dict[tuple[int, int, int], float] = field(default_factory=dict)
    rate_vectors: dict[int, tuple[float, ...]] = field(default_factory=dict)

    def add_move(self, packet_id: int, edge: int, slot: int, amount: float) -> None:
        if amount < 0:
            raise ValueError("negative witness move")
        if amount > 0:
            self.moves[(packet_id, edge, slot)] = self.moves.get((packet_id, edge, slot), 0.0) + amount


# ---------------------------------------------------------------------------
# Geometric phase clock
# ---------------------------------------------------------------------------

_PHASE_END: list[int] = [0]  # _PHASE_END[i] = last protocol time of phase i


def _extend_phases(upto: int) -> None:
    while _PHASE_END[-1] < upto:
        i = len(_PHASE_END)
        # cumulative sum of 1.5**j for j = 1..i, exactly
        total = 3 * (Fraction(3, 2) ** i - 1)
        _PHASE_END.append(math.ceil(total))


def phase_index(t: int) -> int:
    """Phase of protocol time t >= 1; phase i covers
    [ceil(sum_{j<i} 1.5**j) + 1, ceil(sum_{j<=i} 1.5**j)], phase 1 = [1, 2]."""
    if t < 1:
        raise ValueError("phase clock starts at t = 1")
    _extend_phases(t)
    return bisect_left(_PHASE_END, t)


def phase_bounds(i: int) -> tuple[int, int]:
    """Inclusive [start, end] protocol times of phase i >= 1."""
    if i < 1:
        raise ValueError("phase index starts at 1")
    _extend_phases(0)
    while len(_PHASE_END) <= i:
        _extend_phases(_PHASE_END[-1] + 1)
    return _PHASE_END[i - 1] + 1, _PHASE_END[i]


# ---------------------------------------------------------------------------
# Exponential-backlog adversary on parallel interfering edges
# ---------------------------------------------------------------------------

def parallel_network(n_edges: int, eps: float, beta: float = 1.0) -> NetworkSpec:
    """n single-hop edges i -> n+i that mutually interfere (one transmits per
    slot); every edge head is a destination."""
    edges = tuple((i, n_edges + i) for i in range(n_edges))
    dests = tuple(range(n_edges, 2 * n_edges))
    r_min = (1.0 - eps) ** 2 / 2.0  # smallest non-zero rate/arrival used
    return NetworkSpec(2 * n_edges, edges, dests, beta=beta, r_min=r_min, r_max=1.0)


def exponential_adversary_step(t: int, q: QueueMatrix, n_edges: int, eps: float):
    """One slot of the doubling-threshold construction.

    Finds the first queue below its threshold (1-eps) * 2**i; feeds it while
    capping rates so the scheduler prefers serving the previous level.
    Returns (rate_set, injections as (node, dest, size) triples, i_prime) or
    None when every queue has reached its threshold.
    """
    caps = [0.0] * n_edges
    ip = -1
    for i in range(n_edges):
        if q.get(i, n_edges + i) < (1.0 - eps) * 2.0 ** i:
            ip = i
            break
    if ip < 0:
        return None
    if ip == 0:
        caps[0] = 1.0
        inj = (0, n_edges, 1.0 - eps)
    else:
        caps[ip - 1] = 1.0 - eps
        caps[ip] = (1.0 - eps) / 2.0
        inj = (ip, n_edges + ip, (1.0 - eps) ** 2 / 2.0)
    edges = tuple((i, n_edges + i) for i in range(n_edges))
    vectors = []
    for e in range(n_edges):
        if caps[e] > 0.0:
            vec = [0.0] * n_edges
            vec[e] = caps[e]
            vectors.append(tuple(vec))
    return ExplicitRates(tuple(vectors), edges), [inj], ip


class ExponentialAdversary:
    """Stateful wrapper assigning packet ids; reads the current queues."""

    def __init__(self, n_edges: int, eps: float):
        self.n_edges = n_edges
        self.eps = eps
        self._ids = itertools.count()

    def reset(self, rng: np.random.Generator) -> None:
        self._ids = itertools.count()

    def step(self, t: int, q: QueueMatrix):
        out = exponential_adversary_step(t, q, self.n_edges, self.eps)
        if out is None:
            return None
        rs, triples, _ = out
        events = [InjectionEvent(next(self._ids), t, node, dest, size)
                  for node, dest, size in triples]
        return rs, events


def exponential_witness(records) -> WitnessSchedule:
    """Witness for a recorded exponential-adversary run: each injection is
    served on its own edge in its injection slot, at the announced cap.

    The injected size is exactly (1 - eps) times that cap, so every window
    constraint is met with equality.
    """
    ws = WitnessSchedule()
    for rec in records:
        for ev in rec.injections:
            edge = ev.node  # edge id i feeds queue i in the parallel layout
            rs = rec.rate_set
            cap = 0.0
            for vec in rs.vectors:
                cap = max(cap, vec[edge])
            vec = [0.0] * len(rs.edges)
            vec[edge] = cap
            ws.rate_vectors[rec.slot] = tuple(vec)
            ws.add_move(ev.packet_id, edge, rec.slot, ev.size)
    return ws


# ---------------------------------------------------------------------------
# Cyclic phase adversaries (rotating rate and arrival vectors)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CyclicConfig:
    """Shared setup for the phase-rotating adversaries: three cap vectors,
    three arrival vectors over the source-destination pairs, and the 3x3
    load constants pairing them."""

    spec: NetworkSpec
    caps: tuple[tuple[float, ...], ...]
    gammas: tuple[tuple[float, ...], ...]
    c_table: tuple[tuple[float, ...], ...]
    pairs: tuple[tuple[int, int], ...]
    seed: int = 0

    def __post_init__(self):
        if len(self.caps) != 3 or len(self.gammas) != 3 or len(self.c_table) != 3:
            raise ValueError("cyclic setup needs 3 cap vectors, 3 arrival vectors, 3x3 constants")
        for g in self.gammas:
            if len(g) != len(self.pairs):
                raise ValueError("arrival vector length must match pair count")


def arrival_choice(seed: int, phase: int) -> int:
    """Deterministic per-phase pick among the three arrival vectors."""
    return int(np.random.default_rng((seed, 0x9E3779B9, phase)).integers(0, 3))


def cyclic_arrival_adversary_step(t: int, cfg: CyclicConfig, rate_idx: int):
    """Slot t (0-based) of the fixed-rate, rotating-arrival adversary:
    phase j uses arrivals c[rate_idx][jbar] * gamma[jbar], jbar = j mod 3."""
    phase = phase_index(t + 1)
    jbar = (phase - 1) % 3
    c = cfg.c_table[rate_idx][jbar]
    rs = MatchingRates(cfg.caps[rate_idx], cfg.spec.directed_edges)
    triples = [(s, d, c * g) for (s, d), g in zip(cfg.pairs, cfg.gammas[jbar]) if c * g > 0.0]
    return rs, triples


def cyclic_edge_and_arrival_adversary_step(t: int, cfg: CyclicConfig):
    """Slot t of the rotating-rate adversary: phase i uses caps ibar = i mod 3
    and a seeded random arrival vector gamma[j] scaled by c[ibar][j]."""
    phase = phase_index(t + 1)
    ibar = (phase - 1) % 3
    j = arrival_choice(cfg.seed, phase)
    c = cfg.c_table[ibar][j]
    rs = MatchingRates(cfg.caps[ibar], cfg.spec.directed_edges)
    triples = [(s, d, c * g) for (s, d), g in zip(cfg.pairs, cfg.gammas[j]) if c * g > 0.0]
    return rs, triples


class _PhasedAdversary:
    """Common machinery: materialize events, expose a kernel plan."""

    def __init__(self, cfg: CyclicConfig):
        self.cfg = cfg
        self._ids = itertools.count()

    def reset(self, rng: np.random.Generator) -> None:
        self._ids = itertools.count()

    def _phase_caps_arrivals(self, phase: int):
        raise NotImplementedError

    def step(self, t: int, q: QueueMatrix):
        phase = phase_index(t + 1)
        caps, c, gamma = self._phase_caps_arrivals(phase)
        rs = MatchingRates(caps, self.cfg.spec.directed_edges)
        events = [InjectionEvent(next(self._ids), t, s, d, c * g)
                  for (s, d), g in zip(self.cfg.pairs, gamma) if c * g > 0.0]
        return rs, events

    def kernel_plan(self, spec: NetworkSpec, horizon: int, beta: float,
                    q0: np.ndarray) -> PhasePlan:
        cfg = self.cfg
        pairs, dir1, dir2, _ = undirected_support(spec.directed_edges)
        seg_end, seg_caps, seg_inj = [], [], []
        phase = 1
        while True:
            lo, hi = phase_bounds(phase)
            if lo > horizon:
                break
            caps, c, gamma = self._phase_caps_arrivals(phase)
            seg_end.append(min(hi, horizon) - 1)  # protocol time -> 0-based slot
            seg_caps.append(caps)
            seg_inj.append([(s, d, c * g) for (s, d), g in zip(cfg.pairs, gamma)])
            phase += 1
        mats, mat_rows, seg_mat = _build_matrix_stack(pairs, dir1, dir2, seg_caps)
        nseg, npairs_inj = len(seg_end), len(cfg.pairs)
        inj_node = np.zeros((nseg, npairs_inj), np.int64)
        inj_col = np.zeros((nseg, npairs_inj), np.int64)
        inj_amt = np.zeros((nseg, npairs_inj))
        for si, triples in enumerate(seg_inj):
            for j, (s, d, a) in enumerate(triples):
                inj_node[si, j] = s
                inj_col[si, j] = spec.dest_col[d]
                inj_amt[si, j] = a
        return PhasePlan(
            q0=q0, dest_nodes=np.array(spec.destinations, np.int64),
            tails=spec.tails, heads=spec.heads,
            pair_dir1=np.array(dir1, np.int64), pair_dir2=np.array(dir2, np.int64),
            seg_end=np.array(seg_end, np.int64),
            seg_caps=np.array(seg_caps, np.float64),
            seg_mat=seg_mat, mats=mats, mat_rows=mat_rows,
            inj_node=inj_node, inj_col=inj_col, inj_amt=inj_amt,
            beta=beta, horizon=horizon)


def _build_matrix_stack(pairs, dir1, dir2, seg_caps):
    """Stack one matching matrix per distinct cap support, padded to a common
    row count (padding rows are all-zero and never beat a real row)."""
    supports = []
    seg_mat = []
    for caps in seg_caps:
        avail = tuple(pi for pi in range(len(pairs))
                      if caps[dir1[pi]] > 0 or (dir2[pi] >= 0 and caps[dir2[pi]] > 0))
        if avail not in supports:
            supports.append(avail)
        seg_mat.append(supports.index(avail))
    mats_list = [matching_matrix(pairs, avail) for avail in supports]
    rows = max(m.shape[0] for m in mats_list)
    stack = np.zeros((len(mats_list), rows, len(pairs)))
    for i, m in enumerate(mats_list):
        stack[i, : m.shape[0]] = m
    return stack, np.array([m.shape[0] for m in mats_list], np.int64), np.array(seg_mat, np.int64)


class CyclicArrivalAdversary(_PhasedAdversary):
    def __init__(self, cfg: CyclicConfig, rate_idx: int):
        super().__init__(cfg)
        self.rate_idx = rate_idx

    def _phase_caps_arrivals(self, phase: int):
        jbar = (phase - 1) % 3
        return (self.cfg.caps[self.rate_idx],
                self.cfg.c_table[self.rate_idx][jbar],
                self.cfg.gammas[jbar])


class CyclicEdgeArrivalAdversary(_PhasedAdversary):
    def _phase_caps_arrivals(self, phase: int):
        ibar = (phase - 1) % 3
        j = arrival_choice(self.cfg.seed, phase)
        return self.cfg.caps[ibar], self.cfg.c_table[ibar][j], self.cfg.gammas[j]


class ConstantAdversary(_PhasedAdversary):
    """Fixed caps and fixed per-slot arrivals, used by the stability probe."""

    def __init__(self, spec: NetworkSpec, caps: tuple[float, ...],
                 arrivals: tuple[tuple[int, int, float], ...]):
        self.spec = spec
        self.caps = tuple(caps)
        self.arrivals = tuple(arrivals)
        self._ids = itertools.count()

    def reset(self, rng: np.random.Generator) -> None:
        self._ids = itertools.count()

    def step(self, t: int, q: QueueMatrix):
        rs = MatchingRates(self.caps, self.spec.directed_edges)
        events = [InjectionEvent(next(self._ids), t, s, d, a)
                  for s, d, a in self.arrivals if a > 0.0]
        return rs, events

    def kernel_plan(self, spec, horizon, beta, q0):
        pairs, dir1, dir2, _ = undirected_support(spec.directed_edges)
        mats, mat_rows, seg_mat = _build_matrix_stack(pairs, dir1, dir2, [self.caps])
        nj = max(1, len(self.arrivals))
        inj_node = np.zeros((1, nj), np.int64)
        inj_col = np.zeros((1, nj), np.int64)
        inj_amt = np.zeros((1, nj))
        for j, (s, d, a) in enumerate(self.arrivals):
            inj_node[0, j] = s
            inj_col[0, j] = spec.dest_col[d]
            inj_amt[0, j] = a
        return PhasePlan(
            q0=q0, dest_nodes=np.array(spec.destinations, np.int64),
            tails=spec.tails, heads=spec.heads,
            pair_dir1=np.array(dir1, np.int64), pair_dir2=np.array(dir2, np.int64),
            seg_end=np.array([horizon - 1], np.int64),
            seg_caps=np.array([self.caps], np.float64),
            seg_mat=seg_mat, mats=mats, mat_rows=mat_rows,
            inj_node=inj_node, inj_col=inj_col, inj_amt=inj_amt,
            beta=beta, horizon=horizon)


# ---------------------------------------------------------------------------
# i.i.d. baseline and scripted adversaries
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ArrivalDist:
    """Per-slot arrival for one (node, dest): uniform in [low, high]
    (low == high gives a constant; zero means no arrival)."""

    node: int
    dest: int
    low: float
    high: float


class IIDAdversary:
    """Draws the rate set and the arrival sizes independently each slot."""

    def __init__(self, rate_sets: tuple[RateSet, ...], arrivals: tuple[ArrivalDist, ...],
                 probs: tuple[float, ...] | None = None):
        if not rate_sets:
            raise ValueError("need at least one rate set")
        self.rate_sets = tuple(rate_sets)
        self.arrivals = tuple(arrivals)
        self.probs = probs
        self._rng = np.random.default_rng(0)
        self._ids = itertools.count()

    def reset(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._ids = itertools.count()

    def step(self, t: int, q: QueueMatrix):
        if self.probs is None:
            idx = int(self._rng.integers(len(self.rate_sets)))
        else:
            idx = int(self._rng.choice(len(self.rate_sets), p=self.probs))
        events = []
        for a in self.arrivals:
            size = a.low if a.low == a.high else float(self._rng.uniform(a.low, a.high))
            if size > 0.0:
                events.append(InjectionEvent(next(self._ids), t, a.node, a.dest, size))
        return self.rate_sets[idx], events


class ScriptedAdversary:
    """Replays a fixed per-slot script of (rate set, injections)."""

    def __init__(self, steps):
        self.steps = list(steps)

    def reset(self, rng: np.random.Generator) -> None:
        pass

    def step(self, t: int, q: QueueMatrix):
        if t >= len(self.steps):
            return None
        return self.steps[t]


# ---------------------------------------------------------------------------
# Witness compliance
# ---------------------------------------------------------------------------

@dataclass
class ComplianceReport:
    ok: bool
    violations: list[str]
    packets_checked: int
    windows_checked: int

    @property
    def first_violation(self) -> str | None:
        return self.violations[0] if self.violations else None


def feasible_in_rate_set(vec: tuple[float, ...], rs: RateSet) -> bool:
    """Membership under downward closure."""
    if isinstance(rs, ExplicitRates):
        return any(all(x <= y + EPS_TOL for x, y in zip(vec, ref)) for ref in rs.vectors) \
            or all(x <= EPS_TOL for x in vec)
    pairs, _, _, pair_of_edge = undirected_support(rs.edges)
    touched: dict[int, set[int]] = defaultdict(set)
    for eid, x in enumerate(vec):
        if x <= EPS_TOL:
            continue
        if x > rs.caps[eid] + EPS_TOL:
            return False
        a, b = pairs[pair_of_edge[eid]]
        touched[a].add(pair_of_edge[eid])
        touched[b].add(pair_of_edge[eid])
    return all(len(ps) <= 1 for ps in touched.values())


def check_witness_compliance(ws: WitnessSchedule, events, rates,
                             ap: AdversaryParams, spec: NetworkSpec) -> ComplianceReport:
    """Verify a witness schedule against injections and announced rate sets.

    Checks, per packet: moves stay within the packet's window, cumulative
    per-node flow conservation holds (data can be forwarded only after it
    arrived), and at least a (1 - eps/2) fraction reaches the destination.
    Per slot: the witness rate vector is feasible and covers the per-edge
    moves.  Per window and edge: total moved mass is at most (1 - eps) times
    the witness capacity over the window.
    """
    viol: list[str] = []
    by_packet: dict[int, list[tuple[int, int, float]]] = defaultdict(list)
    for (pid, eid, slot), amt in ws.moves.items():
        if amt < -EPS_TOL:
            viol.append(f"negative move for packet {pid}")
        by_packet[pid].append((slot, eid, amt))
    ev_by_id = {ev.packet_id: ev for ev in events}
    for pid in by_packet:
        if pid not in ev_by_id:
            viol.append(f"witness moves for unknown packet {pid}")

    for ev in events:
        if not (spec.r_min - EPS_TOL <= ev.size <= spec.r_max + EPS_TOL):
            viol.append(f"packet {ev.packet_id} size {ev.size} outside [r_min, r_max]")
        if ev.node == ev.dest:
            continue
        moves = sorted(by_packet.get(ev.packet_id, []))
        if not moves:
            viol.append(f"no witness moves for packet {ev.packet_id}")
            continue
        lo, hi = ev.slot, ev.slot + ap.omega - 1
        if any(not (lo <= slot <= hi) for slot, _, _ in moves):
            viol.append(f"packet {ev.packet_id} moved outside window [{lo}, {hi}]")
        held = defaultdict(float)
        held[ev.node] = ev.size
        delivered = 0.0
        for slot in sorted({s for s, _, _ in moves}):
            incoming = defaultdict(float)
            for s_, eid, amt in moves:
                if s_ != slot:
                    continue
                tail, head = spec.directed_edges[eid]
                held[tail] -= amt
                if held[tail] < -EPS_TOL:
                    viol.append(
                        f"packet {ev.packet_id} forwards {amt} from node {tail} at slot "
                        f"{slot} before it arrived")
                incoming[head] += amt
            for node, amt in incoming.items():
                if node == ev.dest:
                    delivered += amt
                else:
                    held[node] += amt
        if delivered < (1.0 - ap.eps / 2.0) * ev.size - EPS_TOL:
            viol.append(
                f"packet {ev.packet_id} delivered {delivered:.6g} < "
                f"(1 - eps/2) * {ev.size:.6g}")

    # per-slot: witness vector feasible and covers the moves
    move_slots = sorted({slot for _, _, slot in ws.moves})
    for slot in move_slots:
        vec = ws.rate_vectors.get(slot)
        if vec is None:
            viol.append(f"no witness rate vector at slot {slot}")
            continue
        if slot in rates and not feasible_in_rate_set(vec, rates[slot]):
            viol.append(f"witness rate vector at slot {slot} not feasible")
        per_edge = defaultdict(float)
        for (pid, eid, s_), amt in ws.moves.items():
            if s_ == slot:
                per_edge[eid] += amt
        for eid, amt in per_edge.items():
            if amt > vec[eid] + EPS_TOL:
                viol.append(f"moves on edge {eid} at slot {slot} exceed witness rate")

    # per-window capacity at (1 - eps) utilization
    windows = sorted({ap.window_of(slot) for slot in move_slots})
    for j in windows:
        lo, hi = ap.window(j)
        cap = defaultdict(float)
        for slot in range(lo, hi + 1):
            vec = ws.rate_vectors.get(slot)
            if vec:
                for eid, r in enumerate(vec):
                    cap[eid] += r
        used = defaultdict(float)
        for (pid, eid, slot), amt in ws.moves.items():
            if lo <= slot <= hi:
                used[eid] += amt
        for eid, amt in used.items():
            if amt > (1.0 - ap.eps) * cap[eid] + EPS_TOL:
                viol.append(
                    f"window {j} edge {eid}: moved {amt:.6g} > (1 - eps) * capacity "
                    f"{cap[eid]:.6g}")

    return ComplianceReport(not viol, viol, len(events), len(windows))
