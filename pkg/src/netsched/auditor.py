"""Post-hoc audit of a recorded run against a witness schedule.

The audit machinery mirrors the stability argument mechanically:

1. water_fill_shares turns witness movements into per-packet rate shares
   d[p, e, t'] drawn from the witness rate vectors, packet by packet, so that
   (1 - eps) * sum_t d = sum_t moved for every (packet, edge) in a window.
2. build_gamma converts those shares into per-packet portions of the
   scheduler's actual transfers via a three-way-min recursion over
   (edge, packet) with running residuals of the per-slot objective J, the
   per-edge transfer s_e, and the share-weighted total K_e.
3. per_packet_potential_delta prices each injection: the exact potential
   increase of the arriving mass minus the weighted decrease carried by the
   packet's assigned portions.
4. classify_bad_packet flags injections whose priced delta misses the
   guaranteed decrease by more than a slack constant.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .adversaries import AdversaryParams, ComplianceReport, WitnessSchedule, check_witness_compliance
from .model import EPS_TOL, InjectionEvent, NetworkSpec

RESIDUAL_TOL = 1e-9


class WaterFillError(ValueError):
    """Witness moves exceed the (1 - eps)-scaled capacity of some edge."""


class AssignmentRecursionError(RuntimeError):
    """A residual went negative beyond tolerance (internal error)."""


# ---------------------------------------------------------------------------
# Scalars
# ---------------------------------------------------------------------------

def q_star(eps: float, ell_p: float, c_const: float) -> float:
    """Backlog height above which a good injection strictly decreases the
    potential by more than (eps/2) * ell_p * q."""
    return (4.0 - 2.0 * eps) / ((2.0 * eps + eps * eps) * ell_p) * (c_const + 1.0)


def classify_bad_packet(delta: float, ell_p: float, q: float, eps: float,
                        c_const: float) -> bool:
    """True (bad) iff the priced potential change is at least
    -(eps / (1 - eps/2)) * ell_p * q + C + 1 (boundary inclusive)."""
    return bool(delta >= -(eps / (1.0 - eps / 2.0)) * ell_p * q + c_const + 1.0)


def small_link_transfer_bound(r_gaps) -> float:
    """(m/2) * (r_1 + ... + r_m)**2: cap on the total mass moved across m
    small inter-queue gaps before they equalize."""
    gaps = list(r_gaps)
    return len(gaps) / 2.0 * sum(gaps) ** 2


def slack_constant(spec: NetworkSpec, ap: AdversaryParams) -> float:
    """Explicit value for the audit slack constant: window length times the
    number of links a packet can be assigned to, times the worst per-slot
    transfer, times the worst queue drift inside one window (2 n R_max w)."""
    return (ap.omega * spec.edge_count * spec.r_max
            * 2.0 * spec.node_count * spec.r_max * ap.omega)


# ---------------------------------------------------------------------------
# Water-filling of witness rates into per-packet shares
# ---------------------------------------------------------------------------

@dataclass
class RateShareAllocation:
    """Per-window rate shares d[(packet_id, edge, slot)] carved out of the
    witness rate vectors."""

    window: int
    d: dict[tuple[int, int, int], float] = field(default_factory=dict)
    packet_order: tuple[int, ...] = ()

    def packet_edge_total(self, packet_id: int, edge: int) -> float:
        return sum(a for (p, e, _), a in self.d.items() if p == packet_id and e == edge)


def window_packets(events, ap: AdversaryParams, window: int) -> list[InjectionEvent]:
    """Packets of the two windows feeding window j (injection order)."""
    lo = (window - 1) * ap.omega
    hi = (window + 1) * ap.omega - 1
    return sorted((ev for ev in events if lo <= ev.slot <= hi),
                  key=lambda ev: (ev.slot, ev.packet_id))


def water_fill_shares(ws: WitnessSchedule, events, ap: AdversaryParams,
                      window: int) -> RateShareAllocation:
    """Allocate d shares for window j from residual witness rates.

    Packets are processed in injection order; each packet's per-edge demand
    within the window is its moved mass divided by (1 - eps), filled
    earliest slot first.  Raises WaterFillError when a demand cannot be met,
    which means the witness overdrew the window capacity.
    """
    lo, hi = ap.window(window)
    packets = window_packets(events, ap, window)
    residual: dict[tuple[int, int], float] = {}
    for slot in range(lo, hi + 1):
        vec = ws.rate_vectors.get(slot)
        if vec:
            for eid, r in enumerate(vec):
                if r > 0.0:
                    residual[(eid, slot)] = r
    alloc = RateShareAllocation(window=window,
                                packet_order=tuple(ev.packet_id for ev in packets))
    for ev in packets:
        demand: dict[int, float] = defaultdict(float)
        for (pid, eid, slot), amt in ws.moves.items():
            if pid == ev.packet_id and lo <= slot <= hi:
                demand[eid] += amt
        for eid in sorted(demand):
            need = demand[eid] / (1.0 - ap.eps)
            for slot in range(lo, hi + 1):
                if need <= EPS_TOL:
                    break
                avail = residual.get((eid, slot), 0.0)
                if avail <= 0.0:
                    continue
                take = min(avail, need)
                alloc.d[(ev.packet_id, eid, slot)] = take
                residual[(eid, slot)] = avail - take
                need -= take
            if need > EPS_TOL:
                raise WaterFillError(
                    f"window {window}, edge {eid}: witness rates short by {need:.6g} "
                    f"for packet {ev.packet_id}")
    return alloc


# ---------------------------------------------------------------------------
# Recursive assignment of scheduler transfers to packets
# ---------------------------------------------------------------------------

@dataclass
class PartialAssignment:
    """One packet's portions of the scheduler's transfers:
    (edge, destination, slot) -> amount."""

    packet_id: int
    s_share: dict[tuple[int, int, int], float] = field(default_factory=dict)

    def weighted_total(self, records_by_slot, beta: float, dest_col: int | None = None) -> float:
        total = 0.0
        for (eid, dest, slot), share in self.s_share.items():
            rec = records_by_slot[slot]
            tail, head = rec.decision.edges[eid]
            qa = rec.q_before.get(tail, dest)
            qb = rec.q_before.get(head, dest)
            diff = (qa - qb) if beta == 1.0 else qa ** beta - qb ** beta
            total += share * abs(diff)
        return total


@dataclass
class AssignmentWorkspace:
    """Per-slot totals and the outcome of the residual recursion."""

    slot: int
    window: int
    j_value: float                      # scheduler objective at the slot
    k_by_edge: dict[int, float]         # share-weighted witness totals
    weighted_assigned: float            # sum over assigned portions of share * diff
    min_residual: float

    @property
    def k_total(self) -> float:
        return sum(self.k_by_edge.values())

    @property
    def equality_gap(self) -> float:
        return self.weighted_assigned - self.k_total

    @property
    def dominated(self) -> bool:
        return bool(self.k_total <= self.j_value + RESIDUAL_TOL * max(1.0, abs(self.j_value)))


@dataclass
class GammaResult:
    assignments: dict[int, PartialAssignment]
    workspaces: list[AssignmentWorkspace]


def build_gamma(alloc: RateShareAllocation, records_by_slot, events,
                ap: AdversaryParams, beta: float,
                eps_hat: float = 0.0) -> GammaResult:
    """Run the residual recursion for one window.

    For every slot of the window and every (edge, packet) pair in fixed
    order, assign min{J_residual / diff, s_residual, K_residual / diff}
    where diff is the packet-destination backlog differential on the edge;
    pairs with non-positive differential get nothing.  With an approximate
    scheduler the shares enter scaled by (1 - eps_hat).
    """
    packets = window_packets(events, ap, alloc.window)
    lo, hi = ap.window(alloc.window)
    scale = 1.0 - eps_hat
    assignments = {ev.packet_id: PartialAssignment(ev.packet_id) for ev in packets}
    workspaces: list[AssignmentWorkspace] = []
    for slot in range(lo, hi + 1):
        rec = records_by_slot.get(slot)
        if rec is None:
            continue
        dec = rec.decision
        q = rec.q_before
        k_edges = len(dec.edges)

        def diff_at(eid: int, dest: int) -> float:
            tail, head = dec.edges[eid]
            qa = q.get(tail, dest)
            qb = q.get(head, dest)
            return (qa - qb) if beta == 1.0 else qa ** beta - qb ** beta

        j_value = 0.0
        for eid in range(k_edges):
            if dec.amounts[eid] > 0.0:
                j_value += dec.amounts[eid] * diff_at(eid, dec.dest[eid])
        k_by_edge: dict[int, float] = {}
        for eid in range(k_edges):
            total = 0.0
            for ev in packets:
                d = scale * alloc.d.get((ev.packet_id, eid, slot), 0.0)
                if d > 0.0:
                    total += d * diff_at(eid, ev.dest)
            k_by_edge[eid] = total

        j_res = j_value
        weighted = 0.0
        min_res = 0.0
        for eid in range(k_edges):
            s_res = dec.amounts[eid]
            k_res = k_by_edge[eid]
            for ev in packets:
                if s_res <= 0.0:
                    continue
                diff = diff_at(eid, ev.dest)
                if diff <= 0.0:
                    continue
                share = min(j_res / diff, s_res, k_res / diff)
                if share <= 0.0:
                    continue
                assignments[ev.packet_id].s_share[(eid, ev.dest, slot)] = (
                    assignments[ev.packet_id].s_share.get((eid, ev.dest, slot), 0.0) + share)
                s_res -= share
                j_res -= share * diff
                k_res -= share * diff
                weighted += share * diff
            min_res = min(min_res, s_res, k_res, j_res)
        if min_res < -RESIDUAL_TOL:
            raise AssignmentRecursionError(
                f"slot {slot}: residual fell to {min_res}")
        workspaces.append(AssignmentWorkspace(
            slot=slot, window=alloc.window, j_value=j_value,
            k_by_edge=k_by_edge, weighted_assigned=weighted, min_residual=min_res))
    return GammaResult(assignments, workspaces)


def definition_feasible(gammas: list[GammaResult], records_by_slot) -> tuple[bool, float]:
    """Conditions on assigned portions: non-negativity and, per (edge, slot),
    total assigned at most the scheduler's transfer.  Returns (ok, worst
    excess over the transfer)."""
    per_edge_slot: dict[tuple[int, int], float] = defaultdict(float)
    for g in gammas:
        for pa in g.assignments.values():
            for (eid, _dest, slot), share in pa.s_share.items():
                if share < -EPS_TOL:
                    return False, share
                per_edge_slot[(eid, slot)] += share
    worst = 0.0
    for (eid, slot), total in per_edge_slot.items():
        excess = total - records_by_slot[slot].decision.amounts[eid]
        worst = max(worst, excess)
    return bool(worst <= EPS_TOL), float(worst)


# ---------------------------------------------------------------------------
# Per-packet potential pricing
# ---------------------------------------------------------------------------

def per_packet_potential_delta(event: InjectionEvent, gamma_p: PartialAssignment,
                               records_by_slot, beta: float) -> float:
    """Exact potential increase of the injection minus the weighted decrease
    carried by the packet's assigned portions (evaluated at the actual
    per-slot backlogs, no asymptotic shortcut)."""
    if event.node == event.dest:
        return 0.0
    rec = records_by_slot[event.slot]
    q0 = rec.q_mid.get(event.node, event.dest)
    increase = (q0 + event.size) ** (beta + 1.0) - q0 ** (beta + 1.0)
    decrease = 0.0
    for (eid, dest, slot), share in gamma_p.s_share.items():
        r = records_by_slot[slot]
        tail, head = r.decision.edges[eid]
        qa = r.q_before.get(tail, dest)
        qb = r.q_before.get(head, dest)
        diff = (qa - qb) if beta == 1.0 else qa ** beta - qb ** beta
        decrease += share * (beta + 1.0) * abs(diff)
    return increase - decrease


# ---------------------------------------------------------------------------
# Whole-trace audit
# ---------------------------------------------------------------------------

@dataclass
class PacketAudit:
    packet_id: int
    slot: int
    node: int
    dest: int
    size: float
    q_at_injection: float
    delta: float
    decrease_bound: float     # -(eps/(1-eps/2)) * ell * (beta+1) * q**beta + C
    bad_threshold: float      # -(eps/(1-eps/2)) * ell * q + C + 1
    bad: bool

    def to_dict(self):
        return self.__dict__.copy()


@dataclass
class AuditReport:
    compliance: ComplianceReport
    packets: list[PacketAudit]
    workspaces: list[AssignmentWorkspace]
    constants: dict[str, float]
    definition_ok: bool
    worst_share_excess: float

    @property
    def n_bad(self) -> int:
        return int(sum(p.bad for p in self.packets))

    @property
    def all_dominated(self) -> bool:
        return all(w.dominated for w in self.workspaces)

    @property
    def max_equality_gap(self) -> float:
        return max((abs(w.equality_gap) for w in self.workspaces), default=0.0)

    def to_dict(self):
        return {
            "constants": self.constants,
            "compliant": self.compliance.ok,
            "violations": self.compliance.violations,
            "definition_feasible": self.definition_ok,
            "worst_share_excess": self.worst_share_excess,
            "n_packets": len(self.packets),
            "n_bad": self.n_bad,
            "all_dominated": self.all_dominated,
            "max_equality_gap": self.max_equality_gap,
            "packets": [p.to_dict() for p in self.packets],
            "slots": [{
                "slot": w.slot, "window": w.window, "objective": float(w.j_value),
                "k_total": float(w.k_total), "weighted_assigned": float(w.weighted_assigned),
                "equality_gap": float(w.equality_gap), "dominated": w.dominated,
            } for w in self.workspaces],
        }


def audit_trace(spec: NetworkSpec, trace, ws: WitnessSchedule, ap: AdversaryParams,
                beta: float | None = None, eps_hat: float = 0.0,
                c_const: float | None = None) -> AuditReport:
    """Full audit of a recorded run (requires audit-mode records)."""
    if trace.records is None:
        raise ValueError("trace was not recorded with audit=True")
    beta = spec.beta if beta is None else beta
    records_by_slot = {rec.slot: rec for rec in trace.records}
    events = [ev for rec in trace.records for ev in rec.injections]
    rates = {rec.slot: rec.rate_set for rec in trace.records}
    compliance = check_witness_compliance(ws, events, rates, ap, spec)

    n_windows = (max(records_by_slot) // ap.omega + 1) if records_by_slot else 0
    gammas: list[GammaResult] = []
    per_packet: dict[int, PartialAssignment] = {
        ev.packet_id: PartialAssignment(ev.packet_id) for ev in events}
    for j in range(n_windows):
        alloc = water_fill_shares(ws, events, ap, j)
        g = build_gamma(alloc, records_by_slot, events, ap, beta, eps_hat)
        gammas.append(g)
        for pid, pa in g.assignments.items():
            for key, share in pa.s_share.items():
                per_packet[pid].s_share[key] = per_packet[pid].s_share.get(key, 0.0) + share

    ok, worst = definition_feasible(gammas, records_by_slot)
    if c_const is None:
        c_const = slack_constant(spec, ap)
    eps_eff = ap.eps if eps_hat == 0.0 else (ap.eps - eps_hat) / (1.0 - eps_hat)
    packets = []
    for ev in sorted(events, key=lambda e: (e.slot, e.packet_id)):
        pa = per_packet[ev.packet_id]
        delta = per_packet_potential_delta(ev, pa, records_by_slot, beta)
        if ev.node == ev.dest:
            qinj = 0.0
        else:
            qinj = records_by_slot[ev.slot].q_mid.get(ev.node, ev.dest)
        coef = eps_eff / (1.0 - eps_eff / 2.0)
        packets.append(PacketAudit(
            packet_id=ev.packet_id, slot=ev.slot, node=ev.node, dest=ev.dest,
            size=ev.size, q_at_injection=qinj, delta=delta,
            decrease_bound=-coef * ev.size * (beta + 1.0) * qinj ** beta + c_const,
            bad_threshold=-coef * ev.size * qinj + c_const + 1.0,
            bad=classify_bad_packet(delta, ev.size, qinj, eps_eff, c_const)))
    workspaces = [w for g in gammas for w in g.workspaces]
    return AuditReport(
        compliance=compliance, packets=packets, workspaces=workspaces,
        constants={
            "C": c_const, "omega": ap.omega, "eps": ap.eps, "eps_hat": eps_hat,
            "eps_effective": eps_eff, "beta": beta,
            "q_star_smallest_packet": q_star(eps_eff, spec.r_min, c_const),
        },
        definition_ok=ok, worst_share_excess=worst)
