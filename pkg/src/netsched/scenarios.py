"""Witness-backed audit scenarios.

Small instances built so the audit invariants have teeth: box rate sets
(every edge may transmit each slot), backlogs pre-seeded tall enough that
the scheduler transmits at full cap on every edge a witness uses, witness
load kept at (1 - eps) utilization, and same-commodity packets separated
across windows so each packet's assigned portions align with its own
witness shares.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .adversaries import AdversaryParams, ScriptedAdversary, WitnessSchedule
from .model import ExplicitRates, InjectionEvent, NetworkSpec, QueueMatrix


@dataclass
class AuditScenario:
    name: str
    spec: NetworkSpec
    ap: AdversaryParams
    adversary: ScriptedAdversary
    witness: WitnessSchedule
    q0: QueueMatrix
    horizon: int


def _finalize_spec(n_nodes, edges, dests, caps, sizes, beta):
    nonzero = [c for c in caps if c > 0] + list(sizes)
    r_min = min(nonzero) * 0.999
    r_max = max(nonzero + [1.0]) * 1.001
    return NetworkSpec(n_nodes, tuple(edges), tuple(dests), beta=beta,
                       r_min=r_min, r_max=r_max)


def parallel_scenario(seed: int, n_edges: int = 3, omega: int = 2,
                      eps: float = 0.3, beta: float = 1.0,
                      n_windows: int = 3) -> AuditScenario:
    """Independent single-hop edges i -> n+i; at most one packet per edge per
    window, each served by the witness in its injection slot."""
    rng = np.random.default_rng((seed, 11))
    caps = rng.uniform(0.6, 1.0, size=n_edges)
    edges = [(i, n_edges + i) for i in range(n_edges)]
    horizon = (n_windows + 1) * omega
    box = tuple(float(c) for c in caps)
    witness = WitnessSchedule()
    steps = []
    sizes = []
    pid = 0
    script_events: list[list[InjectionEvent]] = [[] for _ in range(horizon)]
    prev_used: set[int] = set()
    for w in range(n_windows):
        # consecutive windows use disjoint edges: the audit of a window spans
        # the packets of two windows, and same-commodity contention there
        # would misattribute assigned portions across packets
        avail = sorted(set(range(n_edges)) - prev_used)
        if not avail:
            prev_used = set()
            continue
        n_packets = int(rng.integers(1, min(3, len(avail)) + 1))
        used = rng.choice(avail, size=n_packets, replace=False)
        prev_used = set(int(e) for e in used)
        for e in used:
            slot = int(rng.integers(w * omega, (w + 1) * omega))
            size = (1.0 - eps) * caps[e] * float(rng.uniform(0.4, 0.95))
            ev = InjectionEvent(pid, slot, int(e), n_edges + int(e), size)
            script_events[slot].append(ev)
            witness.add_move(pid, int(e), slot, size)
            sizes.append(size)
            pid += 1
    spec = _finalize_spec(2 * n_edges, edges, range(n_edges, 2 * n_edges),
                          box, sizes, beta)
    rs = ExplicitRates((box,), spec.directed_edges)
    for t in range(horizon):
        witness.rate_vectors[t] = box
        steps.append((rs, script_events[t]))
    q0 = QueueMatrix.zeros(spec)
    for i in range(n_edges):
        q0.set(i, n_edges + i, float(rng.uniform(60.0, 160.0)))
    return AuditScenario(f"parallel-{seed}", spec, AdversaryParams(omega, eps),
                         ScriptedAdversary(steps), witness, q0, horizon)


def chain_scenario(seed: int, hops: int = 2, omega: int = 3, eps: float = 0.3,
                   beta: float = 1.0, n_packets: int = 2) -> AuditScenario:
    """Forward chain 0 -> 1 -> ... -> hops with one commodity; one packet
    every other window, routed hop-by-hop by the witness."""
    if omega < hops:
        raise ValueError("window must cover the path length")
    rng = np.random.default_rng((seed, 23))
    caps = rng.uniform(0.6, 1.0, size=hops)
    edges = [(i, i + 1) for i in range(hops)]
    dest = hops
    box = tuple(float(c) for c in caps)
    horizon = (2 * n_packets + 1) * omega
    witness = WitnessSchedule()
    script_events: list[list[InjectionEvent]] = [[] for _ in range(horizon)]
    sizes = []
    for p in range(n_packets):
        w = 2 * p  # every other window keeps audit windows single-packet
        slot = w * omega + int(rng.integers(0, omega - hops + 1))
        size = (1.0 - eps) * float(caps.min()) * float(rng.uniform(0.4, 0.95))
        ev = InjectionEvent(p, slot, 0, dest, size)
        script_events[slot].append(ev)
        for h in range(hops):
            witness.add_move(p, h, slot + h, size)
        sizes.append(size)
    spec = _finalize_spec(hops + 1, edges, (dest,), box, sizes, beta)
    rs = ExplicitRates((box,), spec.directed_edges)
    steps = []
    for t in range(horizon):
        witness.rate_vectors[t] = box
        steps.append((rs, script_events[t]))
    q0 = QueueMatrix.zeros(spec)
    top = float(rng.uniform(250.0, 400.0))
    for i in range(hops):
        q0.set(i, dest, top * (hops - i) / hops)
    return AuditScenario(f"chain-{seed}", spec, AdversaryParams(omega, eps),
                         ScriptedAdversary(steps), witness, q0, horizon)


def make_scenarios(count: int, seed0: int = 0) -> list[AuditScenario]:
    """Deterministic mix of parallel and chain scenarios."""
    out = []
    for i in range(count):
        seed = seed0 + i
        rng = np.random.default_rng((seed, 5))
        eps = float(rng.uniform(0.15, 0.5))
        if i % 2 == 0:
            out.append(parallel_scenario(seed, n_edges=int(rng.integers(2, 4)),
                                         omega=int(rng.integers(1, 4)), eps=eps))
        else:
            hops = int(rng.integers(1, 3))
            out.append(chain_scenario(seed, hops=hops,
                                      omega=int(rng.integers(hops, 4)), eps=eps))
    return out
