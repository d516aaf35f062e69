"""Per-slot max-weight decisions.

Each slot the scheduler picks a feasible rate vector and a destination per
edge so that the sum of transferred amounts weighted by the queue-height
differentials (raised to beta) is maximized.  Exact solvers: enumeration for
explicit vector families, and either matching enumeration or a blossom
matching for node-exclusive families.  The approximate mode degrades the
exact decision to a controlled fraction of its objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import networkx as nx
import numpy as np

from .model import (
    ExplicitRates,
    MatchingRates,
    QueueMatrix,
    RateSet,
    ScheduleDecision,
    enumerate_matchings,
    matching_matrix,
    undirected_support,
)

# matching supports with at most this many matchings are solved by enumeration
MATCHING_ENUM_LIMIT = 50_000


@dataclass(frozen=True)
class ApproxParams:
    """Approximation slack: mode 'exact' (eps_hat = 0) or 'synthetic-degrade'
    which returns a decision worth at least (1 - eps_hat) of the optimum."""

    eps_hat: float = 0.0
    mode: str = "exact"

    def __post_init__(self):
        if self.mode not in ("exact", "synthetic-degrade"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not (0.0 <= self.eps_hat < 1.0):
            raise ValueError("eps_hat must be in [0, 1)")
        if (self.eps_hat == 0.0) != (self.mode == "exact"):
            raise ValueError("eps_hat = 0 iff mode = 'exact'")


def residual_eps(eps: float, eps_hat: float) -> float:
    """Effective adversary slack left after an eps_hat-approximate scheduler."""
    return (eps - eps_hat) / (1.0 - eps_hat)


def edge_weight(q: QueueMatrix, e: tuple[int, int], r_e: float, beta: float):
    """Backpressure weight of one edge at rate r_e.

    Picks the destination with the largest q**beta differential (ties to the
    lowest destination index) and returns (weight, destination) with
    weight = min(r_e, |dq|/2) * differential, clamped at zero.
    """
    tail, head = e
    best_d = q.dest_nodes[0]
    best_diff = -np.inf
    for d in q.dest_nodes:
        qa, qb = q.get(tail, d), q.get(head, d)
        diff = (qa - qb) if beta == 1.0 else (qa ** beta - qb ** beta)
        if diff > best_diff:
            best_diff, best_d = diff, d
    if best_diff <= 0.0 or r_e <= 0.0:
        return 0.0, best_d
    dq = q.get(tail, best_d) - q.get(head, best_d)
    s = min(r_e, abs(dq) / 2.0)
    return s * best_diff, best_d


def _best_transfer(q: QueueMatrix, tail: int, head: int, r_e: float, beta: float):
    """(weight, dest, amount) maximizing amount * differential over
    destinations; ties go to the lowest destination index.

    For beta != 1 this can differ from the destination with the largest raw
    differential, because the amount min(r, dq/2) saturates per destination.
    """
    best = (0.0, None, 0.0)
    if r_e <= 0.0:
        return best
    arr = q.array
    for col, d in enumerate(q.dest_nodes):
        qa = arr[tail, col]
        qb = arr[head, col]
        dq = qa - qb
        if dq <= 0.0:
            continue
        diff = dq if beta == 1.0 else qa ** beta - qb ** beta
        s = min(r_e, 0.5 * dq)
        w = s * diff
        if w > best[0]:
            best = (w, d, s)
    return best


def _decision_from_rates(q: QueueMatrix, edges, rates, beta: float) -> ScheduleDecision:
    """Greedy per-edge destination choice for a fixed rate vector (the
    objective is separable across edges)."""
    k = len(edges)
    dest: list[int | None] = [None] * k
    amounts = [0.0] * k
    used = list(rates)
    total = 0.0
    for i in range(k):
        w, d, s = _best_transfer(q, edges[i][0], edges[i][1], rates[i], beta)
        if s > 0.0 and w > 0.0:
            dest[i], amounts[i] = d, s
            total += w
        else:
            used[i] = 0.0
    return ScheduleDecision(tuple(edges), tuple(used), tuple(dest), tuple(amounts), total)


def _pair_weights(q: QueueMatrix, rs: MatchingRates, beta: float):
    """Per undirected pair: best (weight, directed edge id, dest, amount),
    preferring the first direction on ties."""
    pairs, dir1, dir2, _ = undirected_support(rs.edges)
    out = []
    for pi in range(len(pairs)):
        best = (0.0, -1, None, 0.0)
        for eid in (dir1[pi], dir2[pi]):
            if eid < 0 or rs.caps[eid] <= 0.0:
                continue
            w, d, s = _best_transfer(q, rs.edges[eid][0], rs.edges[eid][1], rs.caps[eid], beta)
            if w > best[0]:
                best = (w, eid, d, s)
        out.append(best)
    return pairs, out


def _matching_decision(q: QueueMatrix, rs: MatchingRates, beta: float,
                       chosen_pairs, pair_best) -> ScheduleDecision:
    k = len(rs.edges)
    rates = [0.0] * k
    dest: list[int | None] = [None] * k
    amounts = [0.0] * k
    total = 0.0
    for pi in chosen_pairs:
        w, eid, d, s = pair_best[pi]
        if w <= 0.0 or s <= 0.0:
            continue
        rates[eid] = rs.caps[eid]
        dest[eid], amounts[eid] = d, s
        total += w
    return ScheduleDecision(rs.edges, tuple(rates), tuple(dest), tuple(amounts), total)


def max_weight_exact(q: QueueMatrix, rs: RateSet, beta: float,
                     matching_method: str = "auto") -> ScheduleDecision:
    """Exact max-weight decision.

    ExplicitRates: enumerate vectors (per-edge destination choice is
    separable).  MatchingRates: enumerate matchings of the support when small
    (argmax over a precomputed matching/weight product, lexicographic
    first-of-ties), otherwise one maximum-weight matching (blossom) on the
    undirected support whose pair weights take the better direction at full
    cap.  `matching_method` forces 'enumerate' or 'blossom'.
    """
    if isinstance(rs, ExplicitRates):
        if not rs.vectors:
            return ScheduleDecision.zero(rs.edges)
        best: ScheduleDecision | None = None
        for vec in rs.vectors:
            dec = _decision_from_rates(q, rs.edges, vec, beta)
            if best is None or dec.objective > best.objective + 0.0:
                best = dec
        if best.objective <= 0.0:
            return ScheduleDecision.zero(rs.edges)
        return best

    pairs, pair_best = _pair_weights(q, rs, beta)
    w = np.array([b[0] for b in pair_best])
    if not w.size or w.max() <= 0.0:
        return ScheduleDecision.zero(rs.edges)

    if matching_method not in ("auto", "enumerate", "blossom"):
        raise ValueError(f"unknown matching_method {matching_method!r}")
    use_enum = matching_method == "enumerate"
    if matching_method == "auto":
        avail = _available_pairs(rs, pairs)
        try:
            enumerate_matchings(pairs, avail, MATCHING_ENUM_LIMIT)
            use_enum = True
        except ValueError:
            use_enum = False

    if use_enum:
        avail = _available_pairs(rs, pairs)
        mat = matching_matrix(pairs, avail, MATCHING_ENUM_LIMIT)
        scores = mat @ w
        top = float(scores.max())
        # first row within a sub-ulp band of the maximum: exact ties resolve
        # to the lexicographically smallest matching on every backend
        row = int(np.argmax(scores >= top - 1e-12 * top))
        chosen = np.flatnonzero(mat[row]).tolist()
    else:
        g = nx.Graph()
        for pi, (a, b) in enumerate(pairs):
            if w[pi] > 0.0:
                g.add_edge(a, b, weight=float(w[pi]), pair=pi)
        mate = nx.max_weight_matching(g, maxcardinality=False)
        chosen = sorted(g.edges[a, b]["pair"] for a, b in mate)
    return _matching_decision(q, rs, beta, chosen, pair_best)


def _available_pairs(rs: MatchingRates, pairs) -> tuple[int, ...]:
    _, dir1, dir2, _ = undirected_support(rs.edges)
    return tuple(pi for pi in range(len(pairs))
                 if rs.caps[dir1[pi]] > 0 or (dir2[pi] >= 0 and rs.caps[dir2[pi]] > 0))


def max_weight_approx(q: QueueMatrix, rs: RateSet, beta: float,
                      ap: ApproxParams, rng: np.random.Generator) -> ScheduleDecision:
    """Exact decision degraded to an objective in [(1-eps_hat) * J, J].

    One active edge (chosen by `rng`) has its transfer scaled down just far
    enough to land on the floor; if that edge alone cannot absorb the whole
    reduction its transfer is zeroed, which still leaves the objective above
    the floor.  The returned decision keeps every transfer invariant (the
    reduced rate is feasible by downward closure).
    """
    dec = max_weight_exact(q, rs, beta)
    if ap.mode == "exact" or ap.eps_hat == 0.0 or dec.objective <= 0.0:
        return dec
    active = dec.active_edges()
    i = int(active[rng.integers(len(active))])
    tail, head = dec.edges[i]
    d = dec.dest[i]
    qa, qb = q.get(tail, d), q.get(head, d)
    diff = (qa - qb) if beta == 1.0 else (qa ** beta - qb ** beta)
    cut = ap.eps_hat * dec.objective
    w_i = dec.amounts[i] * diff
    new_s = 0.0 if w_i < cut else dec.amounts[i] - cut / diff
    rates = list(dec.rates)
    dest = list(dec.dest)
    amounts = list(dec.amounts)
    rates[i] = new_s  # feasible: componentwise reduction of the chosen vector
    amounts[i] = new_s
    if new_s == 0.0:
        dest[i] = None
    objective = dec.objective - (w_i - new_s * diff)
    return ScheduleDecision(dec.edges, tuple(rates), tuple(dest), tuple(amounts), objective)
