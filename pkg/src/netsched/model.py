"""Core data model: topology, per-destination queues, feasible rate sets,
potential function, and the per-slot state transitions.

Queues are fluid: they hold non-negative real amounts of data per
(node, destination) commodity.  Packets exist only as injection events;
once injected, their mass merges into the commodity queue.  A queue at its
own destination is pinned to zero (delivered data leaves the system).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache, cached_property

import numpy as np

EPS_TOL = 1e-9  # absolute comparison tolerance for all float queue arithmetic


class NegativeQueueError(ValueError):
    """A decision would drive some queue below zero (scheduler bug)."""


# ---------------------------------------------------------------------------
# Static problem instance
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class NetworkSpec:
    """Immutable network description.

    node_count:     number of nodes, indexed 0..node_count-1.
    directed_edges: ordered tuple of (tail, head) pairs; index = edge id.
    destinations:   nodes that absorb data addressed to them (single nodes).
    beta:           exponent of the backpressure weight / potential.
    r_min, r_max:   bounds for every non-zero rate and injection size.
    """

    node_count: int
    directed_edges: tuple[tuple[int, int], ...]
    destinations: tuple[int, ...]
    beta: float = 1.0
    r_min: float = 0.5
    r_max: float = 2.0

    def __post_init__(self):
        if self.node_count < 1:
            raise ValueError("node_count must be positive")
        seen = set()
        for e in self.directed_edges:
            tail, head = e
            if tail == head:
                raise ValueError(f"self-loop edge {e}")
            if not (0 <= tail < self.node_count and 0 <= head < self.node_count):
                raise ValueError(f"edge {e} out of range")
            if e in seen:
                raise ValueError(f"duplicate edge {e}")
            seen.add(e)
        if not self.destinations:
            raise ValueError("at least one destination required")
        for d in self.destinations:
            if not (0 <= d < self.node_count):
                raise ValueError(f"destination {d} out of range")
        if len(set(self.destinations)) != len(self.destinations):
            raise ValueError("duplicate destinations")
        if self.beta <= 0:
            raise ValueError("beta must be positive")
        if self.r_min <= 0:
            raise ValueError("r_min must be positive (non-zero rates bounded away from 0)")
        if self.r_max < self.r_min:
            raise ValueError("r_max must be >= r_min")

    @property
    def edge_count(self) -> int:
        return len(self.directed_edges)

    @cached_property
    def tails(self) -> np.ndarray:
        return np.array([e[0] for e in self.directed_edges], dtype=np.int64)

    @cached_property
    def heads(self) -> np.ndarray:
        return np.array([e[1] for e in self.directed_edges], dtype=np.int64)

    @cached_property
    def edge_index(self) -> dict[tuple[int, int], int]:
        return {e: i for i, e in enumerate(self.directed_edges)}

    @cached_property
    def dest_col(self) -> dict[int, int]:
        return {d: i for i, d in enumerate(self.destinations)}


# ---------------------------------------------------------------------------
# System state
# ---------------------------------------------------------------------------

class QueueMatrix:
    """Per-(node, destination) fluid backlog q[v, d] >= 0.

    Stored as an (n_nodes, n_destinations) float64 array; destination
    self-queues are kept at exactly zero.
    """

    __slots__ = ("array", "dest_nodes", "_dest_col")

    def __init__(self, n_nodes: int, dest_nodes: tuple[int, ...], array: np.ndarray | None = None):
        self.dest_nodes = tuple(dest_nodes)
        self._dest_col = {d: i for i, d in enumerate(self.dest_nodes)}
        if array is None:
            array = np.zeros((n_nodes, len(dest_nodes)), dtype=np.float64)
        else:
            array = np.asarray(array, dtype=np.float64)
            if array.shape != (n_nodes, len(dest_nodes)):
                raise ValueError("queue array shape mismatch")
        self.array = array

    @classmethod
    def zeros(cls, spec: NetworkSpec) -> "QueueMatrix":
        return cls(spec.node_count, spec.destinations)

    @classmethod
    def from_dict(cls, spec: NetworkSpec, values: dict[tuple[int, int], float]) -> "QueueMatrix":
        q = cls.zeros(spec)
        for (v, d), x in values.items():
            q.set(v, d, x)
        return q

    def dest_col(self, dest_node: int) -> int:
        return self._dest_col[dest_node]

    def get(self, node: int, dest_node: int) -> float:
        return float(self.array[node, self._dest_col[dest_node]])

    def set(self, node: int, dest_node: int, value: float) -> None:
        if value < 0:
            raise NegativeQueueError(f"q[{node},{dest_node}] = {value} < 0")
        if node == dest_node:
            if value != 0:
                raise ValueError("destination self-queue is pinned to zero")
            return
        self.array[node, self._dest_col[dest_node]] = value

    def copy(self) -> "QueueMatrix":
        return QueueMatrix(self.array.shape[0], self.dest_nodes, self.array.copy())

    def total(self) -> float:
        return float(self.array.sum())

    def max_queue(self) -> float:
        return float(self.array.max()) if self.array.size else 0.0

    def validate(self) -> None:
        if (self.array < -EPS_TOL).any():
            raise NegativeQueueError("negative backlog")
        for d, col in self._dest_col.items():
            if abs(self.array[d, col]) > EPS_TOL:
                raise ValueError(f"destination self-queue ({d},{d}) not zero")

    def __eq__(self, other) -> bool:
        return (isinstance(other, QueueMatrix)
                and self.dest_nodes == other.dest_nodes
                and np.array_equal(self.array, other.array))


def potential(q: QueueMatrix, beta: float) -> float:
    """Sum over all queues of backlog**(beta+1)."""
    if beta == 1.0:
        return float((q.array * q.array).sum())
    return float((q.array ** (beta + 1.0)).sum())


# ---------------------------------------------------------------------------
# Feasible rate sets
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ExplicitRates:
    """Finite family of simultaneously-transmittable rate vectors.

    Downward closed: any componentwise reduction of a listed vector is
    also feasible.  `edges` aligns components with directed edge ids.
    """

    vectors: tuple[tuple[float, ...], ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        k = len(self.edges)
        for vec in self.vectors:
            if len(vec) != k:
                raise ValueError("rate vector dimension mismatch")
            if any(r < 0 for r in vec):
                raise ValueError("negative rate")


@dataclass(frozen=True)
class MatchingRates:
    """Node-exclusive (matching-constraint) family: a vector is feasible iff
    the undirected supports of its active edges form a matching and each
    component is at most its cap."""

    caps: tuple[float, ...]
    edges: tuple[tuple[int, int], ...]

    def __post_init__(self):
        if len(self.caps) != len(self.edges):
            raise ValueError("caps dimension mismatch")
        if any(c < 0 for c in self.caps):
            raise ValueError("negative cap")


RateSet = ExplicitRates | MatchingRates


def validate_rate_set(rs: RateSet, spec: NetworkSpec) -> None:
    """Check non-zero components lie in [r_min, r_max] and edges match the spec."""
    if rs.edges != spec.directed_edges:
        raise ValueError("rate set edge list does not match network")
    rows = rs.vectors if isinstance(rs, ExplicitRates) else (rs.caps,)
    for vec in rows:
        for r in vec:
            if r != 0.0 and not (spec.r_min - EPS_TOL <= r <= spec.r_max + EPS_TOL):
                raise ValueError(f"non-zero rate {r} outside [{spec.r_min}, {spec.r_max}]")


# --- undirected support and matching enumeration ---------------------------

@lru_cache(maxsize=None)
def undirected_support(edges: tuple[tuple[int, int], ...]):
    """Group directed edges into undirected pairs.

    Returns (pairs, dir1, dir2, pair_of_edge): pairs is the sorted tuple of
    unordered node pairs; dir1/dir2 the directed edge ids per pair (dir2 = -1
    when only one direction exists); pair_of_edge maps edge id -> pair index.
    """
    by_pair: dict[tuple[int, int], list[int]] = {}
    for i, (u, v) in enumerate(edges):
        by_pair.setdefault((min(u, v), max(u, v)), []).append(i)
    pairs = tuple(sorted(by_pair))
    dir1, dir2, pair_of_edge = [], [], [0] * len(edges)
    for pi, p in enumerate(pairs):
        ids = by_pair[p]
        dir1.append(ids[0])
        dir2.append(ids[1] if len(ids) > 1 else -1)
        for eid in ids:
            pair_of_edge[eid] = pi
    return pairs, tuple(dir1), tuple(dir2), tuple(pair_of_edge)


@lru_cache(maxsize=None)
def enumerate_matchings(pairs: tuple[tuple[int, int], ...],
                        available: tuple[int, ...],
                        limit: int = 200_000) -> tuple[tuple[int, ...], ...]:
    """All matchings (as sorted tuples of pair indices) of the available
    undirected pairs, in lexicographic order starting with the empty one.

    Raises ValueError when more than `limit` matchings exist.
    """
    out: list[tuple[int, ...]] = [()]
    cur: list[int] = []
    used: set[int] = set()

    def rec(start: int):
        for k in range(start, len(available)):
            pi = available[k]
            a, b = pairs[pi]
            if a in used or b in used:
                continue
            cur.append(pi)
            used.update((a, b))
            out.append(tuple(cur))
            if len(out) > limit:
                raise ValueError(f"matching count exceeds limit {limit}")
            rec(k + 1)
            used.difference_update((a, b))
            cur.pop()

    rec(0)
    return tuple(out)


@lru_cache(maxsize=None)
def matching_matrix(pairs: tuple[tuple[int, int], ...],
                    available: tuple[int, ...],
                    limit: int = 200_000) -> np.ndarray:
    """0/1 matrix (one row per matching, lex order) over all pair indices."""
    matchings = enumerate_matchings(pairs, available, limit)
    mat = np.zeros((len(matchings), len(pairs)), dtype=np.float64)
    for r, m in enumerate(matchings):
        for pi in m:
            mat[r, pi] = 1.0
    return mat


def enumerate_rate_vectors(rs: RateSet, limit: int = 10_000) -> list[tuple[float, ...]]:
    """Maximal feasible vectors of a rate set.

    ExplicitRates: the listed vectors.  MatchingRates: one vector per matching
    of the (cap > 0) undirected support at full caps; when both directions of
    a matched pair have caps, every direction choice is listed.  Raises
    ValueError when the count exceeds `limit`.
    """
    if isinstance(rs, ExplicitRates):
        if len(rs.vectors) > limit:
            raise ValueError(f"vector count exceeds limit {limit}")
        return list(rs.vectors)
    pairs, dir1, dir2, _ = undirected_support(rs.edges)
    avail = tuple(pi for pi in range(len(pairs))
                  if rs.caps[dir1[pi]] > 0 or (dir2[pi] >= 0 and rs.caps[dir2[pi]] > 0))
    matchings = enumerate_matchings(pairs, avail, limit)
    k = len(rs.edges)
    out: list[tuple[float, ...]] = []
    for m in matchings:
        # per matched pair, the directions with positive cap are alternatives
        choices = []
        for pi in m:
            alts = [eid for eid in (dir1[pi], dir2[pi]) if eid >= 0 and rs.caps[eid] > 0]
            choices.append(alts)
        for combo in itertools.product(*choices) if m else [()]:
            vec = [0.0] * k
            for eid in combo:
                vec[eid] = rs.caps[eid]
            out.append(tuple(vec))
            if len(out) > limit:
                raise ValueError(f"vector count exceeds limit {limit}")
    return out


# ---------------------------------------------------------------------------
# Injections and schedule decisions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class InjectionEvent:
    """One packet injection: `size` units for destination `dest` appear at
    `node` during slot `slot` (after service)."""

    packet_id: int
    slot: int
    node: int
    dest: int
    size: float

    def __post_init__(self):
        if self.size <= 0:
            raise ValueError("injection size must be positive")


@dataclass(frozen=True)
class ScheduleDecision:
    """Chosen transfers for one slot.

    rates:     base rate vector (an element of the slot's feasible set,
               possibly componentwise reduced under downward closure).
    dest:      per-edge destination choice (None = idle edge).
    amounts:   transferred mass s_e = min(rate, queue differential / 2).
    objective: sum of amounts weighted by the q**beta differentials.
    """

    edges: tuple[tuple[int, int], ...]
    rates: tuple[float, ...]
    dest: tuple[int | None, ...]
    amounts: tuple[float, ...]
    objective: float

    @classmethod
    def zero(cls, edges: tuple[tuple[int, int], ...]) -> "ScheduleDecision":
        k = len(edges)
        return cls(edges, (0.0,) * k, (None,) * k, (0.0,) * k, 0.0)

    def active_edges(self) -> tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.amounts) if s > 0)

    def validate(self, q: QueueMatrix, beta: float) -> None:
        """Check the per-edge transfer invariants against queue state q."""
        for i, (tail, head) in enumerate(self.edges):
            s = self.amounts[i]
            if s < 0:
                raise ValueError(f"negative transfer on edge {i}")
            if s == 0:
                continue
            d = self.dest[i]
            if d is None:
                raise ValueError(f"transfer without destination on edge {i}")
            qa, qb = q.get(tail, d), q.get(head, d)
            if qa < qb - EPS_TOL:
                raise ValueError(f"edge {i} moves data from a smaller to a taller queue")
            expect = min(self.rates[i], abs(qa - qb) / 2.0)
            if abs(s - expect) > EPS_TOL:
                raise ValueError(f"edge {i} amount {s} != min(rate, |dq|/2) = {expect}")


def apply_decision(q: QueueMatrix, dec: ScheduleDecision) -> QueueMatrix:
    """Apply all transfers of a decision: subtract from sender queues, add to
    receiver queues, absorbing mass that reaches its destination.

    Raises NegativeQueueError when the combined transfers would overdraw a
    queue (signals a scheduler bug or an unsafe rate-set family).
    """
    out = q.copy()
    arr = out.array
    for i in dec.active_edges():
        tail, head = dec.edges[i]
        d = dec.dest[i]
        s = dec.amounts[i]
        col = out.dest_col(d)
        arr[tail, col] -= s
        if head != d:
            arr[head, col] += s
    if (arr < -EPS_TOL).any():
        raise NegativeQueueError("decision overdraws a queue")
    np.clip(arr, 0.0, None, out=arr)
    return out


def apply_injections(q: QueueMatrix, events: list[InjectionEvent]) -> QueueMatrix:
    """Add injected mass to its (node, dest) queue; injections addressed to
    their own node are absorbed immediately."""
    out = q.copy()
    for ev in events:
        if ev.node == ev.dest:
            continue
        out.array[ev.node, out.dest_col(ev.dest)] += ev.size
    return out


def delivered_mass(before: QueueMatrix, after: QueueMatrix, injected: float = 0.0) -> float:
    """Mass absorbed at destinations across a transition (by conservation)."""
    return before.total() + injected - after.total()
