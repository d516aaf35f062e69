"""Grid experiment construction and orchestration: the n1 x n2 grid under
node-exclusive constraints, randomized cap/arrival vectors, the 3x3 load
probe, and the rotating-phase runs compared against their fixed-vector
counterparts."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .adversaries import (
    CyclicArrivalAdversary,
    CyclicConfig,
    CyclicEdgeArrivalAdversary,
)
from .engine import ProbeResult, SimulationTrace, binary_search_c, run
from .model import NetworkSpec, undirected_support


def grid_spec(n1: int, n2: int, beta: float = 1.0, r_min: float = 0.5,
              r_max: float = 2.0) -> NetworkSpec:
    """n1 x n2 grid, nodes row-major, both directions of every grid edge,
    every node a possible destination."""
    def nid(r, c):
        return r * n2 + c
    pairs = []
    for r in range(n1):
        for c in range(n2):
            if c + 1 < n2:
                pairs.append((nid(r, c), nid(r, c + 1)))
            if r + 1 < n1:
                pairs.append((nid(r, c), nid(r + 1, c)))
    pairs.sort()
    edges = []
    for a, b in pairs:
        edges.append((a, b))
        edges.append((b, a))
    return NetworkSpec(n1 * n2, tuple(edges), tuple(range(n1 * n2)),
                       beta=beta, r_min=r_min, r_max=r_max)


def single_edge_spec(cap_min: float = 0.05, cap_max: float = 4.0) -> NetworkSpec:
    """Two nodes, one edge 0 -> 1, destination 1 (probe sanity instance)."""
    return NetworkSpec(2, ((0, 1),), (1,), r_min=cap_min, r_max=cap_max)


def _connected(und_pairs, n_nodes: int, removed) -> bool:
    adj = {v: set() for v in range(n_nodes)}
    for pi, (a, b) in enumerate(und_pairs):
        if pi not in removed:
            adj[a].add(b)
            adj[b].add(a)
    seen = {0}
    stack = [0]
    while stack:
        for w in adj[stack.pop()]:
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return len(seen) == n_nodes


def _draw_removed(rng, und_pairs, n_nodes: int, count: int) -> tuple[int, ...]:
    # every source-destination pair must stay routable, so the support is
    # required to remain connected
    for _ in range(1000):
        rem = tuple(sorted(rng.choice(len(und_pairs), size=count, replace=False).tolist()))
        if _connected(und_pairs, n_nodes, rem):
            return rem
    raise ValueError("could not find a connected support after removals")


@dataclass(frozen=True)
class GridSetup:
    """One randomized experiment instance on the grid."""

    spec: NetworkSpec
    caps: tuple[tuple[float, ...], ...]        # 3 per-edge cap vectors
    gammas: tuple[tuple[float, ...], ...]      # 3 arrival vectors
    pairs: tuple[tuple[int, int], ...]         # K source-destination pairs
    removed: tuple[tuple[int, ...], ...]       # removed undirected pair ids per vector
    seed: int


def make_grid_setup(seed: int = 0, n1: int = 3, n2: int = 4, k_pairs: int = 10,
                    rate_range: tuple[float, float] = (0.5, 2.0),
                    gamma_range: tuple[float, float] = (0.5, 2.0),
                    removed_per_vector: int = 3,
                    removed: tuple[tuple[int, ...], ...] | None = None) -> GridSetup:
    """Randomized caps, arrival vectors and S-D pairs for one grid instance.

    Per cap vector, `removed_per_vector` undirected edges are taken out
    (both directions zero); the exact removed sets are configurable and
    default to a seeded random choice.
    """
    spec = grid_spec(n1, n2, r_min=rate_range[0], r_max=rate_range[1])
    und_pairs, dir1, dir2, pair_of_edge = undirected_support(spec.directed_edges)
    rng = np.random.default_rng(seed)
    if removed is None:
        removed = tuple(_draw_removed(rng, und_pairs, spec.node_count, removed_per_vector)
                        for _ in range(3))
    caps = []
    for rem in removed:
        vec = rng.uniform(rate_range[0], rate_range[1], size=spec.edge_count)
        for eid in range(spec.edge_count):
            if pair_of_edge[eid] in rem:
                vec[eid] = 0.0
        caps.append(tuple(float(x) for x in vec))
    all_pairs = [(s, d) for s in range(spec.node_count) for d in range(spec.node_count) if s != d]
    idx = rng.choice(len(all_pairs), size=k_pairs, replace=False)
    sd_pairs = tuple(all_pairs[i] for i in idx)
    gammas = tuple(tuple(float(x) for x in rng.uniform(gamma_range[0], gamma_range[1], size=k_pairs))
                   for _ in range(3))
    return GridSetup(spec, tuple(caps), gammas, sd_pairs, removed, seed)


def probe_c_table(setup: GridSetup, window: int = 100_000, tol: float = 1e-3,
                  seed: int = 0, c_hi: float = 1.0, workers: int = 2,
                  **verdict_kwargs) -> list[list[ProbeResult]]:
    """Binary-search the load constant for every (cap vector, arrival vector)
    pair; the nine searches fan out across threads (the compiled slot loop
    releases the GIL)."""
    tasks = [(i, j) for i in range(3) for j in range(3)]

    def probe(ij):
        i, j = ij
        return binary_search_c(setup.spec, setup.gammas[j], setup.pairs,
                               setup.caps[i], window=window, tol=tol, seed=seed,
                               c_hi=c_hi, **verdict_kwargs)

    with ThreadPoolExecutor(max_workers=max(1, workers)) as ex:
        results = list(ex.map(probe, tasks))
    table: list[list[ProbeResult]] = [[None] * 3 for _ in range(3)]
    for (i, j), res in zip(tasks, results):
        table[i][j] = res
    return table


def cyclic_config(setup: GridSetup, c_table) -> CyclicConfig:
    c = tuple(tuple(float(c_table[i][j]) for j in range(3)) for i in range(3))
    return CyclicConfig(setup.spec, setup.caps, setup.gammas, c, setup.pairs, setup.seed)


def run_experiment1(cfg: CyclicConfig, rate_idx: int, horizon: int,
                    seed: int = 0) -> SimulationTrace:
    """Fixed cap vector, arrivals rotating with the geometric phase clock."""
    return run(cfg.spec, CyclicArrivalAdversary(cfg, rate_idx), horizon, seed=seed)


def run_experiment2(cfg: CyclicConfig, horizon: int, seed: int = 0) -> SimulationTrace:
    """Both the cap vector and the arrival vector rotate per phase."""
    return run(cfg.spec, CyclicEdgeArrivalAdversary(cfg), horizon, seed=seed)


def run_fixed(cfg: CyclicConfig, rate_idx: int, gamma_idx: int, horizon: int,
              seed: int = 0) -> SimulationTrace:
    """Constant (cap vector, scaled arrival vector) pair for comparison."""
    from .adversaries import ConstantAdversary

    c = cfg.c_table[rate_idx][gamma_idx]
    arrivals = tuple((s, d, c * g) for (s, d), g in zip(cfg.pairs, cfg.gammas[gamma_idx]))
    return run(cfg.spec, ConstantAdversary(cfg.spec, cfg.caps[rate_idx], arrivals),
               horizon, seed=seed)


def experiment2_pairs(cfg: CyclicConfig, horizon: int) -> list[tuple[int, int]]:
    """Distinct (cap, arrival) index pairs the rotating run visits."""
    from .adversaries import arrival_choice, phase_bounds

    out = []
    phase = 1
    while True:
        lo, _hi = phase_bounds(phase)
        if lo > horizon:
            break
        pair = ((phase - 1) % 3, arrival_choice(cfg.seed, phase))
        if pair not in out:
            out.append(pair)
        phase += 1
    return out
