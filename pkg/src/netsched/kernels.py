"""Hot slot loops.

Two implementations of each kernel: a scalar loop compiled with numba
(@njit, nogil so probe sweeps can fan out across threads) and a vectorized
numpy fallback.  Set NETSCHED_NO_NUMBA=1 to force the fallback; it is also
used automatically when numba is unavailable.  `python -m netsched.bench`
compares the two backends.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

try:
    from numba import njit

    _HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _HAVE_NUMBA = False

USE_NUMBA = _HAVE_NUMBA and os.environ.get("NETSCHED_NO_NUMBA", "0").lower() not in (
    "1", "true", "yes",
)


@dataclass
class PhasePlan:
    """Array form of a run whose rate caps and per-slot injections are
    piecewise constant over contiguous slot segments, under node-exclusive
    (matching) constraints."""

    q0: np.ndarray           # (n, D) initial backlog
    dest_nodes: np.ndarray   # (D,) node id per destination column
    tails: np.ndarray        # (k,)
    heads: np.ndarray        # (k,)
    pair_dir1: np.ndarray    # (U,) directed edge id per undirected pair
    pair_dir2: np.ndarray    # (U,) second direction or -1
    seg_end: np.ndarray      # (P,) inclusive last slot of each segment
    seg_caps: np.ndarray     # (P, k) per-edge caps per segment
    seg_mat: np.ndarray      # (P,) index into the matching-matrix stack
    mats: np.ndarray         # (S, Mmax, U) 0/1 matchings, lex row order
    mat_rows: np.ndarray     # (S,) valid row count per stacked matrix
    inj_node: np.ndarray     # (P, J)
    inj_col: np.ndarray      # (P, J)
    inj_amt: np.ndarray      # (P, J) zero entries are padding
    beta: float
    horizon: int


def _phase_loop(q, dest_nodes, tails, heads, dir1, dir2, seg_end, seg_caps,
                seg_mat, mats, mat_rows, inj_node, inj_col, inj_amt, beta, horizon):
    n, ncol = q.shape
    npair = dir1.shape[0]
    max_queue = np.empty(horizon)
    pot = np.empty(horizon)
    backlog = np.empty(horizon)
    objective = np.empty(horizon)
    delivered = np.empty(horizon)
    pw = np.zeros(npair)
    p_eid = np.zeros(npair, np.int64)
    p_col = np.zeros(npair, np.int64)
    p_s = np.zeros(npair)
    seg = 0
    for t in range(horizon):
        while t > seg_end[seg]:
            seg += 1
        # best direction + destination per undirected pair
        for pi in range(npair):
            bw = 0.0
            be = -1
            bc = -1
            bs = 0.0
            for which in range(2):
                eid = dir1[pi] if which == 0 else dir2[pi]
                if eid < 0:
                    continue
                cap = seg_caps[seg, eid]
                if cap <= 0.0:
                    continue
                tl = tails[eid]
                hd = heads[eid]
                for c in range(ncol):
                    dq = q[tl, c] - q[hd, c]
                    if dq <= 0.0:
                        continue
                    diff = dq if beta == 1.0 else q[tl, c] ** beta - q[hd, c] ** beta
                    s = cap if cap < 0.5 * dq else 0.5 * dq
                    w = s * diff
                    if w > bw:
                        bw = w
                        be = eid
                        bc = c
                        bs = s
            pw[pi] = bw
            p_eid[pi] = be
            p_col[pi] = bc
            p_s[pi] = bs
        # max-weight matching over the precomputed rows; ties (and sub-ulp
        # near-ties from summation order) resolve to the first row in the
        # lexicographic enumeration so every backend picks the same matching
        mi = seg_mat[seg]
        best_val = 0.0
        for r in range(mat_rows[mi]):
            acc = 0.0
            for pi in range(npair):
                if mats[mi, r, pi] != 0.0:
                    acc += pw[pi]
            if acc > best_val:
                best_val = acc
        band = best_val - 1e-12 * best_val
        best_row = 0
        obj = 0.0
        if best_val > 0.0:
            for r in range(mat_rows[mi]):
                acc = 0.0
                for pi in range(npair):
                    if mats[mi, r, pi] != 0.0:
                        acc += pw[pi]
                if acc >= band:
                    best_row = r
                    obj = acc
                    break
        dl = 0.0
        if obj > 0.0:
            for pi in range(npair):
                if mats[mi, best_row, pi] != 0.0 and pw[pi] > 0.0:
                    eid = p_eid[pi]
                    c = p_col[pi]
                    s = p_s[pi]
                    q[tails[eid], c] -= s
                    if heads[eid] == dest_nodes[c]:
                        dl += s
                    else:
                        q[heads[eid], c] += s
        for j in range(inj_amt.shape[1]):
            a = inj_amt[seg, j]
            if a <= 0.0:
                continue
            nd = inj_node[seg, j]
            c = inj_col[seg, j]
            if nd == dest_nodes[c]:
                dl += a
            else:
                q[nd, c] += a
        mx = 0.0
        po = 0.0
        bk = 0.0
        for v in range(n):
            for c in range(ncol):
                x = q[v, c]
                if x > mx:
                    mx = x
                bk += x
                po += x * x if beta == 1.0 else x ** (beta + 1.0)
        max_queue[t] = mx
        pot[t] = po
        backlog[t] = bk
        objective[t] = obj
        delivered[t] = dl
    return max_queue, pot, backlog, objective, delivered


def _phase_numpy(q, dest_nodes, tails, heads, dir1, dir2, seg_end, seg_caps,
                 seg_mat, mats, mat_rows, inj_node, inj_col, inj_amt, beta, horizon):
    k = tails.shape[0]
    erange = np.arange(k)
    has2 = dir2 >= 0
    dir2s = np.where(has2, dir2, 0)
    max_queue = np.empty(horizon)
    pot = np.empty(horizon)
    backlog = np.empty(horizon)
    objective = np.empty(horizon)
    delivered = np.empty(horizon)
    seg = 0
    for t in range(horizon):
        while t > seg_end[seg]:
            seg += 1
        caps = seg_caps[seg]
        qt = q[tails]
        qh = q[heads]
        dq = qt - qh
        diff = dq if beta == 1.0 else qt ** beta - qh ** beta
        s = np.minimum(caps[:, None], 0.5 * dq)
        w = np.where((dq > 0.0) & (caps[:, None] > 0.0), s * diff, 0.0)
        ecol = np.argmax(w, axis=1)
        ew = w[erange, ecol]
        es = np.where(ew > 0.0, s[erange, ecol], 0.0)
        w1 = ew[dir1]
        w2 = np.where(has2, ew[dir2s], 0.0)
        take2 = w2 > w1
        pw = np.where(take2, w2, w1)
        p_eid = np.where(take2, dir2s, dir1)
        mi = int(seg_mat[seg])
        scores = mats[mi, : mat_rows[mi]] @ pw
        top = float(scores.max())
        if top > 0.0:
            best_row = int(np.argmax(scores >= top - 1e-12 * top))
            obj = float(scores[best_row])
        else:
            best_row = 0
            obj = 0.0
        dl = 0.0
        if obj > 0.0:
            for pi in np.flatnonzero(mats[mi, best_row]):
                if pw[pi] <= 0.0:
                    continue
                eid = int(p_eid[pi])
                c = int(ecol[eid])
                amt = float(es[eid])
                q[tails[eid], c] -= amt
                if heads[eid] == dest_nodes[c]:
                    dl += amt
                else:
                    q[heads[eid], c] += amt
        amts = inj_amt[seg]
        for j in np.flatnonzero(amts > 0.0):
            nd = int(inj_node[seg, j])
            c = int(inj_col[seg, j])
            if nd == dest_nodes[c]:
                dl += float(amts[j])
            else:
                q[nd, c] += amts[j]
        max_queue[t] = q.max()
        pot[t] = (q * q).sum() if beta == 1.0 else (q ** (beta + 1.0)).sum()
        backlog[t] = q.sum()
        objective[t] = obj
        delivered[t] = dl
    return max_queue, pot, backlog, objective, delivered


def _exponential_loop(q, thresholds, eps, beta, horizon):
    # q: (N,) source backlog of N mutually interfering single-hop edges
    nq = q.shape[0]
    max_queue = np.empty(horizon)
    pot = np.empty(horizon)
    backlog = np.empty(horizon)
    objective = np.empty(horizon)
    delivered = np.empty(horizon)
    milestone = np.full(nq, -1, np.int64)
    steps = horizon
    halted = False
    half = (1.0 - eps) / 2.0
    for t in range(horizon):
        ip = -1
        for i in range(nq):
            if q[i] < thresholds[i]:
                ip = i
                break
        if ip < 0:
            steps = t
            halted = True
            break
        if ip == 0:
            e_lo = 0
            cap_lo = 1.0
            e_hi = -1
            cap_hi = 0.0
            inj = 1.0 - eps
        else:
            e_lo = ip - 1
            cap_lo = 1.0 - eps
            e_hi = ip
            cap_hi = half
            inj = (1.0 - eps) * half
        # one edge transmits at a time: weight = min(cap, q/2) * q**beta
        best_e = -1
        best_w = 0.0
        for which in range(2):
            e = e_lo if which == 0 else e_hi
            cap = cap_lo if which == 0 else cap_hi
            if e < 0 or cap <= 0.0:
                continue
            dq = q[e]
            if dq <= 0.0:
                continue
            diff = dq if beta == 1.0 else dq ** beta
            s = cap if cap < 0.5 * dq else 0.5 * dq
            w = s * diff
            if w > best_w:
                best_w = w
                best_e = e
        dl = 0.0
        if best_e >= 0:
            dq = q[best_e]
            cap = cap_lo if best_e == e_lo else cap_hi
            s = cap if cap < 0.5 * dq else 0.5 * dq
            q[best_e] -= s
            dl = s
        q[ip] += inj
        mx = 0.0
        po = 0.0
        bk = 0.0
        for i in range(nq):
            x = q[i]
            if milestone[i] < 0 and x >= thresholds[i]:
                milestone[i] = t
            if x > mx:
                mx = x
            bk += x
            po += x * x if beta == 1.0 else x ** (beta + 1.0)
        max_queue[t] = mx
        pot[t] = po
        backlog[t] = bk
        objective[t] = best_w
        delivered[t] = dl
    return max_queue, pot, backlog, objective, delivered, milestone, steps, halted


if USE_NUMBA:
    _phase_loop_jit = njit(cache=True, nogil=True)(_phase_loop)
    _exponential_loop_jit = njit(cache=True, nogil=True)(_exponential_loop)


def run_phase_plan(plan: PhasePlan, backend: str = "auto"):
    """Execute a PhasePlan; returns (max_queue, potential, backlog, objective,
    delivered, final_q).  backend: auto | numba | numpy."""
    q = plan.q0.copy()
    args = (q, plan.dest_nodes, plan.tails, plan.heads, plan.pair_dir1,
            plan.pair_dir2, plan.seg_end, plan.seg_caps, plan.seg_mat,
            plan.mats, plan.mat_rows, plan.inj_node, plan.inj_col,
            plan.inj_amt, plan.beta, plan.horizon)
    if backend == "auto":
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend unavailable (not installed or disabled)")
        out = _phase_loop_jit(*args)
    elif backend == "numpy":
        out = _phase_numpy(*args)
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return (*out, q)


def run_exponential_kernel(n_edges: int, eps: float, beta: float, horizon: int,
                           q0: np.ndarray | None = None, backend: str = "auto"):
    """Scalar loop for the doubling-threshold adversary on n parallel
    mutually interfering edges.  Returns (stats..., milestone_slots, steps,
    halted, final_q); stats arrays are truncated to the executed steps."""
    q = np.zeros(n_edges) if q0 is None else q0.astype(np.float64).copy()
    thresholds = (1.0 - eps) * np.power(2.0, np.arange(n_edges, dtype=np.float64))
    if backend == "auto":
        backend = "numba" if USE_NUMBA else "numpy"
    if backend == "numba":
        if not USE_NUMBA:
            raise RuntimeError("numba backend unavailable (not installed or disabled)")
        fn = _exponential_loop_jit
    elif backend == "numpy":
        fn = _exponential_loop
    else:
        raise ValueError(f"unknown backend {backend!r}")
    mq, po, bk, ob, dl, milestone, steps, halted = fn(q, thresholds, eps, beta, horizon)
    return (mq[:steps], po[:steps], bk[:steps], ob[:steps], dl[:steps],
            milestone, steps, halted, q)
