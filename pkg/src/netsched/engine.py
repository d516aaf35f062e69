"""Simulation driver: the serve-then-inject slot loop, trace recording,
stability verdicts, the load binary search, and the drift diagnostic."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .model import (
    InjectionEvent,
    NetworkSpec,
    QueueMatrix,
    RateSet,
    ScheduleDecision,
    apply_decision,
    apply_injections,
    potential,
)
from .scheduler import ApproxParams, max_weight_approx, max_weight_exact

SNAPSHOT_RING = 64  # replay snapshots kept per trace


@dataclass
class SlotRecord:
    """Audit-mode log of one slot: state seen by the scheduler, the decision,
    the post-service state, and the injections."""

    slot: int
    q_before: QueueMatrix
    rate_set: RateSet
    decision: ScheduleDecision
    q_mid: QueueMatrix
    injections: tuple[InjectionEvent, ...]


@dataclass
class SimulationTrace:
    max_queue: np.ndarray
    potential: np.ndarray
    backlog: np.ndarray
    objective: np.ndarray
    delivered: np.ndarray
    beta: float
    halted: bool = False
    halt_reason: str | None = None
    records: list[SlotRecord] | None = None
    snapshots: list[tuple[int, np.ndarray]] = field(default_factory=list)
    final_q: QueueMatrix | None = None

    @property
    def slots(self) -> int:
        return len(self.max_queue)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(["slot", "max_queue", "potential", "backlog", "objective", "delivered"])
            for t in range(self.slots):
                w.writerow([t, self.max_queue[t], self.potential[t], self.backlog[t],
                            self.objective[t], self.delivered[t]])


def run(spec: NetworkSpec, adversary, horizon: int, *, scheduler="exact",
        beta: float | None = None, seed: int = 0, audit: bool = False,
        q0: QueueMatrix | None = None, snapshot_every: int = 1000,
        use_kernel: bool | None = None) -> SimulationTrace:
    """Drive `horizon` slots of adversary -> scheduler -> state update.

    Per slot: the adversary (which may read the current queues) announces the
    feasible rate set and the injections; the scheduler picks transfers; the
    transfers are applied, then the injections, and mass reaching its
    destination leaves.  Deterministic given `seed`.  With audit=True every
    slot is fully recorded (memory scales with horizon).  Compiled kernels
    are used when the adversary provides an execution plan and no audit or
    approximate scheduling is requested; pass use_kernel=False to force the
    generic loop.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    beta = spec.beta if beta is None else beta
    ap = scheduler if isinstance(scheduler, ApproxParams) else None
    if isinstance(scheduler, str) and scheduler != "exact":
        raise ValueError(f"unknown scheduler {scheduler!r}")
    exact = ap is None or ap.mode == "exact"
    rng = np.random.default_rng(seed)
    adversary.reset(rng)
    q = QueueMatrix.zeros(spec) if q0 is None else q0.copy()

    plan_fn = getattr(adversary, "kernel_plan", None)
    if (use_kernel is not False and plan_fn is not None and exact and not audit):
        plan = plan_fn(spec, horizon, beta, q.array.copy())
        mq, po, bk, ob, dl, q_final = kernels.run_phase_plan(plan)
        return SimulationTrace(mq, po, bk, ob, dl, beta=beta,
                               final_q=QueueMatrix(spec.node_count, spec.destinations, q_final))

    mq = np.empty(horizon)
    po = np.empty(horizon)
    bk = np.empty(horizon)
    ob = np.empty(horizon)
    dl = np.empty(horizon)
    records: list[SlotRecord] | None = [] if audit else None
    snapshots: deque = deque(maxlen=SNAPSHOT_RING)
    halted = False
    reason = None
    t = 0
    for t in range(horizon):
        step = adversary.step(t, q)
        if step is None:
            halted = True
            reason = "adversary halted"
            break
        rs, events = step
        if exact:
            dec = max_weight_exact(q, rs, beta)
        else:
            dec = max_weight_approx(q, rs, beta, ap, rng)
        q_mid = apply_decision(q, dec)
        q_next = apply_injections(q_mid, events)
        delivered = 0.0
        for i in dec.active_edges():
            if dec.edges[i][1] == dec.dest[i]:
                delivered += dec.amounts[i]
        for ev in events:
            if ev.node == ev.dest:
                delivered += ev.size
        mq[t] = q_next.max_queue()
        po[t] = potential(q_next, beta)
        bk[t] = q_next.total()
        ob[t] = dec.objective
        dl[t] = delivered
        if records is not None:
            records.append(SlotRecord(t, q, rs, dec, q_mid, tuple(events)))
        if snapshot_every and (t + 1) % snapshot_every == 0:
            snapshots.append((t, q_next.array.copy()))
        q = q_next
    n = t if halted else horizon
    return SimulationTrace(mq[:n], po[:n], bk[:n], ob[:n], dl[:n], beta=beta,
                           halted=halted, halt_reason=reason, records=records,
                           snapshots=list(snapshots), final_q=q)


# ---------------------------------------------------------------------------
# Stability verdicts
# ---------------------------------------------------------------------------

@dataclass
class StabilityVerdict:
    verdict: str  # stable | unstable | inconclusive
    max_queue_overall: float
    tail_slope: float
    first_half_max: float
    second_half_max: float

    @property
    def stable(self) -> bool:
        return self.verdict == "stable"


def stability_verdict(trace: SimulationTrace, slope_threshold: float = 1e-4,
                      plateau_factor: float = 1.5) -> StabilityVerdict:
    """Finite-run stability decision.

    unstable: least-squares slope of the max queue over the last half exceeds
    slope_threshold (units per slot); growth is decisive.  stable: no growth
    and the last-half maximum stays within plateau_factor of the first-half
    maximum.  A non-growing trace that fails the plateau test (a one-off jump
    between halves) is inconclusive.
    """
    mq = trace.max_queue
    n = len(mq)
    if n < 4:
        return StabilityVerdict("inconclusive", float(mq.max(initial=0.0)), 0.0, 0.0, 0.0)
    half = n // 2
    first, second = mq[:half], mq[half:]
    slope = float(np.polyfit(np.arange(len(second), dtype=np.float64), second, 1)[0])
    plateau = float(second.max()) <= plateau_factor * float(first.max()) + 1e-12
    growing = slope > slope_threshold
    if growing:
        verdict = "unstable"
    elif plateau:
        verdict = "stable"
    else:
        verdict = "inconclusive"
    return StabilityVerdict(verdict, float(mq.max()), slope,
                            float(first.max()), float(second.max()))


# ---------------------------------------------------------------------------
# Load binary search
# ---------------------------------------------------------------------------

@dataclass
class ProbeResult:
    c: float
    paired_c: float
    paired_verdict: str
    probes: list[tuple[float, str]]
    monotone: bool

    def to_dict(self):
        return {"c": self.c, "paired_c": self.paired_c,
                "paired_verdict": self.paired_verdict, "monotone": self.monotone,
                "probes": self.probes}


def binary_search_c(spec: NetworkSpec, gamma, pairs, caps, *, window: int = 100_000,
                    tol: float = 1e-3, seed: int = 0, c_lo: float = 0.0,
                    c_hi: float = 1.0, max_widen: int = 6,
                    slope_threshold: float = 1e-4, plateau_factor: float = 1.5,
                    beta: float | None = None) -> ProbeResult:
    """Largest load factor c (to resolution tol) with verdict stable at c and
    not stable at c + tol, for constant per-slot arrivals c * gamma on the
    source-destination pairs under fixed caps.

    Widens the bracket when the initial one does not straddle the boundary;
    verdict monotonicity over all probed points is checked and reported.
    """
    from .adversaries import ConstantAdversary  # local import to avoid a cycle

    gamma = list(gamma)
    if not any(g > 0 for g in gamma):
        raise ValueError("gamma must be non-zero")
    probes: list[tuple[float, str]] = []

    def verdict_at(c: float) -> str:
        adv = ConstantAdversary(spec, caps,
                                tuple((s, d, c * g) for (s, d), g in zip(pairs, gamma)))
        tr = run(spec, adv, window, seed=seed, beta=beta)
        v = stability_verdict(tr, slope_threshold, plateau_factor).verdict
        probes.append((c, v))
        return v

    if c_lo > 0 and verdict_at(c_lo) != "stable":
        for _ in range(max_widen):
            c_lo /= 2.0
            if verdict_at(c_lo) == "stable":
                break
        else:
            raise ValueError(f"no stable verdict down to c = {c_lo}")
    hi_ok = False
    for _ in range(max_widen + 1):
        if verdict_at(c_hi) != "stable":
            hi_ok = True
            break
        c_hi *= 2.0
    if not hi_ok:
        raise ValueError(f"still stable at upper bracket c = {c_hi}")

    lo, hi = c_lo, c_hi
    while hi - lo > tol:
        mid = (lo + hi) / 2.0
        if verdict_at(mid) == "stable":
            lo = mid
        else:
            hi = mid
    paired = verdict_at(lo + tol)
    order = sorted(probes)
    last_stable = max((c for c, v in order if v == "stable"), default=None)
    first_unstable = min((c for c, v in order if v != "stable"), default=None)
    monotone = (last_stable is None or first_unstable is None
                or last_stable < first_unstable
                or abs(last_stable - first_unstable) <= tol)
    return ProbeResult(lo, lo + tol, paired, probes, monotone)


# ---------------------------------------------------------------------------
# Drift diagnostic
# ---------------------------------------------------------------------------

@dataclass
class DriftDiagnostic:
    mean_drift: float
    samples: int
    flagged: bool  # true when no slot cleared the threshold


def section2_threshold(c_const: float, eps: float) -> float:
    """Backlog height C / (2 eps) above which the one-slot potential drift of
    a subcritical i.i.d. system is expected to be negative."""
    return c_const / (2.0 * eps)


def drift_diagnostic(trace: SimulationTrace, threshold_q: float) -> DriftDiagnostic:
    """Mean one-slot potential change over slots whose max queue is at least
    threshold_q."""
    dp = np.diff(trace.potential)
    mask = trace.max_queue[:-1] >= threshold_q
    count = int(mask.sum())
    if count == 0:
        return DriftDiagnostic(float("nan"), 0, True)
    return DriftDiagnostic(float(dp[mask].mean()), count, False)
