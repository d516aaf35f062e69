"""Exact-rational backlog bounds for the quadratic potential (beta = 1).

The bound on the tallest queue of an n-queue system is built from a ladder
of thresholds M_1 > M_2 > ... > M_n = 0 computed bottom-up: level k treats
the n-k smallest queues as an independent subsystem whose size is bounded
by recursion, with an allowance of "bad" injections whose count is capped
by how much mass can cross small inter-queue gaps.  All arithmetic is in
fractions.Fraction; square roots are replaced by rational upper bounds so
every reported value is an exact rational that still upper-bounds the true
quantity.  Values blow up doubly exponentially in n, hence the work budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

from .adversaries import AdversaryParams
from .model import NetworkSpec

SQRT_SCALE = 10 ** 6  # rational square-root upper bounds at 1e-6 resolution


class BudgetExceededError(RuntimeError):
    def __init__(self, message: str, evaluations: int):
        super().__init__(message)
        self.evaluations = evaluations


def _frac(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, float):
        # decimal reading of the float's shortest repr keeps inputs friendly
        return Fraction(str(x))
    return Fraction(x)


def sqrt_upper(x: Fraction, scale: int = SQRT_SCALE) -> Fraction:
    """Smallest multiple of 1/scale whose square is >= x."""
    if x < 0:
        raise ValueError("negative radicand")
    num = x.numerator * scale * scale
    den = x.denominator
    m = math.isqrt(num // den)
    while m * m * den < num:
        m += 1
    return Fraction(m, scale)


@dataclass(frozen=True)
class BoundLevel:
    """Constants of ladder level k: subsystem size caps S_j, gap thresholds
    L_j (j = 1..k), and the resulting queue threshold M_k."""

    k: int
    s_values: tuple[Fraction, ...]
    l_values: tuple[Fraction, ...]
    m_value: Fraction


@dataclass
class BoundConstants:
    n_queues: int
    q0: Fraction
    bad_budget: int
    eps: Fraction
    r_min: Fraction
    r_max: Fraction
    omega: int
    injection_cap: int
    slack: Fraction            # audit slack constant C
    q_star: Fraction
    p0: Fraction               # worst per-window potential increase
    m_ladder: tuple[Fraction, ...]
    levels: tuple[BoundLevel, ...]
    potential_bound: Fraction
    max_queue_bound: Fraction  # U(n_queues, q0, bad_budget)
    u_table: dict[tuple[int, Fraction, int], Fraction] = field(default_factory=dict)
    evaluations: int = 0


class _Calculator:
    def __init__(self, eps: Fraction, r_min: Fraction, r_max: Fraction,
                 p0: Fraction, budget: int):
        self.eps = eps
        self.r_min = r_min
        self.r_max = r_max
        self.p0 = p0
        self.budget = budget
        self.evals = 0
        self._u0: dict[tuple[int, Fraction], Fraction] = {}
        self._ladders: dict[int, tuple[tuple[Fraction, ...], tuple[BoundLevel, ...]]] = {}
        self.u_table: dict[tuple[int, Fraction, int], Fraction] = {}

    def _spend(self, amount: int = 1) -> None:
        self.evals += amount
        if self.evals > self.budget:
            raise BudgetExceededError(
                f"bound recursion exceeded the work budget of {self.budget} "
                f"evaluations (expected for larger queue counts)", self.evals)

    def ladder(self, n: int):
        """M_k for k = n..1, with each level's S/L sequences."""
        if n in self._ladders:
            return self._ladders[n]
        m = {n: Fraction(0)}
        levels: list[BoundLevel] = []
        for k in range(n - 1, 0, -1):
            s_vals: list[Fraction] = []
            l_vals: list[Fraction] = []
            for j in range(1, k + 1):
                bad = math.ceil(Fraction(j - 1, 2) * sum(l_vals) ** 2)
                s_j = self.u(n - k, m[k + 1], bad)
                l_j = 2 * (n - k) * s_j ** 2 / self.eps
                s_vals.append(s_j)
                l_vals.append(l_j)
            m[k] = l_vals[-1] / self.r_min + s_vals[-1] + 2 * self.p0 / (self.eps * self.r_min)
            levels.append(BoundLevel(k, tuple(s_vals), tuple(l_vals), m[k]))
        ladder = tuple(m[k] for k in range(1, n + 1))
        out = (ladder, tuple(reversed(levels)))
        self._ladders[n] = out
        return out

    def potential_bound(self, n: int, q0: Fraction) -> Fraction:
        if n == 1:
            return q0 ** 2
        m1 = self.ladder(n)[0][0]
        spike = n * m1 ** 2 + 2 * sqrt_upper(Fraction(n)) * self.r_max * m1 + self.r_max ** 2
        return (n - 1) * m1 ** 2 + max(n * q0 ** 2, spike)

    def u0(self, n: int, q0: Fraction) -> Fraction:
        key = (n, q0)
        if key in self._u0:
            return self._u0[key]
        self._spend()
        val = q0 if n == 1 else sqrt_upper(self.potential_bound(n, q0))
        self._u0[key] = val
        self.u_table[(n, q0, 0)] = val
        return val

    def u(self, n: int, q0: Fraction, bad: int) -> Fraction:
        """Tallest-queue bound with a budget of `bad` extra injections:
        each one restarts the zero-budget bound from the previous bound
        plus one worst-case transfer."""
        if n == 1:
            self.u_table[(n, q0, bad)] = q0
            return q0
        if bad > self.budget:
            raise BudgetExceededError(
                f"bad-injection budget {bad} exceeds the work budget {self.budget}",
                self.evals)
        cur = self.u0(n, q0)
        for _ in range(bad):
            cur = self.u0(n, cur + self.r_max)
        self.u_table[(n, q0, bad)] = cur
        return cur


def compute_bound_constants(spec: NetworkSpec, ap: AdversaryParams, q0,
                            bad_budget: int = 0, injection_cap: int = 1,
                            ell=None, budget: int = 10_000) -> BoundConstants:
    """Full constant ladder and backlog bound for the system of
    node_count * |destinations| queues described by `spec`.

    Only beta = 1 is supported.  `injection_cap` bounds the number of
    injections per window (sets the worst-case window potential increase);
    `ell` is the reference packet size for q_star (defaults to r_min, the
    worst case).  Raises BudgetExceededError when the doubly exponential
    recursion outgrows `budget`.
    """
    if spec.beta != 1.0:
        raise ValueError("bound recursion is defined for beta = 1 only")
    n = spec.node_count * len(spec.destinations)
    eps = _frac(ap.eps)
    r_min = _frac(spec.r_min)
    r_max = _frac(spec.r_max)
    q0 = _frac(q0)
    ell = r_min if ell is None else _frac(ell)
    slack = (ap.omega * spec.edge_count) * r_max * 2 * spec.node_count * r_max * ap.omega
    qs = (4 - 2 * eps) / ((2 * eps + eps ** 2) * ell) * (slack + 1)
    p0 = injection_cap * (2 * r_max * qs + r_max ** 2)

    calc = _Calculator(eps, r_min, r_max, p0, budget)
    if n == 1:
        ladder, levels = (Fraction(0),), ()
    else:
        ladder, levels = calc.ladder(n)
    pot_bound = calc.potential_bound(n, q0)
    max_q = calc.u(n, q0, bad_budget)
    return BoundConstants(
        n_queues=n, q0=q0, bad_budget=bad_budget, eps=eps, r_min=r_min,
        r_max=r_max, omega=ap.omega, injection_cap=injection_cap,
        slack=slack, q_star=qs, p0=p0, m_ladder=ladder, levels=levels,
        potential_bound=pot_bound, max_queue_bound=max_q,
        u_table=dict(calc.u_table), evaluations=calc.evals)
