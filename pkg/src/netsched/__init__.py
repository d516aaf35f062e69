"""Slotted-time max-weight scheduling simulator for adversarial networks."""

from .adversaries import (
    AdversaryParams,
    ConstantAdversary,
    CyclicArrivalAdversary,
    CyclicConfig,
    CyclicEdgeArrivalAdversary,
    ExponentialAdversary,
    IIDAdversary,
    ScriptedAdversary,
    WitnessSchedule,
    check_witness_compliance,
    phase_index,
)
from .auditor import (
    audit_trace,
    build_gamma,
    classify_bad_packet,
    per_packet_potential_delta,
    q_star,
    slack_constant,
    small_link_transfer_bound,
    water_fill_shares,
)
from .bounds import BoundConstants, BudgetExceededError, compute_bound_constants
from .engine import (
    SimulationTrace,
    StabilityVerdict,
    binary_search_c,
    drift_diagnostic,
    run,
    section2_threshold,
    stability_verdict,
)
from .model import (
    ExplicitRates,
    InjectionEvent,
    MatchingRates,
    NetworkSpec,
    QueueMatrix,
    ScheduleDecision,
    apply_decision,
    apply_injections,
    enumerate_rate_vectors,
    potential,
)
from .scheduler import ApproxParams, edge_weight, max_weight_approx, max_weight_exact

__version__ = "0.1.0"

__all__ = [
    "AdversaryParams", "ApproxParams", "BoundConstants", "BudgetExceededError",
    "ConstantAdversary", "CyclicArrivalAdversary", "CyclicConfig",
    "CyclicEdgeArrivalAdversary", "ExplicitRates", "ExponentialAdversary",
    "IIDAdversary", "InjectionEvent", "MatchingRates", "NetworkSpec",
    "QueueMatrix", "ScheduleDecision", "ScriptedAdversary", "SimulationTrace",
    "StabilityVerdict", "WitnessSchedule", "apply_decision", "apply_injections",
    "audit_trace", "binary_search_c", "build_gamma", "check_witness_compliance",
    "classify_bad_packet", "compute_bound_constants", "drift_diagnostic",
    "edge_weight", "enumerate_rate_vectors", "max_weight_approx",
    "max_weight_exact", "per_packet_potential_delta", "phase_index",
    "potential", "q_star", "run", "section2_threshold", "slack_constant",
    "small_link_transfer_bound", "stability_verdict", "water_fill_shares",
]
