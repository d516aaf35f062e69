"""Command-line front end.

Subcommands: simulate (one run, trace.csv + summary.json), probe (3x3 load
constants, c_table.csv/.json), audit (witness-backed audit, audit.json),
bounds (exact-rational constant ladder).  Exit codes: 0 success, 1 config
error, 2 runtime error, 3 verdict unstable (so probe scripts can branch).
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from fractions import Fraction
from pathlib import Path

from . import bounds as bounds_mod
from . import config as cfg_mod
from .adversaries import AdversaryParams, ExponentialAdversary, exponential_witness
from .auditor import audit_trace
from .engine import run, stability_verdict
from .experiments import (
    cyclic_config,
    make_grid_setup,
    probe_c_table,
    run_experiment1,
    run_experiment2,
)
from .scenarios import chain_scenario, parallel_scenario
from .scheduler import ApproxParams

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2
EXIT_UNSTABLE = 3


def _load_config(args) -> cfg_mod.ExperimentConfig:
    if args.config:
        cfg = cfg_mod.load(args.config)
    else:
        cfg = cfg_mod.preset(args.preset or "grid-probe", full=args.full)
    updates = {}
    if args.seed is not None:
        updates["seed"] = args.seed
    if args.horizon is not None:
        updates["horizon"] = args.horizon
    if updates:
        cfg = cfg_mod.from_dict({**cfg.to_dict(), **updates})
    return cfg


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _scheduler(cfg: cfg_mod.ExperimentConfig):
    if cfg.scheduler.eps_hat > 0:
        return ApproxParams(cfg.scheduler.eps_hat, "synthetic-degrade")
    return "exact"


def _resolve_c_table(cfg, setup, print_progress=True):
    if cfg.adversary.c_table is not None:
        return [list(row) for row in cfg.adversary.c_table], None
    if print_progress:
        print(f"probing load constants (window {cfg.probe.window}, tol {cfg.probe.tol})...")
    table = probe_c_table(setup, window=cfg.probe.window, tol=cfg.probe.tol,
                          seed=cfg.seed, c_hi=cfg.probe.c_hi, workers=cfg.probe.workers)
    return [[table[i][j].c for j in range(3)] for i in range(3)], table


def cmd_simulate(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    kind = cfg.adversary.kind
    g = cfg.grid
    if kind == "exponential":
        n = args.n or cfg.adversary.edges
        eps = args.eps if args.eps is not None else cfg.adversary.eps
        from .adversaries import parallel_network

        spec = parallel_network(n, eps, beta=cfg.scheduler.beta)
        trace = run(spec, ExponentialAdversary(n, eps), cfg.horizon,
                    scheduler=_scheduler(cfg), seed=cfg.seed, beta=cfg.scheduler.beta)
        summary_extra = {"edges": n, "eps": eps,
                         "target": (1 - eps) * 2 ** (n - 1),
                         "reached": float(trace.max_queue.max()),
                         "halted": trace.halted}
    else:
        setup = make_grid_setup(cfg.seed, g.n1, g.n2, g.k_pairs,
                                (g.rate_low, g.rate_high), (g.gamma_low, g.gamma_high),
                                g.removed_per_vector, g.removed)
        c_values, _ = _resolve_c_table(cfg, setup)
        ccfg = cyclic_config(setup, c_values)
        if kind == "cyclic-arrival":
            trace = run_experiment1(ccfg, cfg.adversary.rate_idx, cfg.horizon, seed=cfg.seed)
        elif kind == "cyclic-edge-arrival":
            trace = run_experiment2(ccfg, cfg.horizon, seed=cfg.seed)
        else:  # constant
            from .experiments import run_fixed

            i, j = cfg.adversary.rate_idx, cfg.adversary.gamma_idx
            if cfg.adversary.load is not None:
                c_values[i][j] = cfg.adversary.load
                ccfg = cyclic_config(setup, c_values)
            trace = run_fixed(ccfg, i, j, cfg.horizon, seed=cfg.seed)
        summary_extra = {"c_table": c_values}
    verdict = stability_verdict(trace)
    trace.write_csv(out / "trace.csv")
    summary = {
        "config": cfg.to_dict(),
        "slots": trace.slots,
        "verdict": verdict.verdict,
        "max_queue_overall": verdict.max_queue_overall,
        "tail_slope": verdict.tail_slope,
        "final_backlog": float(trace.backlog[-1]) if trace.slots else 0.0,
        **summary_extra,
    }
    (out / "summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"verdict: {verdict.verdict}  max queue: {verdict.max_queue_overall:.4g}  "
          f"trace: {out / 'trace.csv'}")
    return EXIT_UNSTABLE if verdict.verdict == "unstable" else EXIT_OK


def cmd_probe(args) -> int:
    cfg = _load_config(args)
    out = _out_dir(args)
    g = cfg.grid
    if g.gamma_low == 0 and g.gamma_high == 0:
        print("probe: arrival vectors are identically zero", file=sys.stderr)
        return EXIT_RUNTIME
    setup = make_grid_setup(cfg.seed, g.n1, g.n2, g.k_pairs,
                            (g.rate_low, g.rate_high), (g.gamma_low, g.gamma_high),
                            g.removed_per_vector, g.removed)
    window = args.window or cfg.probe.window
    tol = args.tol or cfg.probe.tol
    table = probe_c_table(setup, window=window, tol=tol, seed=cfg.seed,
                          c_hi=cfg.probe.c_hi, workers=cfg.probe.workers)
    with open(out / "c_table.csv", "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["rate_idx", "gamma_idx", "c", "paired_c", "paired_verdict", "monotone"])
        for i in range(3):
            for j in range(3):
                r = table[i][j]
                w.writerow([i, j, r.c, r.paired_c, r.paired_verdict, r.monotone])
    payload = {
        "config": cfg.to_dict(),
        "window": window,
        "tol": tol,
        "c": [[table[i][j].c for j in range(3)] for i in range(3)],
        "results": [[table[i][j].to_dict() for j in range(3)] for i in range(3)],
    }
    (out / "c_table.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    for i in range(3):
        print("  ".join(f"c[{i}][{j}] = {table[i][j].c:.3f}" for j in range(3)))
    return EXIT_OK


def cmd_audit(args) -> int:
    out = _out_dir(args)
    if args.scenario == "exponential":
        n = args.n or 4
        eps = args.eps if args.eps is not None else 0.2
        from .adversaries import parallel_network

        spec = parallel_network(n, eps)
        adv = ExponentialAdversary(n, eps)
        trace = run(spec, adv, args.slots, seed=args.seed, audit=True, use_kernel=False)
        witness = exponential_witness(trace.records)
        ap = AdversaryParams(1, eps)
        q0 = None
    else:
        builder = parallel_scenario if args.scenario == "parallel" else chain_scenario
        sc = builder(args.seed)
        spec, ap = sc.spec, sc.ap
        trace = run(spec, sc.adversary, sc.horizon, seed=args.seed, audit=True,
                    q0=sc.q0, use_kernel=False)
        witness = sc.witness
    report = audit_trace(spec, trace, witness, ap)
    (out / "audit.json").write_text(json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n")
    print(f"packets: {len(report.packets)}  bad: {report.n_bad}  "
          f"compliant: {report.compliance.ok}  dominated: {report.all_dominated}  "
          f"report: {out / 'audit.json'}")
    if not report.compliance.ok:
        print(f"witness violation: {report.compliance.first_violation}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_bounds(args) -> int:
    from .model import NetworkSpec

    n = args.n
    # n queues realized as a chain with a single destination at the end
    spec = NetworkSpec(n, tuple((i, i + 1) for i in range(n - 1)), (n - 1,),
                       r_min=args.rmin, r_max=args.rmax)
    ap = AdversaryParams(args.omega, args.eps)
    try:
        bc = bounds_mod.compute_bound_constants(spec, ap, Fraction(args.q0),
                                                bad_budget=args.bad,
                                                injection_cap=args.inj_cap,
                                                budget=args.budget)
    except bounds_mod.BudgetExceededError as exc:
        print(f"budget exceeded after {exc.evaluations} evaluations: {exc}")
        return EXIT_OK
    print(f"n = {bc.n_queues}  C = {bc.slack}  q* = {bc.q_star}  P0 = {bc.p0}")
    for k, m in enumerate(bc.m_ladder, start=1):
        print(f"M_{k} = {m}  (~{float(m):.6g})")
    for lvl in bc.levels:
        print(f"level k={lvl.k}: S = {[str(s) for s in lvl.s_values]} "
              f"L = {[str(x) for x in lvl.l_values]}")
    print(f"potential bound = {bc.potential_bound}  (~{float(bc.potential_bound):.6g})")
    print(f"max queue bound U(n, q0, {args.bad}) = {bc.max_queue_bound}  "
          f"(~{float(bc.max_queue_bound):.6g})")
    if args.out:
        out = _out_dir(args)
        payload = {
            "n": bc.n_queues, "q0": str(bc.q0), "bad_budget": bc.bad_budget,
            "C": str(bc.slack), "q_star": str(bc.q_star), "p0": str(bc.p0),
            "m_ladder": [str(m) for m in bc.m_ladder],
            "potential_bound": str(bc.potential_bound),
            "max_queue_bound": str(bc.max_queue_bound),
            "evaluations": bc.evaluations,
        }
        (out / "bounds.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def make_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="netsched",
                                description="max-weight scheduling simulator and audit toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="experiment config (JSON)")
        sp.add_argument("--preset", help="named preset (exp1, exp2, exp-exponential, grid-probe)")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--horizon", type=int, default=None)
        sp.add_argument("--full", action="store_true", help="paper-scale horizons (1e6)")
        sp.add_argument("--out", default="results")

    ps = sub.add_parser("simulate", help="run one experiment, write trace + summary")
    common(ps)
    ps.add_argument("--n", type=int, help="exponential preset: edge count")
    ps.add_argument("--eps", type=float, help="exponential preset: slack")
    ps.set_defaults(fn=cmd_simulate)

    pp = sub.add_parser("probe", help="binary-search the 3x3 load constants")
    common(pp)
    pp.add_argument("--window", type=int, default=None)
    pp.add_argument("--tol", type=float, default=None)
    pp.set_defaults(fn=cmd_probe)

    pa = sub.add_parser("audit", help="witness-backed audit of a recorded run")
    pa.add_argument("--scenario", choices=["exponential", "parallel", "chain"],
                    default="exponential")
    pa.add_argument("--n", type=int, default=None)
    pa.add_argument("--eps", type=float, default=None)
    pa.add_argument("--slots", type=int, default=200)
    pa.add_argument("--seed", type=int, default=0)
    pa.add_argument("--out", default="results")
    pa.set_defaults(fn=cmd_audit)

    pb = sub.add_parser("bounds", help="exact-rational constant ladder and backlog bound")
    pb.add_argument("--n", type=int, required=True, help="queue count")
    pb.add_argument("--q0", default="1")
    pb.add_argument("--eps", type=float, default=0.5)
    pb.add_argument("--rmin", type=float, default=1.0)
    pb.add_argument("--rmax", type=float, default=1.0)
    pb.add_argument("--omega", type=int, default=1)
    pb.add_argument("--inj-cap", type=int, default=1)
    pb.add_argument("--bad", type=int, default=0)
    pb.add_argument("--budget", type=int, default=10_000)
    pb.add_argument("--out", default=None)
    pb.set_defaults(fn=cmd_bounds)
    return p


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        return args.fn(args)
    except cfg_mod.ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
