"""Backend benchmark: numba kernels vs the numpy fallback.

Usage: python -m netsched.bench [--slots N] [--seed N]
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from . import kernels
from .adversaries import CyclicArrivalAdversary
from .experiments import cyclic_config, make_grid_setup


def _time(fn, repeat: int = 3) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description="compare numba and numpy kernel backends")
    ap.add_argument("--slots", type=int, default=20_000)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    setup = make_grid_setup(args.seed)
    c = [[0.12] * 3 for _ in range(3)]
    cfg = cyclic_config(setup, c)
    adv = CyclicArrivalAdversary(cfg, 0)
    q0 = np.zeros((setup.spec.node_count, len(setup.spec.destinations)))
    plan = adv.kernel_plan(setup.spec, args.slots, 1.0, q0)

    backends = ["numpy"]
    if kernels.USE_NUMBA:
        kernels.run_phase_plan(plan, backend="numba")  # warm the JIT cache
        backends.insert(0, "numba")
    else:
        print("numba disabled or unavailable; benchmarking numpy only")

    print(f"grid slot loop, {args.slots} slots:")
    results = {}
    for b in backends:
        dt = _time(lambda b=b: kernels.run_phase_plan(plan, backend=b))
        results[b] = dt
        print(f"  {b:>6}: {dt:8.3f} s   ({dt / args.slots * 1e6:7.2f} us/slot)")
    print(f"exponential slot loop, {args.slots} slots (6 edges):")
    for b in backends:
        if b == "numba":
            kernels.run_exponential_kernel(6, 0.1, 1.0, 10, backend=b)
        dt = _time(lambda b=b: kernels.run_exponential_kernel(6, 0.1, 1.0, args.slots, backend=b))
        print(f"  {b:>6}: {dt:8.3f} s   ({dt / args.slots * 1e6:7.2f} us/slot)")
    if len(results) == 2:
        print(f"speedup (grid): {results['numpy'] / results['numba']:.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
