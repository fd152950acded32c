"""Compare the compiled and pure-numpy kernel backends.

Two views:

* microbenchmark - per-call latency of the single-vector forward/pullback
  kernels (the solver hot path: one trial point per call, small layers),
  importing both backend modules side by side in this process.
* end to end     - one hybrid run on the anchor-recovery problem per
  backend, each in a subprocess so the import-time backend choice applies
  (``ATTACKSEARCH_PURE=1`` forces the fallback).

Usage: python benchmarks/backend_benchmark.py [--e2e-only]
"""

from __future__ import annotations

import argparse
import os
import subprocess
import sys
import time

import numpy as np


def _time_per_call(fn, repeats: int = 5, calls: int = 2000) -> float:
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        for _ in range(calls):
            fn()
        best = min(best, (time.perf_counter() - t0) / calls)
    return best


def microbench() -> None:
    from attacksearch._kernels import pure

    backends = [("pure", pure)]
    try:
        from attacksearch._kernels import _mlpcore

        backends.append(("compiled", _mlpcore))
    except ImportError:
        print("compiled backend not built; showing pure only")

    rng = np.random.default_rng(0)
    dims = [8, 32, 32, 8]
    weights = [np.ascontiguousarray(rng.normal(0, 0.5, (dims[i + 1], dims[i])))
               for i in range(len(dims) - 1)]
    biases = [rng.normal(0, 0.1, dims[i + 1]) for i in range(len(dims) - 1)]
    acts = [pure.ACT_RELU, pure.ACT_RELU, pure.ACT_ID]
    x = rng.normal(0, 1, dims[0])
    u = rng.normal(0, 1, dims[-1])
    X = rng.normal(0, 1, (512, dims[0]))

    print(f"{'kernel':28s}" + "".join(f"{name:>14s}" for name, _ in backends))
    rows = [
        ("forward (single vector)",
         lambda mod: lambda: mod.mlp_forward(weights, biases, acts, x)),
        ("pullback (single vector)",
         lambda mod: lambda: mod.mlp_vjp(weights, biases, acts, x, u)),
        ("forward (batch of 512)",
         lambda mod: lambda: mod.mlp_forward_many(weights, biases, acts, X)),
    ]
    for label, make in rows:
        cells = []
        for _, mod in backends:
            per = _time_per_call(make(mod))
            cells.append(f"{per * 1e6:11.2f} us")
        print(f"{label:28s}" + "".join(f"{c:>14s}" for c in cells))


def e2e_current_backend() -> None:
    from attacksearch import BACKEND, DsmConfig, HybridConfig, hybrid_run
    from attacksearch.problems import build_target_recovery

    problem = build_target_recovery(0)
    t0 = time.perf_counter()
    rec, trace = hybrid_run(problem, HybridConfig(dsm=DsmConfig(rng_seed=0)),
                            budget=2000)
    dt = time.perf_counter() - t0
    print(f"hybrid on anchor recovery [{BACKEND:8s}]: {dt:6.2f}s "
          f"({trace.eval_count} evals, final f {rec.fval:.6f})")


def e2e_both() -> None:
    here = os.path.abspath(__file__)
    for env_extra in ({}, {"ATTACKSEARCH_PURE": "1"}):
        env = dict(os.environ, **env_extra)
        subprocess.run([sys.executable, here, "--e2e-only"], env=env, check=True)


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--e2e-only", action="store_true",
                        help="run the end-to-end timing with the backend "
                             "selected by the current environment")
    args = parser.parse_args()
    if args.e2e_only:
        e2e_current_backend()
        return
    microbench()
    print()
    e2e_both()


if __name__ == "__main__":
    main()
