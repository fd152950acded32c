"""Command line entry point.

Subcommands:

* ``run``           - one solver on one catalog problem; writes the
                      convergence curve (CSV) and the full trace (JSON).
* ``experiment``    - one of the three benchmark designs.
* ``selftest``      - fast install sanity checks (exit code 2 on failure).
* ``list-problems`` - catalog names and one-line summaries.

Exit codes: 0 success, 1 usage/argument error, 2 selftest failure. All
artifacts are deterministic; wall-clock timing goes to stderr only.
"""

from __future__ import annotations

import argparse
import os
import sys
import time
from typing import Optional, Sequence

from .core import EXACT, RELAXED
from .experiments import (EXPERIMENT1_COLUMNS, METHOD_NAMES, execute_run,
                          format_cell, run_experiment_1, run_experiment_2,
                          run_experiment_3, write_csv)
from .problems import CATALOG


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad arguments; the contract here is 1
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(1)


def parse_seeds(text: str) -> list:
    """Comma-separated seed list; ``a-b`` parts expand to inclusive ranges."""
    seeds = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part and not part.startswith("-"):
            lo, hi = part.split("-", 1)
            seeds.extend(range(int(lo), int(hi) + 1))
        else:
            seeds.append(int(part))
    if not seeds:
        raise ValueError("empty seed list")
    return seeds


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="attacksearch",
                     description="network-attack guided constrained search")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one solver on one problem")
    run_p.add_argument("--problem", required=True, choices=sorted(CATALOG))
    run_p.add_argument("--method", required=True, choices=METHOD_NAMES)
    run_p.add_argument("--seed", type=int, default=0)
    run_p.add_argument("--budget", type=int, default=5000)
    run_p.add_argument("--mode", choices=(EXACT, RELAXED), default=None,
                       help="override the problem's native mode")
    run_p.add_argument("--out", default="runs", help="output directory")

    exp_p = sub.add_parser("experiment", help="run a benchmark design")
    exp_p.add_argument("design", type=int, choices=(1, 2, 3))
    exp_p.add_argument("--problem", required=True, choices=sorted(CATALOG))
    exp_p.add_argument("--seeds", default="0,1,2",
                       help="comma list, ranges allowed (e.g. 0-9)")
    exp_p.add_argument("--budget", type=int, default=None,
                       help="per-run budget (design-specific default)")
    exp_p.add_argument("--mode", choices=(EXACT, RELAXED), default=None)
    exp_p.add_argument("--out", default="runs")

    sub.add_parser("selftest", help="fast install sanity checks")
    sub.add_parser("list-problems", help="list catalog problems")
    return parser


def _cmd_run(args) -> int:
    t0 = time.perf_counter()
    entry, rec, trace, history = execute_run(args.problem, args.method,
                                             args.seed, args.budget, args.mode)
    mode = args.mode if args.mode is not None else trace.mode
    os.makedirs(args.out, exist_ok=True)
    stem = f"{args.problem}_{args.method}_s{args.seed}_{mode}"
    curve_path = os.path.join(args.out, stem + "_curve.csv")
    rows = [(args.problem, args.method, args.seed, i, float(v))
            for i, v in enumerate(history.best_feasible_curve(), start=1)]
    write_csv(curve_path, EXPERIMENT1_COLUMNS, rows)
    trace_path = os.path.join(args.out, stem + "_trace.json")
    with open(trace_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(trace.to_json())
        fh.write("\n")
    print(f"elapsed {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    print(f"{stem}: final_f={format_cell(trace.final_f)} "
          f"evals={trace.eval_count} stop={trace.stop_reason}")
    print(f"wrote {curve_path}")
    print(f"wrote {trace_path}")
    return 0


def _cmd_experiment(args) -> int:
    try:
        seeds = parse_seeds(args.seeds)
    except ValueError as exc:
        print(f"attacksearch experiment: error: {exc}", file=sys.stderr)
        return 1
    t0 = time.perf_counter()
    if args.design == 1:
        budget = args.budget if args.budget is not None else 5000
        run_experiment_1(args.problem, seeds, args.out, budget=budget,
                         mode=args.mode)
    elif args.design == 2:
        budget = args.budget if args.budget is not None else 3000
        run_experiment_2(args.problem, seeds, args.out, budget=budget,
                         mode=args.mode)
    else:
        budget = args.budget if args.budget is not None else 2000
        run_experiment_3(args.problem, seeds, args.out, budget=budget,
                         mode=args.mode)
    print(f"elapsed {time.perf_counter() - t0:.3f}s", file=sys.stderr)
    print(f"experiment {args.design} on {args.problem}: wrote artifacts to "
          f"{args.out}")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse raises SystemExit(0) for --help
        return exc.code if isinstance(exc.code, int) else 1
    if args.command == "run":
        return _cmd_run(args)
    if args.command == "experiment":
        return _cmd_experiment(args)
    if args.command == "selftest":
        from .selftest import run_selftest

        return 0 if run_selftest() else 2
    if args.command == "list-problems":
        for name, entry in CATALOG.items():
            print(f"{name:16s} {entry.summary}")
        return 0
    parser.error(f"unknown command {args.command!r}")
    return 1


if __name__ == "__main__":
    sys.exit(main())
