"""Benchmark drivers.

Three desk-scale experiment designs over the problem catalog:

1. convergence curves - every method on one problem over a seed set; emits
   the full best-so-far curve per run plus a summary with evaluations-to-
   tolerance and the soft hybrid-vs-search comparison.
2. step accounting    - per-iteration records of one method (hybrid by
   default): which step type won, how the budget split between attack and
   search phases, and how much objective gain each step type contributed.
3. solver study       - one-shot attacks (single-gradient sign step vs the
   projected multi-step solver) fired from snapshots along a hybrid
   trajectory over a radius sweep; records classification, loss movement,
   gradient cost and realized objective gain.

All artifacts are deterministic: floats are written with repr() so identical
invocations produce byte-identical files. Timing never enters an artifact.
"""

from __future__ import annotations

import json
import math
import os
from typing import Iterable, Optional, Sequence

import numpy as np

from .attack import AttackConfig, attack_operator
from .core import ProblemSpec, TrialHistory, best_feasible, evaluate
from .dsm import DsmConfig, cdsm_run
from .hybrid import HybridConfig, attack_only_run, hybrid_run, rls_run
from .problems import CATALOG, ProblemCatalogEntry, build_problem

METHOD_NAMES = ("atk", "rls", "cdsm", "hyb")

EXPERIMENT1_COLUMNS = ("problem", "method", "seed", "eval_count", "best_f")


# ------------------------------------------------------------- formatting

def format_cell(v) -> str:
    """repr() for floats (shortest round-trip form), plain text otherwise."""
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(format_cell(v) for v in row) + "\n")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj]
    return obj


def write_json(path: str, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(json.dumps(_jsonable(obj), indent=1, sort_keys=True))
        fh.write("\n")


def evals_to_threshold(curve: Sequence[float], threshold: float) -> Optional[int]:
    """1-based count of the first evaluation whose running best clears the
    threshold, or None if the run never does."""
    for i, v in enumerate(curve, start=1):
        if v >= threshold:
            return i
    return None


def _median(values: Sequence[float]) -> float:
    """Median with unreached runs (inf) participating; inf-safe."""
    vals = sorted(values)
    mid = len(vals) // 2
    if len(vals) % 2 == 1:
        return vals[mid]
    lo, hi = vals[mid - 1], vals[mid]
    if math.isinf(lo) or math.isinf(hi):
        return lo if lo == hi else math.inf
    return 0.5 * (lo + hi)


# ------------------------------------------------------------ run drivers

def run_solver(problem: ProblemSpec, method: str, seed: int, budget: int,
               attack_components: Optional[int] = None,
               history: Optional[TrialHistory] = None):
    """Run one method; returns (incumbent record, trace, history)."""
    if method not in METHOD_NAMES:
        raise ValueError(f"unknown method {method!r}; known: {', '.join(METHOD_NAMES)}")
    history = history if history is not None else TrialHistory()
    if method == "cdsm":
        rec, trace = cdsm_run(problem, DsmConfig(rng_seed=seed), budget=budget,
                              history=history)
        return rec, trace, history
    config = HybridConfig(attack=AttackConfig(component_count=attack_components),
                          dsm=DsmConfig(rng_seed=seed))
    runner = {"hyb": hybrid_run, "atk": attack_only_run, "rls": rls_run}[method]
    rec, trace = runner(problem, config, budget=budget, history=history)
    return rec, trace, history


def execute_run(problem_name: str, method: str, seed: int, budget: int = 5000,
                mode: Optional[str] = None):
    """Catalog lookup + solver run; returns (entry, incumbent, trace, history)."""
    entry = CATALOG.get(problem_name)
    if entry is None:
        raise KeyError(f"unknown problem {problem_name!r}; known: "
                       f"{', '.join(sorted(CATALOG))}")
    problem = build_problem(problem_name, seed, mode)
    rec, trace, history = run_solver(problem, method, seed, budget,
                                     attack_components=entry.attack_components)
    return entry, rec, trace, history


# ---------------------------------------------------------- experiment 1

EXPERIMENT1_SUMMARY_COLUMNS = ("problem", "method", "median_final_best_f",
                               "median_evals_to_tolerance", "seeds_reaching",
                               "seed_count")


def run_experiment_1(problems, seeds: Sequence[int], out_dir: str,
                     methods: Sequence[str] = METHOD_NAMES, budget: int = 5000,
                     mode: Optional[str] = None) -> dict:
    """Convergence curves for every (problem, method, seed) cell.

    Cells run independently; rows are merged sorted by (problem, method,
    seed, eval_count) so artifacts do not depend on execution order.
    """
    if isinstance(problems, str):
        problems = (problems,)
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    summary_rows = []
    summary: dict = {"experiment": 1, "problems": list(problems),
                     "budget": budget, "seeds": list(seeds), "per_problem": {}}
    for problem_name in problems:
        entry = CATALOG[problem_name]
        per_problem: dict = {"methods": {}}
        medians: dict = {}
        for method in methods:
            per_seed: dict = {"final_best": {}, "evals_to_tolerance": {}}
            reach = []
            finals = []
            for seed in seeds:
                problem = build_problem(problem_name, seed, mode)
                opt_value, tol, provenance = entry.optimum_for(seed)
                _, trace, history = run_solver(
                    problem, method, seed, budget,
                    attack_components=entry.attack_components)
                curve = history.best_feasible_curve()
                for i, v in enumerate(curve, start=1):
                    rows.append((problem_name, method, seed, i, float(v)))
                hit = evals_to_threshold(curve, opt_value - tol)
                per_seed["final_best"][seed] = float(trace.final_f)
                per_seed["evals_to_tolerance"][seed] = hit
                reach.append(math.inf if hit is None else float(hit))
                finals.append(float(trace.final_f))
            med = _median(reach)
            medians[method] = med
            med_or_none = None if math.isinf(med) else med
            per_seed["median_evals_to_tolerance"] = med_or_none
            per_seed["median_final_best"] = _median(finals)
            per_seed["optimum_provenance"] = entry.optimum_for(seeds[0])[2]
            per_problem["methods"][method] = per_seed
            summary_rows.append((problem_name, method, _median(finals),
                                 med_or_none,
                                 sum(1 for r in reach if math.isfinite(r)),
                                 len(seeds)))
        if "hyb" in medians and "cdsm" in medians:
            per_problem["soft_checks"] = {
                "hybrid_median_evals_le_search":
                    bool(medians["hyb"] <= medians["cdsm"])
            }
        summary["per_problem"][problem_name] = per_problem
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    tag = "-".join(problems)
    write_csv(os.path.join(out_dir, f"experiment1_{tag}_curves.csv"),
              EXPERIMENT1_COLUMNS, rows)
    write_csv(os.path.join(out_dir, f"experiment1_{tag}_summary.csv"),
              EXPERIMENT1_SUMMARY_COLUMNS, summary_rows)
    write_json(os.path.join(out_dir, f"experiment1_{tag}_summary.json"),
               summary)
    return summary


# ---------------------------------------------------------- experiment 2

EXPERIMENT2_COLUMNS = ("problem", "method", "seed", "iteration", "attack_outcome",
                       "winning_step", "r_atk", "r_dsm", "evals_attack",
                       "evals_dsm", "evals_so_far", "incumbent_f")


def run_experiment_2(problem_name: str, seeds: Sequence[int], out_dir: str,
                     methods: Sequence[str] = METHOD_NAMES, budget: int = 3000,
                     mode: Optional[str] = None) -> dict:
    """Per-iteration step accounting: who wins, what it costs, what it gains.

    The hybrid rows carry the attack outcome and both radii; baseline rows
    leave the fields their traces do not populate empty.
    """
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    per_method: dict = {}
    for method in methods:
        per_seed: dict = {}
        pooled_steps: dict = {}
        pooled_outcomes: dict = {}
        pooled_gain: dict = {}
        for seed in seeds:
            _, _, trace, _ = execute_run(problem_name, method, seed, budget, mode)
            step_counts: dict = {}
            outcome_counts: dict = {}
            gain_by_step: dict = {}
            prev_f = trace.f0
            for it in trace.iterations:
                rows.append((problem_name, method, seed, it.index,
                             it.attack_outcome, it.winning_step, it.r_atk,
                             it.r_dsm, it.evals_attack, it.evals_dsm,
                             it.evals_so_far, it.incumbent_f))
                step_counts[it.winning_step] = step_counts.get(it.winning_step, 0) + 1
                if it.attack_outcome is not None:
                    outcome_counts[it.attack_outcome] = (
                        outcome_counts.get(it.attack_outcome, 0) + 1)
                gain = it.incumbent_f - prev_f
                gain_by_step[it.winning_step] = (
                    gain_by_step.get(it.winning_step, 0.0) + gain)
                prev_f = it.incumbent_f
            per_seed[seed] = {
                "winning_step_counts": step_counts,
                "attack_outcome_counts": outcome_counts,
                "gain_by_step": gain_by_step,
                "final_f": float(trace.final_f),
                "eval_count": trace.eval_count,
                "stop_reason": trace.stop_reason,
            }
            for k, v in step_counts.items():
                pooled_steps[k] = pooled_steps.get(k, 0) + v
            for k, v in outcome_counts.items():
                pooled_outcomes[k] = pooled_outcomes.get(k, 0) + v
            for k, v in gain_by_step.items():
                pooled_gain[k] = pooled_gain.get(k, 0.0) + v
        per_method[method] = {
            "per_seed": per_seed,
            "pooled": {"winning_step_counts": pooled_steps,
                       "attack_outcome_counts": pooled_outcomes,
                       "gain_by_step": pooled_gain},
        }
    rows.sort(key=lambda r: (r[0], r[1], r[2], r[3]))
    summary = {"experiment": 2, "problem": problem_name,
               "methods": list(methods), "budget": budget,
               "seeds": list(seeds), "per_method": per_method}
    write_csv(os.path.join(out_dir, f"experiment2_{problem_name}_iterations.csv"),
              EXPERIMENT2_COLUMNS, rows)
    write_json(os.path.join(out_dir, f"experiment2_{problem_name}_summary.json"),
               summary)
    return summary


# ---------------------------------------------------------- experiment 3

EXPERIMENT3_COLUMNS = ("problem", "seed", "snapshot", "evals_at_snapshot",
                       "radius", "solver", "classification", "loss_before",
                       "loss_after", "gradient_evals", "f_base", "f_new", "ascent")


def _incumbent_at(problem: ProblemSpec, records, count: int):
    """Best feasible record among the first ``count`` evaluations."""
    return best_feasible(problem, records[1:count], records[0])


def _snapshot_counts(curve: Sequence[float], snapshot_count: int) -> list:
    """Evaluation counts whose incumbents sit at equally spaced quantiles of
    the incumbent-objective trajectory. Duplicates collapse, so flat runs
    yield fewer snapshots than requested."""
    levels = np.quantile(np.asarray(curve, dtype=float),
                         np.linspace(0.0, 1.0, snapshot_count))
    counts = []
    for level in levels:
        hit = evals_to_threshold(curve, float(level))
        if hit is not None and hit not in counts:
            counts.append(hit)
    return counts


def run_experiment_3(problem_name: str, seeds: Sequence[int], out_dir: str,
                     radii: Sequence[float] = (1.0, 0.1, 0.01),
                     solvers: Sequence[str] = ("fgsm", "pgd"),
                     snapshot_count: int = 6, budget: int = 2000,
                     mode: Optional[str] = None) -> dict:
    """Solver study: fire one-shot attacks from snapshots of a hybrid run.

    Snapshots are incumbents at equally spaced quantiles of the incumbent
    objective, so they span the range of values the run moved through.
    Attacks at each (radius, solver) pair are evaluated out-of-budget;
    ascent means the best returned direction lands feasible with a strictly
    larger objective.
    """
    if snapshot_count < 2:
        raise ValueError("snapshot_count must be at least 2")
    if not radii:
        raise ValueError("radii must be nonempty")
    entry = CATALOG[problem_name]
    os.makedirs(out_dir, exist_ok=True)
    rows = []
    tally: dict = {s: {"ascent": 0, "successful": 0, "total": 0,
                       "gradient_evals": 0} for s in solvers}
    agreement = {"same": 0, "cells": 0}
    for seed in seeds:
        problem = build_problem(problem_name, seed, mode)
        _, _, history = run_solver(problem, "hyb", seed, budget,
                                   attack_components=entry.attack_components)
        records = history.records
        counts = _snapshot_counts(history.best_feasible_curve(), snapshot_count)
        for snap_i, count in enumerate(counts):
            base = _incumbent_at(problem, records, count)
            for radius in radii:
                ascents: dict = {}
                for solver in solvers:
                    cfg = AttackConfig(solver=solver,
                                       component_count=entry.attack_components)
                    out = attack_operator(problem, base.x, float(radius), cfg)
                    f_new = -math.inf
                    cls = "failed"
                    lb = la = math.nan
                    for d, c, l0, l1 in zip(out.directions, out.classifications,
                                            out.loss_before, out.loss_after):
                        rec = evaluate(problem, None, base.x + d)
                        val = rec.fval if rec.feasible else -math.inf
                        if val > f_new or math.isnan(lb):
                            f_new, cls, lb, la = val, c, l0, l1
                    ascent = f_new > base.fval
                    rows.append((problem_name, seed, snap_i, count, float(radius),
                                 solver, cls, lb, la, out.gradient_evals,
                                 base.fval, f_new, ascent))
                    t = tally[solver]
                    t["total"] += 1
                    t["ascent"] += int(ascent)
                    t["successful"] += int(cls == "successful")
                    t["gradient_evals"] += out.gradient_evals
                    ascents[solver] = ascent
                if "fgsm" in ascents and "pgd" in ascents:
                    agreement["cells"] += 1
                    agreement["same"] += int(ascents["fgsm"] == ascents["pgd"])
    per_solver = {
        s: {
            "ascent_rate": t["ascent"] / t["total"] if t["total"] else None,
            "successful_rate": t["successful"] / t["total"] if t["total"] else None,
            "mean_gradient_evals": (t["gradient_evals"] / t["total"]
                                    if t["total"] else None),
        }
        for s, t in tally.items()
    }
    rows.sort(key=lambda r: (r[0], r[1], r[2]))
    summary = {"experiment": 3, "problem": problem_name, "budget": budget,
               "seeds": list(seeds), "radii": [float(r) for r in radii],
               "solvers": list(solvers), "snapshot_count": snapshot_count,
               "per_solver": per_solver}
    if agreement["cells"]:
        frac = agreement["same"] / agreement["cells"]
        summary["soft_checks"] = {
            "ascent_agreement_fraction": frac,
            "ascent_agreement_ge_70pct": bool(frac >= 0.7),
        }
    write_csv(os.path.join(out_dir, f"experiment3_{problem_name}_attacks.csv"),
              EXPERIMENT3_COLUMNS, rows)
    write_json(os.path.join(out_dir, f"experiment3_{problem_name}_summary.json"),
               summary)
    return summary
