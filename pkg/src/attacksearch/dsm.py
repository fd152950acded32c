"""Covering direct search: covering, search and poll steps plus the solver.

Each iteration tries the three steps in order and opportunistically: a step
whose best feasible trial strictly beats the incumbent ends the iteration.
The step radius doubles after an improving iteration and halves otherwise;
a run stops when the radius drops below ``stop_radius`` or the evaluation
budget is exhausted.

Step construction follows the practical scheme the reference experiments
use: the covering step samples the unit max-norm ball around the incumbent
(the ball is deliberately not scaled by r, it is the globalization device),
the search step probes one random direction at Euclidean length
r0 * sqrt(s) where s counts executed search steps, and the poll step
reflects the scaled coordinate axes through a random Householder matrix,
giving a positive spanning set of 2n directions of length r.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (EXACT, BudgetExhausted, ProblemSpec, TrialHistory, best_feasible,
                   distance_to_history, evaluate, evaluate_within_budget)
from .runtrace import (COVERING, NONE, POLL, SEARCH, IterationRecord, RunTrace,
                       check_trace_invariants)

COVERING_MODES = ("random_unit_ball", "farthest_of_k")


@dataclass(frozen=True)
class DsmConfig:
    r0: float = 1.0
    covering_mode: str = "random_unit_ball"
    k_farthest: int = 64
    search_enabled: bool = True
    rng_seed: int = 0
    stop_radius: float = 1e-5

    def __post_init__(self):
        if self.covering_mode not in COVERING_MODES:
            raise ValueError(f"unknown covering mode {self.covering_mode!r}")
        if not 0.0 < self.stop_radius < self.r0:
            raise ValueError("need r0 > stop_radius > 0")
        if self.k_farthest < 1:
            raise ValueError("k_farthest must be >= 1")


def covering_step(x, history: TrialHistory, config: DsmConfig,
                  rng: np.random.Generator) -> list:
    """One direction in the closed unit max-norm ball around x.

    Empty history returns the zero direction (the incumbent itself is the
    farthest-point argmax over an empty set by convention). In
    ``farthest_of_k`` mode the draw maximizing the distance to the history
    wins, ties to the first draw.
    """
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if history.eval_count == 0:
        return [np.zeros(n)]
    if config.covering_mode == "random_unit_ball":
        return [rng.uniform(-1.0, 1.0, size=n)]
    draws = rng.uniform(-1.0, 1.0, size=(config.k_farthest, n))
    dists = [distance_to_history(history, x + d) for d in draws]
    return [draws[int(np.argmax(dists))]]


def _unit_sphere(rng: np.random.Generator, n: int) -> np.ndarray:
    while True:
        v = rng.standard_normal(n)
        norm = np.linalg.norm(v)
        if norm > 1e-12:
            return v / norm


def search_step(x, r, history, s: int, r0: float, rng: np.random.Generator,
                enabled: bool = True) -> list:
    """One point along a uniform random direction at length r0*sqrt(s); empty
    when the search step is disabled. ``s`` counts executed search steps
    including this one."""
    if not enabled:
        return []
    x = np.asarray(x, dtype=np.float64)
    if s < 1:
        raise ValueError("search counter must be >= 1")
    return [r0 * np.sqrt(float(s)) * _unit_sphere(rng, x.shape[0])]


def householder_directions(v: np.ndarray, r: float) -> list:
    """{+r M e_i} then {-r M e_i} for M = I - 2 v v^T (v a unit vector)."""
    n = v.shape[0]
    M = np.eye(n) - 2.0 * np.outer(v, v)
    cols = [r * M[:, i] for i in range(n)]
    return cols + [-c for c in cols]


def poll_step(x, r, rng: np.random.Generator) -> list:
    """Positive spanning set of 2n directions of Euclidean length r."""
    x = np.asarray(x, dtype=np.float64)
    return householder_directions(_unit_sphere(rng, x.shape[0]), r)


def _evaluate_set(problem, history, base_x, dirs, budget):
    return [evaluate_within_budget(problem, history, base_x + d, budget) for d in dirs]


def dsm_phase(problem, history, base, r, s_count, config: DsmConfig,
              rng, budget):
    """Covering -> search -> poll around ``base``, opportunistically.

    Returns (winning step name, winning record, updated search counter).
    ``base`` is returned when no step improves on it.
    """
    dirs = covering_step(base.x, history, config, rng)
    t = best_feasible(problem, _evaluate_set(problem, history, base.x, dirs, budget), base)
    if t.fval > base.fval:
        return COVERING, t, s_count

    if config.search_enabled:
        s_count += 1
        dirs = search_step(base.x, r, history, s_count, config.r0, rng)
        t = best_feasible(problem, _evaluate_set(problem, history, base.x, dirs, budget), base)
        if t.fval > base.fval:
            return SEARCH, t, s_count

    dirs = poll_step(base.x, r, rng)
    t = best_feasible(problem, _evaluate_set(problem, history, base.x, dirs, budget), base)
    if t.fval > base.fval:
        return POLL, t, s_count
    return NONE, base, s_count


def _bootstrap(problem: ProblemSpec, history: TrialHistory):
    incumbent = evaluate(problem, history, problem.x0)
    if problem.mode == EXACT and not incumbent.feasible:
        raise ValueError("x0 is infeasible in exact mode")
    if not np.isfinite(incumbent.fval):
        raise ValueError("objective is not finite at x0")
    return incumbent


def cdsm_run(problem: ProblemSpec, config: DsmConfig, budget: int = 5000,
             history: TrialHistory | None = None):
    """Run covering direct search; returns (incumbent record, RunTrace)."""
    rng = np.random.default_rng(config.rng_seed)
    history = history if history is not None else TrialHistory()
    incumbent = _bootstrap(problem, history)
    trace = RunTrace(method="cdsm", seed=config.rng_seed, mode=problem.mode,
                     budget=budget, stop_radius=config.stop_radius, f0=incumbent.fval)
    r = config.r0
    s_count = 0
    k = 0
    while True:
        if r < config.stop_radius:
            trace.stop_reason = "radius"
            break
        if history.eval_count >= budget:
            trace.stop_reason = "budget"
            break
        evals0 = history.eval_count
        try:
            step, winner, s_count = dsm_phase(problem, history, incumbent, r,
                                              s_count, config, rng, budget)
        except BudgetExhausted:
            trace.stop_reason = "budget"
            break
        improved = step != NONE
        incumbent = winner
        trace.iterations.append(IterationRecord(
            index=k, attack_outcome=None, winning_step=step, r_atk=None, r_dsm=r,
            evals_attack=0, evals_dsm=history.eval_count - evals0,
            evals_so_far=history.eval_count, incumbent_f=incumbent.fval))
        r = 2.0 * r if improved else 0.5 * r
        k += 1
    trace.final_x = incumbent.x
    trace.final_f = incumbent.fval
    trace.eval_count = history.eval_count
    trace.final_r_dsm = r
    trace.eval_curve = list(history.best_feasible_curve())
    check_trace_invariants(trace)
    return incumbent, trace
