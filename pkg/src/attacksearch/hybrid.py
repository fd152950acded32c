"""The hybrid solver and the two single-strategy baselines.

Each hybrid iteration fires one attack at the incumbent, doubles the attack
radius on improvement (halving it otherwise), and then decides: if the
attack's gain passes the sufficient-increase test the direct-search phase is
skipped entirely and its radius is left alone; otherwise covering, search
and poll run centered at the attack's winner, sharing one evaluation history
with the attack trials. The skip rule is what bounds how often the attack is
allowed to shortcut the search machinery: each skip raises the objective by
at least tau * (|f| + eps), so skips cannot accumulate without progress.

``attack_only_run`` (two-radius attack iteration) and ``rls_run`` (random
line search at three scaled lengths) reproduce the baseline methods used in
the benchmark experiments, radius constants 11/10, 2/3 and 13/10, 10/13,
2/3 included.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .attack import AttackConfig, attack_operator
from .core import (BudgetExhausted, ProblemSpec, TrialHistory, best_feasible,
                   evaluate_within_budget)
from .dsm import DsmConfig, _bootstrap, _evaluate_set, _unit_sphere, dsm_phase
from .runtrace import (ATTACK, ATTACK_SKIP, FAIL, LINE, NONE, SIMPLE, SUFFICIENT,
                       IterationRecord, RunTrace, check_trace_invariants)


@dataclass(frozen=True)
class SufficientIncreaseParams:
    tau: float = 1e-3
    eps: float = 1e-10

    def __post_init__(self):
        if self.tau <= 0 or self.eps <= 0:
            raise ValueError("tau and eps must be positive")


def rho(si: SufficientIncreaseParams, f_new: float, f_old: float) -> int:
    """1 iff the relative increase from f_old to f_new clears tau."""
    return int((f_new - f_old) / (abs(f_old) + si.eps) >= si.tau)


@dataclass(frozen=True)
class HybridConfig:
    attack: AttackConfig = field(default_factory=AttackConfig)
    dsm: DsmConfig = field(default_factory=DsmConfig)
    r_atk0: float = 1.0
    si: SufficientIncreaseParams = field(default_factory=SufficientIncreaseParams)

    def __post_init__(self):
        if not self.r_atk0 > self.dsm.stop_radius:
            raise ValueError("r_atk0 must exceed the stopping radius")


def _attack_phase(problem, history, incumbent, r_atk, config: AttackConfig, budget):
    """Fire one attack and evaluate every returned direction through the
    history; returns (winner record, outcome)."""
    outcome = attack_operator(problem, incumbent.x, r_atk, config)
    recs = _evaluate_set(problem, history, incumbent.x,
                         [np.asarray(d) for d in outcome.directions], budget)
    return best_feasible(problem, recs, incumbent), outcome


def hybrid_run(problem: ProblemSpec, config: HybridConfig, budget: int = 5000,
               history: TrialHistory | None = None):
    """Attack step + covering direct search; returns (incumbent, RunTrace)."""
    rng = np.random.default_rng(config.dsm.rng_seed)
    history = history if history is not None else TrialHistory()
    incumbent = _bootstrap(problem, history)
    trace = RunTrace(method="hyb", seed=config.dsm.rng_seed, mode=problem.mode,
                     budget=budget, stop_radius=config.dsm.stop_radius,
                     f0=incumbent.fval)
    r_atk = config.r_atk0
    r_dsm = config.dsm.r0
    s_count = 0
    k = 0
    while True:
        if max(r_atk, r_dsm) < config.dsm.stop_radius:
            trace.stop_reason = "radius"
            break
        if history.eval_count >= budget:
            trace.stop_reason = "budget"
            break
        evals0 = history.eval_count
        try:
            t_atk, _ = _attack_phase(problem, history, incumbent, r_atk,
                                     config.attack, budget)
            attack_improved = t_atk.fval > incumbent.fval
            r_atk_next = 2.0 * r_atk if attack_improved else 0.5 * r_atk
            evals_attack = history.eval_count - evals0

            if rho(config.si, t_atk.fval, incumbent.fval) == 1:
                incumbent = t_atk
                trace.iterations.append(IterationRecord(
                    index=k, attack_outcome=SUFFICIENT, winning_step=ATTACK_SKIP,
                    r_atk=r_atk, r_dsm=r_dsm, evals_attack=evals_attack, evals_dsm=0,
                    evals_so_far=history.eval_count, incumbent_f=incumbent.fval))
                r_atk = r_atk_next
                k += 1
                continue

            # direct-search phase centered at the attack winner
            step, t_dsm, s_count = dsm_phase(problem, history, t_atk, r_dsm,
                                             s_count, config.dsm, rng, budget)
        except BudgetExhausted:
            trace.stop_reason = "budget"
            break
        dsm_improved = step != NONE
        incumbent = t_dsm
        trace.iterations.append(IterationRecord(
            index=k, attack_outcome=SIMPLE if attack_improved else FAIL,
            winning_step=step, r_atk=r_atk, r_dsm=r_dsm,
            evals_attack=evals_attack, evals_dsm=history.eval_count - evals0 - evals_attack,
            evals_so_far=history.eval_count, incumbent_f=incumbent.fval))
        r_atk = r_atk_next
        r_dsm = 2.0 * r_dsm if dsm_improved else 0.5 * r_dsm
        k += 1
    trace.final_x = incumbent.x
    trace.final_f = incumbent.fval
    trace.eval_count = history.eval_count
    trace.final_r_atk = r_atk
    trace.final_r_dsm = r_dsm
    trace.eval_curve = list(history.best_feasible_curve())
    check_trace_invariants(trace, tau=config.si.tau, eps=config.si.eps)
    return incumbent, trace


def attack_only_run(problem: ProblemSpec, config: HybridConfig, budget: int = 5000,
                    history: TrialHistory | None = None):
    """Pure attack iteration: trials from radii r and (11/10) r every step;
    expand by 11/10 on improvement, shrink by 2/3 otherwise."""
    history = history if history is not None else TrialHistory()
    incumbent = _bootstrap(problem, history)
    trace = RunTrace(method="atk", seed=config.dsm.rng_seed, mode=problem.mode,
                     budget=budget, stop_radius=config.dsm.stop_radius,
                     f0=incumbent.fval)
    r = config.r_atk0
    k = 0
    while True:
        if r < config.dsm.stop_radius:
            trace.stop_reason = "radius"
            break
        if history.eval_count >= budget:
            trace.stop_reason = "budget"
            break
        evals0 = history.eval_count
        try:
            out_lo = attack_operator(problem, incumbent.x, r, config.attack)
            out_hi = attack_operator(problem, incumbent.x, (11.0 / 10.0) * r, config.attack)
            dirs = [np.asarray(d) for d in out_lo.directions + out_hi.directions]
            recs = _evaluate_set(problem, history, incumbent.x, dirs, budget)
        except BudgetExhausted:
            trace.stop_reason = "budget"
            break
        t = best_feasible(problem, recs, incumbent)
        improved = t.fval > incumbent.fval
        incumbent = t if improved else incumbent
        trace.iterations.append(IterationRecord(
            index=k, attack_outcome=SIMPLE if improved else FAIL,
            winning_step=ATTACK if improved else NONE, r_atk=r, r_dsm=None,
            evals_attack=history.eval_count - evals0, evals_dsm=0,
            evals_so_far=history.eval_count, incumbent_f=incumbent.fval))
        r = r * (11.0 / 10.0) if improved else r * (2.0 / 3.0)
        k += 1
    trace.final_x = incumbent.x
    trace.final_f = incumbent.fval
    trace.eval_count = history.eval_count
    trace.final_r_atk = r
    trace.eval_curve = list(history.best_feasible_curve())
    check_trace_invariants(trace)
    return incumbent, trace


def rls_run(problem: ProblemSpec, config: HybridConfig, budget: int = 5000,
            history: TrialHistory | None = None):
    """Random line search: one uniform direction per iteration, trials at
    lengths (13/10) r, r, (10/13) r; on improvement the radius becomes the
    winning length, otherwise it shrinks by 2/3."""
    rng = np.random.default_rng(config.dsm.rng_seed)
    history = history if history is not None else TrialHistory()
    incumbent = _bootstrap(problem, history)
    trace = RunTrace(method="rls", seed=config.dsm.rng_seed, mode=problem.mode,
                     budget=budget, stop_radius=config.dsm.stop_radius,
                     f0=incumbent.fval)
    r = config.dsm.r0
    k = 0
    while True:
        if r < config.dsm.stop_radius:
            trace.stop_reason = "radius"
            break
        if history.eval_count >= budget:
            trace.stop_reason = "budget"
            break
        evals0 = history.eval_count
        v = _unit_sphere(rng, problem.n)
        lengths = [r * (13.0 / 10.0), r, r * (10.0 / 13.0)]
        try:
            recs = _evaluate_set(problem, history, incumbent.x,
                                 [ell * v for ell in lengths], budget)
        except BudgetExhausted:
            trace.stop_reason = "budget"
            break
        t = best_feasible(problem, recs, incumbent)
        improved = t.fval > incumbent.fval
        if improved:
            winner = next(ell for ell, rec in zip(lengths, recs) if rec is t)
            incumbent = t
        trace.iterations.append(IterationRecord(
            index=k, attack_outcome=None, winning_step=LINE if improved else NONE,
            r_atk=None, r_dsm=r, evals_attack=0,
            evals_dsm=history.eval_count - evals0,
            evals_so_far=history.eval_count, incumbent_f=incumbent.fval))
        r = winner if improved else r * (2.0 / 3.0)
        k += 1
    trace.final_x = incumbent.x
    trace.final_f = incumbent.fval
    trace.eval_count = history.eval_count
    trace.final_r_dsm = r
    trace.eval_curve = list(history.best_feasible_curve())
    check_trace_invariants(trace)
    return incumbent, trace
