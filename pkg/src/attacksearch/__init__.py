"""Constrained maximization through network maps by hybridizing one-shot
directional attacks with a covering direct search.

The problem form is: maximize f(phi(x)) subject to c(phi(x)) <= 0, where phi
is only accessible through evaluation and vector-Jacobian products. Attacks
aim the differential of an augmented network at the goal gradient; a
covering direct search supplies the convergence safety net; the hybrid
interleaves both with independent step-size laws.
"""

from ._kernels import BACKEND
from .attack import (FAILED, FEASIBLE_ONLY, SUCCESSFUL, AttackConfig,
                     AttackOutcome, attack_operator, calibrate_radius,
                     oracle_attack, target_direction)
from .experiments import (execute_run, run_experiment_1, run_experiment_2,
                          run_experiment_3, run_solver)
from .core import (EXACT, RELAXED, BudgetExhausted, EvalRecord, Goal,
                   ProblemSpec, TrialHistory, best_feasible, evaluate,
                   evaluate_within_budget, validate_problem)
from .dsm import (DsmConfig, cdsm_run, covering_step, householder_directions,
                  poll_step, search_step)
from .hybrid import (HybridConfig, SufficientIncreaseParams, attack_only_run,
                     hybrid_run, rho, rls_run)
from .losses import (CE_WSLP_WITNESS, LossKind, find_wslp_counterexample,
                     loss, loss_grad, wslp_check)
from .netdiff import (AugmentedMap, CallableMap, DifferentiableMap,
                      DifferentialMap, MlpNetwork, ScaledDifferentialMap,
                      concat_with_input, load_network, random_mlp,
                      save_network)
from .problems import CATALOG, build_problem
from .runtrace import RunTrace, check_trace_invariants

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackOutcome", "AugmentedMap", "BACKEND",
    "BudgetExhausted", "CATALOG", "CE_WSLP_WITNESS", "CallableMap",
    "DifferentiableMap", "DifferentialMap", "DsmConfig", "EXACT",
    "EvalRecord", "FAILED", "FEASIBLE_ONLY", "Goal", "HybridConfig",
    "LossKind", "MlpNetwork", "ProblemSpec", "RELAXED", "RunTrace",
    "SUCCESSFUL", "ScaledDifferentialMap", "SufficientIncreaseParams",
    "TrialHistory", "attack_only_run", "attack_operator", "best_feasible",
    "build_problem", "calibrate_radius", "cdsm_run", "check_trace_invariants",
    "concat_with_input", "covering_step", "evaluate", "evaluate_within_budget",
    "execute_run", "find_wslp_counterexample", "householder_directions",
    "hybrid_run", "load_network", "loss", "loss_grad", "oracle_attack",
    "poll_step", "random_mlp", "rho", "rls_run", "run_experiment_1",
    "run_experiment_2", "run_experiment_3", "run_solver", "save_network",
    "search_step", "target_direction", "validate_problem", "wslp_check",
]
