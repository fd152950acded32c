"""Run traces and the invariants every solver run must satisfy.

A RunTrace is the auditable artifact of one solver run: one record per
iteration (which step produced the incumbent, both radii, evaluation
counts) plus the per-evaluation best-so-far curve. ``check_trace_invariants``
re-derives the radius laws, incumbent monotonicity, sufficient-increase
soundness and the termination rule from the trace alone and raises on any
violation; every run in the test suite and the CLI selftest goes through it.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

ATTACK_SKIP = "attack_skip"
ATTACK = "attack"
COVERING = "covering"
SEARCH = "search"
POLL = "poll"
LINE = "line"
NONE = "none"

SUFFICIENT = "sufficient"
SIMPLE = "simple"
FAIL = "fail"


@dataclass(frozen=True)
class IterationRecord:
    index: int
    attack_outcome: Optional[str]  # sufficient | simple | fail | None for pure dsm/rls
    winning_step: str
    r_atk: Optional[float]
    r_dsm: Optional[float]
    evals_attack: int
    evals_dsm: int
    evals_so_far: int
    incumbent_f: float


@dataclass
class RunTrace:
    method: str  # atk | rls | cdsm | hyb
    seed: int
    mode: str
    budget: int
    stop_radius: float
    f0: float
    iterations: list = field(default_factory=list)
    eval_curve: list = field(default_factory=list)  # best feasible f after eval 1, 2, ...
    final_x: Optional[np.ndarray] = None
    final_f: float = -np.inf
    eval_count: int = 0
    stop_reason: str = ""
    final_r_atk: Optional[float] = None
    final_r_dsm: Optional[float] = None

    def to_json_dict(self) -> dict:
        return {
            "method": self.method,
            "seed": self.seed,
            "mode": self.mode,
            "budget": self.budget,
            "stop_radius": self.stop_radius,
            "f0": self.f0,
            "stop_reason": self.stop_reason,
            "eval_count": self.eval_count,
            "final_f": self.final_f,
            "final_x": [float(v) for v in self.final_x],
            "final_r_atk": self.final_r_atk,
            "final_r_dsm": self.final_r_dsm,
            "iterations": [
                {
                    "index": it.index,
                    "attack_outcome": it.attack_outcome,
                    "winning_step": it.winning_step,
                    "r_atk": it.r_atk,
                    "r_dsm": it.r_dsm,
                    "evals_attack": it.evals_attack,
                    "evals_dsm": it.evals_dsm,
                    "evals_so_far": it.evals_so_far,
                    "incumbent_f": it.incumbent_f,
                }
                for it in self.iterations
            ],
            "eval_curve": [float(v) for v in self.eval_curve],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=1)


DSM_STEPS = (COVERING, SEARCH, POLL)


def check_trace_invariants(trace: RunTrace, tau: float = 1e-3,
                           eps: float = 1e-10) -> None:
    """Assert the run-level invariants shared by all four methods."""
    f_prev = trace.f0
    skips = 0
    for it in trace.iterations:
        if not it.incumbent_f >= f_prev:
            raise AssertionError(f"iteration {it.index}: incumbent decreased")
        if it.winning_step == NONE and it.attack_outcome != SIMPLE:
            if it.incumbent_f != f_prev:
                raise AssertionError(f"iteration {it.index}: no step won but f moved")
        if it.attack_outcome == SUFFICIENT:
            skips += 1
            if it.winning_step != ATTACK_SKIP:
                raise AssertionError(f"iteration {it.index}: sufficient without skip")
            if it.evals_dsm != 0:
                raise AssertionError(f"iteration {it.index}: skip evaluated dsm points")
            if not (it.incumbent_f - f_prev) / (abs(f_prev) + eps) >= tau:
                raise AssertionError(f"iteration {it.index}: skip without sufficient increase")
        f_prev = it.incumbent_f

    # the sufficient-increase bound on skip iterations (loose by design)
    if skips and trace.final_f > trace.f0:
        if skips > (trace.final_f - trace.f0) / (tau * eps):
            raise AssertionError("more skips than the sufficient-increase bound allows")

    _check_radius_laws(trace)

    if trace.eval_curve:
        curve = np.asarray(trace.eval_curve)
        if np.any(np.diff(curve) < 0):
            raise AssertionError("best-so-far curve decreased")

    if trace.stop_reason == "radius":
        radii = [r for r in (trace.final_r_atk, trace.final_r_dsm) if r is not None]
        if not max(radii) < trace.stop_radius:
            raise AssertionError("stopped on radius with a radius above the threshold")
    elif trace.stop_reason == "budget":
        if trace.eval_count < trace.budget:
            raise AssertionError("stopped on budget before exhausting it")
    else:
        raise AssertionError(f"unknown stop reason {trace.stop_reason!r}")


def _radius_chain(values, final):
    """Pairs (r_k, r_{k+1}) including the post-run value."""
    nxt = list(values[1:]) + [final]
    return zip(values, nxt)


def _check_radius_laws(trace: RunTrace) -> None:
    its = trace.iterations
    if not its:
        return
    if trace.method in ("cdsm", "hyb"):
        r_dsm = [it.r_dsm for it in its]
        for it, (r, r_next) in zip(its, _radius_chain(r_dsm, trace.final_r_dsm)):
            if it.attack_outcome == SUFFICIENT:
                expected = r  # skip leaves the dsm radius alone
            elif it.winning_step in DSM_STEPS:
                expected = 2.0 * r
            else:
                expected = 0.5 * r
            if r_next != expected:
                raise AssertionError(
                    f"iteration {it.index}: dsm radius {r} -> {r_next}, expected {expected}"
                )
    if trace.method == "hyb":
        r_atk = [it.r_atk for it in its]
        for it, (r, r_next) in zip(its, _radius_chain(r_atk, trace.final_r_atk)):
            improved = it.attack_outcome in (SUFFICIENT, SIMPLE)
            expected = 2.0 * r if improved else 0.5 * r
            if r_next != expected:
                raise AssertionError(
                    f"iteration {it.index}: attack radius {r} -> {r_next}, expected {expected}"
                )
    if trace.method == "atk":
        r_atk = [it.r_atk for it in its]
        for it, (r, r_next) in zip(its, _radius_chain(r_atk, trace.final_r_atk)):
            expected = r * (11.0 / 10.0) if it.winning_step == ATTACK else r * (2.0 / 3.0)
            if r_next != expected:
                raise AssertionError(
                    f"iteration {it.index}: radius {r} -> {r_next}, expected {expected}"
                )
    if trace.method == "rls":
        r_line = [it.r_dsm for it in its]
        for it, (r, r_next) in zip(its, _radius_chain(r_line, trace.final_r_dsm)):
            if it.winning_step == LINE:
                allowed = (r * (13.0 / 10.0), r, r * (10.0 / 13.0))
                if r_next not in allowed:
                    raise AssertionError(
                        f"iteration {it.index}: radius {r} -> {r_next} not a trial length"
                    )
            elif r_next != r * (2.0 / 3.0):
                raise AssertionError(
                    f"iteration {it.index}: radius {r} -> {r_next}, expected shrink by 2/3"
                )
