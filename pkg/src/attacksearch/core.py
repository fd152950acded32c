"""Problem representation, evaluation caching and incumbent bookkeeping.

A problem is "maximize f(phi(x)) subject to c(phi(x)) <= 0" with phi opaque
(evaluations and pullbacks only). Two modes share one record type:

* ``exact``    - fval = f(phi(x)), feasible iff every constraint holds;
* ``relaxed``  - fval = f(phi(x)) - ||max(c(phi(x)), 0)||^2, always feasible.

Every trial evaluation flows through :func:`evaluate`, which deduplicates
against a :class:`TrialHistory`; the number of cache misses is the budget
axis every solver reports against.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from .netdiff import DifferentiableMap

EXACT = "exact"
RELAXED = "relaxed"


@dataclass(frozen=True)
class Goal:
    """Smooth scalar objective on the output space, with analytic gradient."""

    value: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray]


def _frozen_vector(x, dim: int, name: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.shape != (dim,):
        raise ValueError(f"{name}: expected shape ({dim},), got {v.shape}")
    v = v.copy()
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class ProblemSpec:
    """Immutable problem description.

    ``phi`` maps R^n -> R^m, ``constraint`` maps the output space R^m to the
    p constraint values, ``goal`` scores outputs. ``x0`` must be feasible in
    exact mode.
    """

    n: int
    m: int
    p: int
    phi: DifferentiableMap
    goal: Goal
    constraint: DifferentiableMap
    mode: str
    x0: np.ndarray

    def __post_init__(self):
        if self.mode not in (EXACT, RELAXED):
            raise ValueError(f"mode must be {EXACT!r} or {RELAXED!r}, got {self.mode!r}")
        if (self.phi.in_dim, self.phi.out_dim) != (self.n, self.m):
            raise ValueError("phi dims do not match (n, m)")
        if (self.constraint.in_dim, self.constraint.out_dim) != (self.m, self.p):
            raise ValueError("constraint dims do not match (m, p)")
        object.__setattr__(self, "x0", _frozen_vector(self.x0, self.n, "x0"))
        if not np.isfinite(self.x0).all():
            raise ValueError("x0 must be finite")
        if self.mode == EXACT:
            rec = evaluate(self, None, self.x0)
            if not rec.feasible:
                raise ValueError("x0 is infeasible in exact mode")


@dataclass(frozen=True)
class EvalRecord:
    """One evaluated point. ``index`` is the evaluation order (cache misses
    only); records fetched from the cache keep their original index."""

    index: int
    x: np.ndarray
    y: np.ndarray
    cvals: np.ndarray
    fval: float
    feasible: bool


class BudgetExhausted(Exception):
    """Raised when a cache miss would exceed the evaluation budget."""


class TrialHistory:
    """Evaluation cache and distance structure.

    ``dedupe_tol`` is the max-norm radius inside which a stored point is
    reused; the default 0 means bitwise-identical points only (implemented
    with a hash lookup, so long runs stay O(1) per trial).
    """

    def __init__(self, dedupe_tol: float = 0.0):
        if dedupe_tol < 0:
            raise ValueError("dedupe_tol must be >= 0")
        self.dedupe_tol = float(dedupe_tol)
        self.records: list[EvalRecord] = []
        self._keys: dict[bytes, int] = {}
        self._points: Optional[np.ndarray] = None  # (capacity, n) grow-doubling buffer

    @property
    def eval_count(self) -> int:
        return len(self.records)

    @staticmethod
    def _normalize(x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=np.float64)
        # fold -0.0 into +0.0 so byte keys agree with max-norm distance 0
        return x + 0.0

    def lookup(self, x) -> Optional[EvalRecord]:
        x = self._normalize(x)
        if not self.records:
            return None
        if self.dedupe_tol == 0.0:
            idx = self._keys.get(x.tobytes())
            return None if idx is None else self.records[idx]
        pts = self._points[: len(self.records)]
        dists = np.abs(pts - x).max(axis=1)
        j = int(np.argmin(dists))
        if dists[j] <= self.dedupe_tol:
            return self.records[j]
        return None

    def append(self, record: EvalRecord) -> None:
        x = self._normalize(record.x)
        n = x.shape[0]
        if self._points is None:
            self._points = np.empty((64, n))
        elif len(self.records) == self._points.shape[0]:
            grown = np.empty((2 * self._points.shape[0], n))
            grown[: len(self.records)] = self._points
            self._points = grown
        self._points[len(self.records)] = x
        self._keys[x.tobytes()] = len(self.records)
        self.records.append(record)

    def distance_to(self, x) -> float:
        if not self.records:
            return np.inf
        x = self._normalize(x)
        pts = self._points[: len(self.records)]
        return float(np.abs(pts - x).max(axis=1).min())

    def best_feasible_curve(self) -> np.ndarray:
        """Running best feasible objective after each evaluation (-inf before
        the first feasible point)."""
        vals = np.array(
            [r.fval if r.feasible else -np.inf for r in self.records], dtype=np.float64
        )
        return np.maximum.accumulate(vals) if vals.size else vals


def distance_to_history(history: TrialHistory, x) -> float:
    """Max-norm distance from x to the closest stored point (inf when empty)."""
    return history.distance_to(x)


def evaluate(problem: ProblemSpec, history: Optional[TrialHistory], x) -> EvalRecord:
    """Evaluate a trial point through the cache.

    Cache hits return the stored record unchanged. A non-finite network or
    objective value produces a flagged record (fval = -inf, feasible False)
    that can never become an incumbent. Passing ``history=None`` performs a
    standalone evaluation (index -1, nothing stored).
    """
    x = TrialHistory._normalize(x)
    if problem.n != x.shape[0]:
        raise ValueError(f"point has dimension {x.shape[0]}, expected {problem.n}")
    if not np.isfinite(x).all():
        raise ValueError("trial point must be finite")
    if history is not None:
        hit = history.lookup(x)
        if hit is not None:
            return hit
        index = history.eval_count
    else:
        index = -1

    with np.errstate(all="ignore"):
        y = np.asarray(problem.phi.eval(x), dtype=np.float64)
        if np.isfinite(y).all():
            cvals = np.asarray(problem.constraint.eval(y), dtype=np.float64)
        else:
            cvals = np.full(problem.p, np.nan)
        if np.isfinite(y).all() and np.isfinite(cvals).all():
            fval = float(problem.goal.value(y))
            if problem.mode == RELAXED:
                viol = np.maximum(cvals, 0.0)
                fval -= float(viol @ viol)
                feasible = True
            else:
                feasible = bool(np.max(cvals) <= 0.0) if problem.p else True
        else:
            fval = -np.inf
            feasible = False
    if not np.isfinite(fval):
        fval = -np.inf
        feasible = False

    record = EvalRecord(index=index, x=x.copy(), y=y, cvals=cvals, fval=fval,
                        feasible=feasible)
    if history is not None:
        history.append(record)
    return record


def evaluate_within_budget(problem: ProblemSpec, history: TrialHistory, x,
                           budget: int) -> EvalRecord:
    """Like evaluate(), but a cache miss at the budget raises BudgetExhausted."""
    if history.lookup(x) is None and history.eval_count >= budget:
        raise BudgetExhausted
    return evaluate(problem, history, x)


def best_feasible(problem: ProblemSpec, records: Iterable[EvalRecord],
                  incumbent: EvalRecord) -> EvalRecord:
    """Best feasible record if it strictly beats the incumbent, else the
    incumbent. Ties go to the earliest-evaluated record."""
    best = incumbent
    for rec in sorted(records, key=lambda r: r.index):
        if rec.feasible and rec.fval > best.fval:
            best = rec
    return best


def validate_problem(problem: ProblemSpec, rng: np.random.Generator,
                     probes: int = 8, fd_step: float = 1e-6,
                     rel_tol: float = 1e-6, probe_scale: float = 0.5) -> None:
    """Check the analytic goal gradient against central differences at random
    output-space probes; raises AssertionError on disagreement."""
    base = evaluate(problem, None, problem.x0)
    for _ in range(probes):
        y = base.y + rng.normal(0.0, probe_scale, size=problem.m)
        g = np.asarray(problem.goal.grad(y), dtype=np.float64)
        fd = np.empty_like(g)
        for i in range(problem.m):
            e = np.zeros(problem.m)
            e[i] = fd_step
            fd[i] = (problem.goal.value(y + e) - problem.goal.value(y - e)) / (2 * fd_step)
        err = np.max(np.abs(fd - g)) / max(1.0, np.max(np.abs(g)))
        if not err < rel_tol:
            raise AssertionError(f"goal gradient mismatch at probe (rel err {err:.3e})")
