"""Directional attacks on the differential network.

At an incumbent x the solver builds the differential map d -> phi(x+d) -
phi(x) (augmented with rectified constraint values), picks the target
direction u = (grad f at phi(x), -2 * violations), and asks an attack solver
for a perturbation d in the max-norm ball of radius r whose image chases u.
A successful attack strictly decreases the loss against u; with a WSLP loss
and a small enough radius, that makes x + d an ascent step for the original
problem, which is what the hybrid solver exploits.

Solvers: ``fgsm`` (one-shot sign step), ``pgd`` (projected sign descent) and
``oracle`` (exhaustive lattice argmin, a test instrument for low dimension).
All of them work on the box reparameterization [0,1]^n of the radius-r ball,
with the center mapping to the zero direction.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import EXACT, ProblemSpec, evaluate
from .losses import LossKind, loss, loss_grad, loss_many
from .netdiff import AugmentedMap, DifferentialMap, ScaledDifferentialMap

SUCCESSFUL = "successful"
FEASIBLE_ONLY = "feasible_only"
FAILED = "failed"


@dataclass(frozen=True)
class AttackConfig:
    solver: str = "fgsm"  # fgsm | pgd | oracle
    loss: LossKind = LossKind.SE
    pgd_steps: int = 10
    pgd_step_scale: Optional[float] = None  # None -> 2.5 / pgd_steps
    component_count: Optional[int] = None  # restrict the attack to the first a components
    oracle_grid: int = 41

    def __post_init__(self):
        if self.solver not in ("fgsm", "pgd", "oracle"):
            raise ValueError(f"unknown solver {self.solver!r}")
        if self.pgd_steps < 1:
            raise ValueError("pgd_steps must be >= 1")
        if self.oracle_grid < 3 or self.oracle_grid % 2 == 0:
            raise ValueError("oracle_grid must be odd and >= 3")
        if self.component_count is not None and self.component_count < 1:
            raise ValueError("component_count must be >= 1 when set")

    @property
    def step_scale(self) -> float:
        return self.pgd_step_scale if self.pgd_step_scale is not None else 2.5 / self.pgd_steps


@dataclass(frozen=True)
class AttackOutcome:
    """Directions proposed by one attack call, with per-direction bookkeeping.

    classification[i] is ``successful`` (feasible, strict loss decrease),
    ``feasible_only`` (feasible but no decrease) or ``failed`` (infeasible in
    exact mode, non-finite, or the zero direction). ``gradient_evals`` counts
    backpropagations spent by the solver.
    """

    directions: tuple
    classifications: tuple
    gradient_evals: int
    loss_before: tuple
    loss_after: tuple

    def successful(self) -> list:
        return [d for d, c in zip(self.directions, self.classifications) if c == SUCCESSFUL]


def target_direction(problem: ProblemSpec, x,
                     component_count: Optional[int] = None) -> np.ndarray:
    """Attack target u = (grad f at phi(x), -2 * rectified constraint values).

    With ``component_count`` = a, entries beyond the first a are zeroed (the
    restricted attack additionally scores the loss on those components only).
    """
    x = np.asarray(x, dtype=np.float64)
    y = problem.phi.eval(x)
    z = np.maximum(problem.constraint.eval(y), 0.0)
    u = np.concatenate([np.asarray(problem.goal.grad(y), dtype=np.float64), -2.0 * z])
    if component_count is not None:
        if not 1 <= component_count <= u.shape[0]:
            raise ValueError("component_count out of range")
        u = u.copy()
        u[component_count:] = 0.0
    return u


def _project(v: np.ndarray, a: Optional[int]) -> np.ndarray:
    return v if a is None else v[:a]


def _masked_loss_grad(kind: LossKind, y1, u, a: Optional[int]) -> np.ndarray:
    """Loss gradient in y1, restricted to the active block when a is set."""
    if a is None:
        return loss_grad(kind, y1, u)
    g = np.zeros_like(u)
    g[:a] = loss_grad(kind, y1[:a], u[:a])
    return g


def fgsm_attack(smap: ScaledDifferentialMap, kind: LossKind, u,
                component_count: Optional[int] = None):
    """One gradient evaluation at the box center; returns (delta, grad_evals)
    with delta in the max-norm ball of radius 1/2 (delta None when the
    gradient is non-finite)."""
    center = np.full(smap.in_dim, 0.5)
    y0 = np.zeros(smap.out_dim)  # smap at the center is exactly 0
    lg = _masked_loss_grad(kind, y0, u, component_count)
    g = smap.vjp(center, lg)
    if not np.isfinite(g).all():
        return None, 1
    return -0.5 * np.sign(g), 1


def pgd_attack(smap: ScaledDifferentialMap, kind: LossKind, u, steps: int,
               step_scale: float, component_count: Optional[int] = None):
    """Projected sign descent from the center; exactly ``steps`` gradient
    evaluations; returns the iterate with the lowest observed loss.

    With steps=1 and step_scale=1 this reproduces fgsm bit for bit: the
    first gradient is taken at the exact center, and the single step lands
    on -sign(g)/2 which the box projection leaves untouched.
    """
    a = component_count
    center = np.full(smap.in_dim, 0.5)
    delta = np.zeros(smap.in_dim)
    best = None
    best_loss = np.inf
    for _ in range(steps):
        y1 = smap.eval(center + delta)
        lg = _masked_loss_grad(kind, y1, u, a)
        g = smap.vjp(center + delta, lg)
        if not np.isfinite(g).all():
            break
        delta = np.clip(delta - 0.5 * step_scale * np.sign(g), -0.5, 0.5)
        cur = loss(kind, _project(smap.eval(center + delta), a), _project(u, a))
        if cur < best_loss:
            best_loss = cur
            best = delta.copy()
    return best, steps


def oracle_attack(problem: ProblemSpec, x, r: float, u, grid: int = 41,
                  kind: LossKind = LossKind.SE,
                  component_count: Optional[int] = None) -> AttackOutcome:
    """Exhaustive attack over the grid^n lattice of the radius-r ball.

    Test instrument: guards n <= 3. ``u`` of length m attacks the plain
    differential; length m+p attacks the augmented one. In exact mode only
    lattice points with c(phi(x+d)) <= 0 compete. Returns the loss minimizer
    when it is a strict improvement over the zero direction, else an empty
    outcome. Argmin ties break in lexicographic lattice order.
    """
    n = problem.n
    if n > 3:
        raise ValueError("oracle attack is limited to n <= 3")
    u = np.asarray(u, dtype=np.float64)
    if u.shape[0] not in (problem.m, problem.m + problem.p):
        raise ValueError("target length must be m or m + p")
    augmented = u.shape[0] == problem.m + problem.p
    x = np.asarray(x, dtype=np.float64)

    axes = [np.linspace(-r, r, grid)] * n
    mesh = np.meshgrid(*axes, indexing="ij")
    D = np.stack([g.ravel() for g in mesh], axis=1)  # lexicographic rows

    with np.errstate(all="ignore"):
        y_anchor = problem.phi.eval(x)
        c_anchor = problem.constraint.eval(y_anchor)
        Y = problem.phi.eval_many(x + D)
        C = np.stack([problem.constraint.eval(yrow) for yrow in Y])
    feasible = np.ones(len(D), dtype=bool)
    if problem.mode == EXACT and problem.p:
        feasible = (C <= 0.0).all(axis=1)
    finite = np.isfinite(Y).all(axis=1) & np.isfinite(C).all(axis=1)
    keep = feasible & finite

    if augmented:
        Y1 = np.concatenate(
            [Y - y_anchor, np.maximum(C, 0.0) - np.maximum(c_anchor, 0.0)], axis=1
        )
    else:
        Y1 = Y - y_anchor
    a = component_count
    losses = loss_many(kind, Y1[:, :a] if a is not None else Y1, _project(u, a))
    loss0 = loss(kind, np.zeros(a if a is not None else u.shape[0]), _project(u, a))

    if not keep.any():
        return AttackOutcome((), (), 0, (), ())
    masked = np.where(keep, losses, np.inf)
    j = int(np.argmin(masked))  # first minimizer in lexicographic order
    if not masked[j] < loss0:
        return AttackOutcome((), (), 0, (), ())
    d = D[j].copy()
    return AttackOutcome((d,), (SUCCESSFUL,), 0, (float(loss0),), (float(masked[j]),))


def attack_operator(problem: ProblemSpec, x, r: float,
                    config: AttackConfig) -> AttackOutcome:
    """Run the configured solver at (x, r) and classify every direction.

    Classification re-evaluates the augmented differential at each returned
    direction; feasibility in exact mode is read off the rectified block
    (zero iff all constraints hold).
    """
    x = np.asarray(x, dtype=np.float64)
    a = config.component_count
    u = target_direction(problem, x, a)
    kind = config.loss
    loss0 = loss(kind, np.zeros(a if a is not None else u.shape[0]), _project(u, a))

    if r == 0.0:
        d = np.zeros(problem.n)
        return AttackOutcome((d,), (FAILED,), 0, (loss0,), (loss0,))

    if config.solver == "oracle":
        return oracle_attack(problem, x, r, u, grid=config.oracle_grid, kind=kind,
                             component_count=a)

    aug = AugmentedMap(problem.phi, problem.constraint)
    diff = DifferentialMap(aug, x)
    smap = ScaledDifferentialMap(diff, r)
    if config.solver == "fgsm":
        delta, gevals = fgsm_attack(smap, kind, u, a)
    else:
        delta, gevals = pgd_attack(smap, kind, u, config.pgd_steps, config.step_scale, a)
    if delta is None:
        return AttackOutcome((), (), gevals, (), ())

    d = 2.0 * r * delta
    with np.errstate(all="ignore"):
        aug_at_d = aug.eval(x + d)
    y1 = aug_at_d - diff.at_anchor
    with np.errstate(all="ignore"):
        la = loss(kind, _project(y1, a), _project(u, a)) if np.isfinite(y1).all() else np.inf
    m = problem.m
    feasible_point = bool((aug_at_d[m:] == 0.0).all())  # rectified block vanishes iff c <= 0
    if not np.isfinite(la) or not np.any(d):
        cls = FAILED
    elif problem.mode == EXACT and not feasible_point:
        cls = FAILED
    elif la < loss0:
        cls = SUCCESSFUL
    else:
        cls = FEASIBLE_ONLY
    return AttackOutcome((d,), (cls,), gevals, (loss0,), (float(la),))


def calibrate_radius(problem: ProblemSpec, x, r_init: float, config: AttackConfig,
                     max_halvings: int = 20):
    """Halve the radius until the attack outcome contains an ascent direction.

    Returns (radius, outcome) for the first radius in r_init, r_init/2, ...
    whose outcome has a direction d with x+d feasible and strictly better,
    or None after max_halvings halvings.
    """
    x = np.asarray(x, dtype=np.float64)
    base = evaluate(problem, None, x)
    r = float(r_init)
    for _ in range(max_halvings + 1):
        outcome = attack_operator(problem, x, r, config)
        for d in outcome.directions:
            rec = evaluate(problem, None, x + d)
            if rec.feasible and rec.fval > base.fval:
                return r, outcome
        r *= 0.5
    return None
