"""Release gate: the eight acceptance criteria, one visible line each.

Run with ``pytest tests/test_acceptance.py -s`` to see every line; each test
prints its verdict before asserting so failures still show the measurement.
Criterion 7 is a soft benchmark: its line is reported but never asserted.
"""

import json
import os
import time

import numpy as np
import pytest

from attacksearch.attack import AttackConfig, attack_operator, calibrate_radius
from attacksearch.cli import main as cli_main
from attacksearch.core import TrialHistory, evaluate
from attacksearch.dsm import DsmConfig, cdsm_run
from attacksearch.experiments import _median, evals_to_threshold, run_solver
from attacksearch.hybrid import HybridConfig, hybrid_run
from attacksearch.losses import LossKind, find_wslp_counterexample, wslp_check
from attacksearch.netdiff import random_mlp
from attacksearch.problems import (CATALOG, build_problem, build_random_box_mlp,
                                   reactor_certified_optimum)
from attacksearch.runtrace import (ATTACK, ATTACK_SKIP, LINE, SIMPLE,
                                   SUFFICIENT, check_trace_invariants)

from conftest import fd_jacobian, probe_away_from_kinks, relative_error, vjp_jacobian

FIXTURE_DIR = os.path.join(os.path.dirname(__file__), "fixtures")


def _verdict(n: int, ok: bool, detail: str) -> None:
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")


def test_criterion_1_vjp_matches_finite_differences():
    t0 = time.perf_counter()
    rng = np.random.default_rng(11)
    worst = 0.0
    for _ in range(100):
        depth = int(rng.integers(1, 4))  # 1..3 layers
        dims = [int(rng.integers(1, 9)) for _ in range(depth + 1)]
        net = random_mlp(rng, dims)
        x = probe_away_from_kinks(rng, net)
        err = relative_error(vjp_jacobian(net, x), fd_jacobian(net, x, 1e-6))
        worst = max(worst, err)
    elapsed = time.perf_counter() - t0
    ok = worst < 1e-6 and elapsed < 5.0
    _verdict(1, ok, f"100 nets, max rel err {worst:.3e} (< 1e-6), {elapsed:.2f}s (< 5s)")
    assert ok


def test_criterion_2_loss_suitability():
    t0 = time.perf_counter()
    violations = 0
    for dim in (2, 3, 5):
        rng = np.random.default_rng(dim)
        Y1 = rng.normal(0.0, 3.0, size=(100_000, dim))
        Y2 = rng.normal(0.0, 3.0, size=(100_000, dim))
        l_pert = np.einsum("ij,ij->i", Y1 - Y2, Y1 - Y2)
        l_zero = np.einsum("ij,ij->i", Y2, Y2)
        inner = np.einsum("ij,ij->i", Y1, Y2)
        violations += int(np.count_nonzero((l_pert < l_zero) & (inner <= 0.0)))
    found = find_wslp_counterexample(LossKind.CE, 3, seed=0)
    with open(os.path.join(FIXTURE_DIR, "ce_wslp_counterexample.json")) as fh:
        stored = json.load(fh)
    fixture_ok = True
    for dim, pair in stored["pairs"].items():
        y1 = np.array([float(v) for v in pair["y1"]])
        y2 = np.array([float(v) for v in pair["y2"]])
        fixture_ok &= not wslp_check(LossKind.CE, y1, y2)
    elapsed = time.perf_counter() - t0
    ok = (violations == 0 and found is not None and fixture_ok and elapsed < 10.0)
    _verdict(2, ok, f"3x1e5 pairs, {violations} SE violations (= 0), "
                    f"CE counterexample {'found+stored' if found is not None and fixture_ok else 'MISSING'}, "
                    f"{elapsed:.2f}s (< 10s)")
    assert ok


def test_criterion_3_oracle_attacks_are_ascent():
    t0 = time.perf_counter()
    config = AttackConfig(solver="oracle", loss=LossKind.SE, oracle_grid=41)
    bad = 0
    calibrated = 0
    checked = 0
    for seed in range(50):
        problem = build_random_box_mlp(seed, n=2, m=2)
        base = evaluate(problem, None, problem.x0)
        got = calibrate_radius(problem, problem.x0, 1.0, config)
        if got is None:
            continue
        calibrated += 1
        _, outcome = got
        for d, cls in zip(outcome.directions, outcome.classifications):
            if cls != "successful":
                continue
            checked += 1
            rec = evaluate(problem, None, problem.x0 + d)
            if not (rec.feasible and rec.fval > base.fval):
                bad += 1
    elapsed = time.perf_counter() - t0
    ok = bad == 0 and calibrated == 50 and checked >= 50 and elapsed < 60.0
    _verdict(3, ok, f"50 problems, {calibrated} calibrated, {checked} successful "
                    f"attacks, {bad} violations (= 0), {elapsed:.2f}s (< 60s)")
    assert ok


def test_criterion_4_invariants_on_every_recorded_run():
    traces = []
    for name in ("quad1d", "target_recovery", "active_subspace"):
        entry = CATALOG[name]
        for method in ("atk", "rls", "cdsm", "hyb"):
            for seed in range(3):
                problem = build_problem(name, seed)
                _, trace, _ = run_solver(problem, method, seed, budget=400,
                                         attack_components=entry.attack_components)
                traces.append(trace)
    bad = 0
    for trace in traces:
        check_trace_invariants(trace, tau=1e-3, eps=1e-10)
        f_prev = trace.f0
        radii_atk = [it.r_atk for it in trace.iterations] + [trace.final_r_atk]
        radii_dsm = [it.r_dsm for it in trace.iterations] + [trace.final_r_dsm]
        for i, it in enumerate(trace.iterations):
            if it.incumbent_f < f_prev:
                bad += 1
            f_prev = it.incumbent_f
            if trace.method in ("cdsm", "hyb"):
                expect = (radii_dsm[i] if it.attack_outcome == SUFFICIENT
                          else 2.0 * radii_dsm[i]
                          if it.winning_step in ("covering", "search", "poll")
                          else 0.5 * radii_dsm[i])
                bad += radii_dsm[i + 1] != expect
            if trace.method == "hyb":
                up = it.attack_outcome in (SUFFICIENT, SIMPLE)
                bad += radii_atk[i + 1] != (2.0 if up else 0.5) * radii_atk[i]
            if trace.method == "atk":
                factor = 11.0 / 10.0 if it.winning_step == ATTACK else 2.0 / 3.0
                bad += radii_atk[i + 1] != factor * radii_atk[i]
            if trace.method == "rls":
                r = radii_dsm[i]
                allowed = ((r * (13.0 / 10.0), r, r * (10.0 / 13.0))
                           if it.winning_step == LINE else (r * (2.0 / 3.0),))
                bad += radii_dsm[i + 1] not in allowed
            if it.attack_outcome == SUFFICIENT:
                bad += it.winning_step != ATTACK_SKIP
        live = [r for r in (trace.final_r_atk, trace.final_r_dsm) if r is not None]
        if trace.stop_reason == "radius":
            bad += not max(live) < 1e-5
        elif trace.stop_reason == "budget":
            bad += trace.eval_count < trace.budget
        else:
            bad += 1
    ok = bad == 0 and len(traces) == 36
    _verdict(4, ok, f"{len(traces)} runs across 4 methods, {bad} violations (= 0)")
    assert ok


def test_criterion_5_certified_convergence():
    t0 = time.perf_counter()
    details = []
    ok = True
    for name in ("quad1d", "reactor"):
        hits = {"cdsm": 0, "hyb": 0}
        for seed in range(10):
            problem = build_problem(name, seed)
            opt = (0.0 if name == "quad1d"
                   else reactor_certified_optimum(seed)[0])
            for method in hits:
                _, trace, _ = run_solver(problem, method, seed, budget=5000)
                if opt - trace.final_f <= 1e-3:
                    hits[method] += 1
        for method, n in hits.items():
            details.append(f"{name}/{method} {n}/10")
            ok &= n >= 9
    elapsed = time.perf_counter() - t0
    ok &= elapsed < 120.0
    _verdict(5, ok, f"within 1e-3 of certified optimum: {', '.join(details)} "
                    f"(>= 9/10 each), {elapsed:.1f}s (< 120s)")
    assert ok


def test_criterion_6_single_step_pgd_is_fgsm():
    fgsm_cfg = AttackConfig(solver="fgsm")
    pgd1_cfg = AttackConfig(solver="pgd", pgd_steps=1, pgd_step_scale=1.0)
    mismatches = 0
    for seed in range(100):
        problem = build_random_box_mlp(seed % 25, n=2, m=2)
        rng = np.random.default_rng(10_000 + seed)
        x = rng.uniform(-1.5, 1.5, size=problem.n)
        r = float(10.0 ** rng.uniform(-2.0, 0.5))
        a = attack_operator(problem, x, r, fgsm_cfg)
        b = attack_operator(problem, x, r, pgd1_cfg)
        same = (len(a.directions) == len(b.directions)
                and all(np.array_equal(da, db)
                        for da, db in zip(a.directions, b.directions))
                and a.classifications == b.classifications
                and a.loss_before == b.loss_before
                and a.loss_after == b.loss_after
                and a.gradient_evals == 1 and b.gradient_evals == 1)
        mismatches += not same
        # the multi-step budget accounting stays exact as well
        steps = int(rng.integers(2, 12))
        c = attack_operator(problem, x, r, AttackConfig(solver="pgd", pgd_steps=steps))
        mismatches += c.gradient_evals != steps
    ok = mismatches == 0
    _verdict(6, ok, f"100 instances bit-exact, gradient evals 1 vs pgd_steps, "
                    f"{mismatches} mismatches (= 0)")
    assert ok


def test_criterion_7_hybrid_vs_search_soft_benchmark():
    # reported, non-blocking: hybrid should reach tolerance at least as fast
    opt, tol, _ = CATALOG["target_recovery"].optimum_for(0)
    medians = {}
    for method in ("cdsm", "hyb"):
        hits = []
        for seed in range(10):
            problem = build_problem("target_recovery", seed)
            _, _, history = run_solver(problem, method, seed, budget=5000)
            hit = evals_to_threshold(history.best_feasible_curve(), opt - tol)
            hits.append(np.inf if hit is None else float(hit))
        medians[method] = _median(hits)
    ok = medians["hyb"] <= medians["cdsm"]
    _verdict(7, ok, f"SOFT (non-blocking): median evals to tolerance "
                    f"hyb {medians['hyb']:.0f} vs cdsm {medians['cdsm']:.0f}")
    # no assert: the line above is the deliverable


def test_criterion_8_run_command_is_deterministic(tmp_path, capsys):
    pairs = [("quad1d", "hyb", "3", "400"), ("target_recovery", "atk", "1", "300")]
    identical = True
    for problem, method, seed, budget in pairs:
        dirs = [tmp_path / f"{problem}_{method}_{i}" for i in (0, 1)]
        for d in dirs:
            code = cli_main(["run", "--problem", problem, "--method", method,
                             "--seed", seed, "--budget", budget, "--out", str(d)])
            assert code == 0
        names = sorted(p.name for p in dirs[0].iterdir())
        identical &= names == sorted(p.name for p in dirs[1].iterdir())
        for name in names:
            identical &= (dirs[0] / name).read_bytes() == (dirs[1] / name).read_bytes()
    capsys.readouterr()
    with capsys.disabled():
        _verdict(8, identical, f"{len(pairs)} run commands repeated, "
                               f"CSV/JSON byte-identical: {identical}")
    assert identical
