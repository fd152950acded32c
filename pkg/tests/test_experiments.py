"""Experiment drivers: artifact schemas, ordering, determinism."""

import csv
import math

import numpy as np
import pytest

from attacksearch.experiments import (EXPERIMENT1_COLUMNS,
                                      EXPERIMENT1_SUMMARY_COLUMNS,
                                      EXPERIMENT2_COLUMNS, EXPERIMENT3_COLUMNS,
                                      _median, _snapshot_counts, evals_to_threshold,
                                      format_cell, run_experiment_1,
                                      run_experiment_2, run_experiment_3)


def _read_csv(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


# ------------------------------------------------------------------- units

def test_format_cell_repr_rules():
    assert format_cell(True) == "1" and format_cell(False) == "0"
    assert format_cell(np.bool_(True)) == "1"
    assert format_cell(0.1) == "0.1"
    assert format_cell(float(np.float64(1.0) / 3.0)) == "0.3333333333333333"
    assert format_cell(np.int64(7)) == "7"
    assert format_cell(None) == ""
    assert format_cell("poll") == "poll"


def test_evals_to_threshold_is_first_crossing():
    curve = [-3.0, -1.0, -1.0, 0.5]
    assert evals_to_threshold(curve, -2.0) == 2
    assert evals_to_threshold(curve, -3.0) == 1
    assert evals_to_threshold(curve, 0.5) == 4
    assert evals_to_threshold(curve, 1.0) is None


def test_median_handles_unreached_runs():
    assert _median([3.0, 1.0, 2.0]) == 2.0
    assert _median([1.0, 2.0, 3.0, 4.0]) == 2.5
    assert _median([1.0, math.inf]) == math.inf
    assert _median([1.0, 2.0, math.inf]) == 2.0
    assert _median([math.inf, math.inf]) == math.inf


def test_snapshot_counts_are_quantile_crossings():
    curve = [0.0, 1.0, 1.0, 2.0, 4.0]
    # quantile levels 0, 1, 4 -> first crossings at evals 1, 2, 5
    assert _snapshot_counts(curve, 3) == [1, 2, 5]
    # flat curve collapses to a single snapshot
    assert _snapshot_counts([1.0, 1.0, 1.0], 4) == [1]
    assert len(_snapshot_counts(curve, 9)) <= 9


# ------------------------------------------------------------ experiment 1

@pytest.fixture(scope="module")
def exp1(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp1")
    summary = run_experiment_1(("quad1d", "active_subspace"), (0, 1), str(out),
                               budget=200)
    return out, summary


def test_experiment1_curchild_layout(exp1):
    out, _ = exp1
    tag = "quad1d-active_subspace"
    header, rows = _read_csv(out / f"experiment1_{tag}_curves.csv")
    assert header == list(EXPERIMENT1_COLUMNS)
    keys = [(r[0], r[1], int(r[2]), int(r[3])) for r in rows]
    assert keys == sorted(keys)
    # one contiguous 1..N curve per cell, best_f nondecreasing along it
    by_cell = {}
    for r in rows:
        by_cell.setdefault((r[0], r[1], r[2]), []).append((int(r[3]), float(r[4])))
    assert len(by_cell) == 2 * 4 * 2  # problems x methods x seeds
    for cell, pts in by_cell.items():
        counts = [c for c, _ in pts]
        assert counts == list(range(1, len(counts) + 1)), cell
        best = [b for _, b in pts]
        assert all(b2 >= b1 for b1, b2 in zip(best, best[1:])), cell


def test_experiment1_summary_artifacts(exp1):
    out, summary = exp1
    tag = "quad1d-active_subspace"
    header, rows = _read_csv(out / f"experiment1_{tag}_summary.csv")
    assert header == list(EXPERIMENT1_SUMMARY_COLUMNS)
    assert len(rows) == 2 * 4  # one row per (problem, method)
    for problem_name in ("quad1d", "active_subspace"):
        per = summary["per_problem"][problem_name]
        assert set(per["methods"]) == {"atk", "rls", "cdsm", "hyb"}
        assert "hybrid_median_evals_le_search" in per["soft_checks"]
    # quad1d is easy enough that every method reaches tolerance at budget 200
    quad = summary["per_problem"]["quad1d"]["methods"]
    assert quad["cdsm"]["median_evals_to_tolerance"] is not None


def test_experiment1_accepts_single_problem_string(tmp_path):
    summary = run_experiment_1("quad1d", (0,), str(tmp_path), methods=("cdsm",),
                               budget=60)
    assert (tmp_path / "experiment1_quad1d_curves.csv").exists()
    assert list(summary["per_problem"]) == ["quad1d"]
    assert "soft_checks" not in summary["per_problem"]["quad1d"]


def test_experiment1_reruns_byte_identical(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    run_experiment_1("quad1d", (0, 1), str(a), budget=120)
    run_experiment_1("quad1d", (0, 1), str(b), budget=120)
    for name in ("experiment1_quad1d_curves.csv",
                 "experiment1_quad1d_summary.csv",
                 "experiment1_quad1d_summary.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


# ------------------------------------------------------------ experiment 2

@pytest.fixture(scope="module")
def exp2(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp2")
    summary = run_experiment_2("target_recovery", (0, 1), str(out), budget=250)
    return out, summary


def test_experiment2_rows_cover_all_methods(exp2):
    out, summary = exp2
    header, rows = _read_csv(out / "experiment2_target_recovery_iterations.csv")
    assert header == list(EXPERIMENT2_COLUMNS)
    assert {r[1] for r in rows} == {"atk", "rls", "cdsm", "hyb"}
    keys = [(r[0], r[1], int(r[2]), int(r[3])) for r in rows]
    assert keys == sorted(keys)
    # step counts in the summary add up to the rows written per (method, seed)
    for method, per in summary["per_method"].items():
        for seed, stats in per["per_seed"].items():
            n_rows = sum(1 for r in rows if r[1] == method and int(r[2]) == seed)
            assert sum(stats["winning_step_counts"].values()) == n_rows


def test_experiment2_blank_fields_by_method(exp2):
    out, _ = exp2
    _, rows = _read_csv(out / "experiment2_target_recovery_iterations.csv")
    for r in rows:
        method, outcome, step, r_atk, r_dsm = r[1], r[4], r[5], r[6], r[7]
        if method == "cdsm" or method == "rls":
            assert outcome == "" and r_atk == ""
        if method == "atk":
            assert r_dsm == ""
        if method == "hyb":
            assert outcome != "" and r_atk != "" and r_dsm != ""
        if outcome == "sufficient":
            assert step == "attack_skip"


def test_experiment2_hybrid_records_skips(exp2):
    _, summary = exp2
    pooled = summary["per_method"]["hyb"]["pooled"]
    assert pooled["attack_outcome_counts"].get("sufficient", 0) >= 1
    assert pooled["winning_step_counts"].get("attack_skip", 0) == \
        pooled["attack_outcome_counts"].get("sufficient", 0)


# ------------------------------------------------------------ experiment 3

@pytest.fixture(scope="module")
def exp3(tmp_path_factory):
    out = tmp_path_factory.mktemp("exp3")
    summary = run_experiment_3("target_recovery", (0, 1), str(out),
                               radii=(1.0, 0.1), snapshot_count=4, budget=400)
    return out, summary


def test_experiment3_gradient_budgets_exact(exp3):
    out, summary = exp3
    header, rows = _read_csv(out / "experiment3_target_recovery_attacks.csv")
    assert header == list(EXPERIMENT3_COLUMNS)
    for r in rows:
        solver, gevals = r[5], int(r[9])
        assert gevals == (1 if solver == "fgsm" else 10)
    assert summary["per_solver"]["fgsm"]["mean_gradient_evals"] == 1.0
    assert summary["per_solver"]["pgd"]["mean_gradient_evals"] == 10.0


def test_experiment3_snapshot_structure(exp3):
    out, summary = exp3
    _, rows = _read_csv(out / "experiment3_target_recovery_attacks.csv")
    # no duplicate (seed, snapshot, radius, solver) cells
    cells = [(r[1], r[2], r[4], r[5]) for r in rows]
    assert len(cells) == len(set(cells))
    # snapshots ordered by nondecreasing incumbent objective within a seed
    for seed in {r[1] for r in rows}:
        f_base = [float(r[10]) for r in rows if r[1] == seed]
        assert all(b >= a for a, b in zip(f_base, f_base[1:]))
        snaps = [int(r[2]) for r in rows if r[1] == seed]
        assert snaps == sorted(snaps)
    assert "ascent_agreement_fraction" in summary["soft_checks"]
    frac = summary["soft_checks"]["ascent_agreement_fraction"]
    assert 0.0 <= frac <= 1.0
    assert summary["soft_checks"]["ascent_agreement_ge_70pct"] == (frac >= 0.7)


def test_experiment3_rejects_bad_design(tmp_path):
    with pytest.raises(ValueError, match="snapshot_count"):
        run_experiment_3("quad1d", (0,), str(tmp_path), snapshot_count=1)
    with pytest.raises(ValueError, match="radii"):
        run_experiment_3("quad1d", (0,), str(tmp_path), radii=())
