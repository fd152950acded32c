"""Fast end-to-end sanity checks behind the ``selftest`` CLI subcommand.

Each check prints one line; the suite is meant to finish in a few seconds
and catch broken installs (kernel mismatch, serialization drift,
nondeterminism), not to replace the test suite.
"""

from __future__ import annotations

import os
import tempfile
import traceback

import numpy as np

from . import _kernels
from .attack import AttackConfig, attack_operator
from .dsm import DsmConfig, cdsm_run
from .hybrid import HybridConfig, hybrid_run
from .losses import CE_WSLP_WITNESS, LossKind, find_wslp_counterexample, wslp_check
from .netdiff import load_network, random_mlp, save_network
from .problems import build_quadratic_1d


def _check_kernel_gradients():
    rng = np.random.default_rng(7)
    net = random_mlp(rng, [3, 5, 4, 2])
    x = rng.normal(0.0, 1.0, 3)
    u = rng.normal(0.0, 1.0, 2)
    g = net.vjp(x, u)
    h = 1e-6
    fd = np.empty(3)
    for i in range(3):
        e = np.zeros(3)
        e[i] = h
        fd[i] = u @ (net.eval(x + e) - net.eval(x - e)) / (2 * h)
    err = np.abs(fd - g).max() / max(1.0, np.abs(g).max())
    assert err < 1e-6, f"pullback vs finite differences: rel err {err:.3e}"
    return f"backend={_kernels.BACKEND}, rel err {err:.1e}"


def _check_one_step_solvers_agree():
    problem = build_quadratic_1d()
    one_step = attack_operator(problem, np.array([0.7]), 0.25,
                               AttackConfig(solver="pgd", pgd_steps=1,
                                            pgd_step_scale=1.0))
    sign_step = attack_operator(problem, np.array([0.7]), 0.25,
                                AttackConfig(solver="fgsm"))
    assert one_step.directions and sign_step.directions
    assert (one_step.directions[0] == sign_step.directions[0]).all(), \
        "single projected step must equal the sign step bitwise"
    return "pgd(1 step, scale 1) == fgsm"


def _check_loss_alignment():
    rng = np.random.default_rng(3)
    for _ in range(2000):
        y1 = rng.uniform(-5.0, 5.0, 3)
        y2 = rng.uniform(-5.0, 5.0, 3)
        assert wslp_check(LossKind.SE, y1, y2), \
            f"squared-error alignment violated at {y1}, {y2}"
    w1, w2 = CE_WSLP_WITNESS
    assert not wslp_check(LossKind.CE, w1, w2), \
        "cross-entropy witness unexpectedly aligned"
    found = find_wslp_counterexample(LossKind.CE, 2, seed=0, max_tries=20000)
    assert found is not None, "no cross-entropy violation found"
    return "squared error aligned, cross entropy witness violates"


def _check_weight_roundtrip():
    rng = np.random.default_rng(11)
    net = random_mlp(rng, [4, 6, 3], activations=["relu", "softmax"])
    with tempfile.TemporaryDirectory() as tmp:
        path = os.path.join(tmp, "net.txt")
        save_network(net, path)
        back = load_network(path)
    for (w1, b1, a1), (w2, b2, a2) in zip(net.layers, back.layers):
        assert a1 == a2 and (w1 == w2).all() and (b1 == b2).all(), \
            "weights changed across save/load"
    return "save/load is bit-exact"


def _check_quadratic_convergence():
    problem = build_quadratic_1d()
    rec, trace = cdsm_run(problem, DsmConfig(rng_seed=0), budget=400)
    assert rec.fval >= -1e-3, f"search stalled at f={rec.fval:.3e}"
    rec2, _ = hybrid_run(problem, HybridConfig(dsm=DsmConfig(rng_seed=0)), budget=400)
    assert rec2.fval >= -1e-3, f"hybrid stalled at f={rec2.fval:.3e}"
    return f"search f={rec.fval:.2e}, hybrid f={rec2.fval:.2e}"


def _check_rerun_determinism():
    problem = build_quadratic_1d()
    traces = []
    for _ in range(2):
        _, trace = hybrid_run(problem, HybridConfig(dsm=DsmConfig(rng_seed=5)),
                              budget=200)
        traces.append(trace.to_json())
    assert traces[0] == traces[1], "identical runs produced different traces"
    return "identical reruns match byte for byte"


CHECKS = (
    ("kernel gradients", _check_kernel_gradients),
    ("one-step solver agreement", _check_one_step_solvers_agree),
    ("loss alignment", _check_loss_alignment),
    ("weight file round trip", _check_weight_roundtrip),
    ("quadratic convergence", _check_quadratic_convergence),
    ("rerun determinism", _check_rerun_determinism),
)


def run_selftest(stream=None) -> bool:
    """Run every check; prints one line each, returns overall success."""
    import sys

    stream = stream if stream is not None else sys.stdout
    ok = True
    for name, fn in CHECKS:
        try:
            detail = fn()
        except Exception as exc:  # report and keep going
            ok = False
            print(f"FAIL {name}: {exc}", file=stream)
            if not isinstance(exc, AssertionError):
                traceback.print_exc(file=stream)
        else:
            print(f"ok   {name} ({detail})", file=stream)
    return ok
