"""Loss values, gradients and the alignment property that makes successful
attacks ascent steps."""

import json
import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from attacksearch.losses import (CE_WSLP_WITNESS, LossKind,
                                 find_wslp_counterexample, loss, loss_grad,
                                 loss_many, wslp_check)

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")


def test_se_loss_values():
    y1 = np.array([1.0, 2.0])
    y2 = np.array([0.0, -1.0])
    assert loss(LossKind.SE, y1, y2) == 10.0
    assert loss(LossKind.SE, y2, y2) == 0.0
    np.testing.assert_array_equal(loss_grad(LossKind.SE, y1, y2), [2.0, 6.0])


def test_ce_loss_uniform_reference():
    # softmax(0) is uniform, so the zero point scores log(dim) for any target
    for dim in (2, 3, 5):
        rng = np.random.default_rng(dim)
        y2 = rng.uniform(-5, 5, dim)
        assert abs(loss(LossKind.CE, np.zeros(dim), y2) - np.log(dim)) < 1e-12


def test_ce_loss_shift_invariance():
    # the first argument only enters through softmax
    rng = np.random.default_rng(1)
    y1 = rng.normal(size=4)
    y2 = rng.normal(size=4)
    shifted = y1 + 3.7
    assert abs(loss(LossKind.CE, y1, y2) - loss(LossKind.CE, shifted, y2)) < 1e-12


@pytest.mark.parametrize("kind", [LossKind.SE, LossKind.CE])
def test_loss_grad_matches_finite_differences(kind):
    rng = np.random.default_rng(2)
    for _ in range(10):
        y1 = rng.uniform(-3, 3, 4)
        y2 = rng.uniform(-3, 3, 4)
        g = loss_grad(kind, y1, y2)
        fd = np.empty(4)
        h = 1e-6
        for i in range(4):
            e = np.zeros(4)
            e[i] = h
            fd[i] = (loss(kind, y1 + e, y2) - loss(kind, y1 - e, y2)) / (2 * h)
        np.testing.assert_allclose(fd, g, rtol=1e-5, atol=1e-8)


@pytest.mark.parametrize("kind", [LossKind.SE, LossKind.CE])
def test_loss_many_matches_scalar_loss(kind):
    rng = np.random.default_rng(3)
    Y1 = rng.uniform(-4, 4, size=(32, 3))
    y2 = rng.uniform(-4, 4, size=3)
    many = loss_many(kind, Y1, y2)
    each = np.array([loss(kind, row, y2) for row in Y1])
    np.testing.assert_allclose(many, each, rtol=1e-13)


def test_loss_rejects_mismatched_shapes():
    with pytest.raises(ValueError):
        loss(LossKind.SE, np.zeros(2), np.zeros(3))
    with pytest.raises(ValueError):
        loss_grad(LossKind.CE, np.zeros((2, 2)), np.zeros((2, 2)))


# -------------------------------------------------------------- alignment

@settings(max_examples=300, derandomize=True)
@given(st.lists(st.floats(-50, 50), min_size=2, max_size=6),
       st.lists(st.floats(-50, 50), min_size=2, max_size=6))
def test_se_alignment_property(a, b):
    # improving on the zero point forces positive alignment with the target
    dim = min(len(a), len(b))
    y1 = np.array(a[:dim])
    y2 = np.array(b[:dim])
    assert wslp_check(LossKind.SE, y1, y2)


def test_se_alignment_bulk():
    # vectorized restatement: ||y2 - y1||^2 < ||y2||^2 implies <y1, y2> > 0,
    # which is algebraically 2 <y1,y2> > ||y1||^2 >= 0
    rng = np.random.default_rng(4)
    for dim in (2, 3, 5):
        Y = rng.uniform(-5, 5, size=(100_000, 2, dim))
        Y1, Y2 = Y[:, 0], Y[:, 1]
        improved = np.einsum("ij,ij->i", Y2 - Y1, Y2 - Y1) < np.einsum("ij,ij->i", Y2, Y2)
        aligned = np.einsum("ij,ij->i", Y1, Y2) > 0.0
        assert not (improved & ~aligned).any()


def test_ce_witness_violates_alignment():
    y1, y2 = CE_WSLP_WITNESS
    assert loss(LossKind.CE, y1, y2) < loss(LossKind.CE, np.zeros_like(y1), y2)
    assert float(y1 @ y2) <= 0.0
    assert not wslp_check(LossKind.CE, y1, y2)
    # squared error has no violation at the same pair
    assert wslp_check(LossKind.SE, y1, y2)


def test_ce_counterexample_search_reproduces_fixture():
    with open(os.path.join(FIXTURES, "ce_wslp_counterexample.json")) as fh:
        frozen = json.load(fh)
    for dim_text, pair in frozen["pairs"].items():
        dim = int(dim_text)
        y1 = np.array([float(v) for v in pair["y1"]])
        y2 = np.array([float(v) for v in pair["y2"]])
        # the stored pair still violates
        assert not wslp_check(LossKind.CE, y1, y2)
        # the search finds exactly the stored pair under the stored seed
        found = find_wslp_counterexample(LossKind.CE, dim, seed=frozen["seed"],
                                         max_tries=frozen["max_tries"])
        assert found is not None
        np.testing.assert_array_equal(found[0], y1)
        np.testing.assert_array_equal(found[1], y2)


def test_se_counterexample_search_comes_up_empty():
    assert find_wslp_counterexample(LossKind.SE, 3, seed=0, max_tries=50_000) is None
