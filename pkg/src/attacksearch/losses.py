"""Attack losses and the weak scalar-product property (WSLP).

A loss L(y1, y2) steers an attack toward the target y2. A loss has the WSLP
when every strict improvement over the zero point certifies positive
alignment with the target:

    L(y1, y2) < L(0, y2)  implies  <y1, y2> > 0.

Squared error has it (improvement forces <y1,y2> > ||y1||^2 / 2 > 0); cross
entropy does not, because it is shift-invariant in its first argument, and
``CE_WSLP_WITNESS`` below pins a concrete violation. The property is what
turns successful attacks into ascent directions at small radii.
"""

from __future__ import annotations

import enum
from typing import Optional

import numpy as np


class LossKind(enum.Enum):
    SE = "se"
    CE = "ce"


# CE violates the WSLP: shifting y1 by a multiple of the all-ones vector
# changes <y1, y2> but not the loss. Both pairs verified in the test suite.
CE_WSLP_WITNESS = (np.array([-1.0, -2.0]), np.array([1.0, 0.0]))


def _check_pair(y1, y2):
    y1 = np.asarray(y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if y1.shape != y2.shape or y1.ndim != 1:
        raise ValueError(f"loss arguments must be equal-length vectors, got {y1.shape} and {y2.shape}")
    return y1, y2


def _log_softmax(y):
    shifted = y - y.max(axis=-1, keepdims=True)
    return shifted - np.log(np.exp(shifted).sum(axis=-1, keepdims=True))


def _softmax(y):
    e = np.exp(y - y.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def loss(kind: LossKind, y1, y2) -> float:
    y1, y2 = _check_pair(y1, y2)
    if kind is LossKind.SE:
        d = y2 - y1
        return float(d @ d)
    return float(-(_log_softmax(y1) @ _softmax(y2)))


def loss_grad(kind: LossKind, y1, y2) -> np.ndarray:
    """Gradient of the loss in its first argument."""
    y1, y2 = _check_pair(y1, y2)
    if kind is LossKind.SE:
        return 2.0 * (y1 - y2)
    return _softmax(y1) - _softmax(y2)


def loss_many(kind: LossKind, Y1, y2) -> np.ndarray:
    """Loss of each row of Y1 against a fixed target (vectorized)."""
    Y1 = np.asarray(Y1, dtype=np.float64)
    y2 = np.asarray(y2, dtype=np.float64)
    if kind is LossKind.SE:
        D = y2 - Y1
        return np.einsum("ij,ij->i", D, D)
    return -(_log_softmax(Y1) @ _softmax(y2))


def wslp_check(kind: LossKind, y1, y2) -> bool:
    """True unless (y1, y2) witnesses a WSLP violation for this loss."""
    y1, y2 = _check_pair(y1, y2)
    if not loss(kind, y1, y2) < loss(kind, np.zeros_like(y1), y2):
        return True
    return float(y1 @ y2) > 0.0


def find_wslp_counterexample(kind: LossKind, dim: int, seed: int,
                             max_tries: int = 100_000) -> Optional[tuple]:
    """Random search for a violating pair in [-5, 5]^dim x [-5, 5]^dim.

    Returns the first violation in draw order, or None after max_tries
    samples. Deterministic under the seed.
    """
    rng = np.random.default_rng(seed)
    done = 0
    while done < max_tries:
        chunk = min(4096, max_tries - done)
        pairs = rng.uniform(-5.0, 5.0, size=(chunk, 2, dim))
        Y1, Y2 = pairs[:, 0, :], pairs[:, 1, :]
        if kind is LossKind.SE:
            improved = np.einsum("ij,ij->i", Y2 - Y1, Y2 - Y1) < np.einsum("ij,ij->i", Y2, Y2)
        else:
            # L_CE(0, y2) = log(dim) for any y2 (softmax(0) is uniform)
            cur = -np.einsum("ij,ij->i", _log_softmax(Y1), _softmax(Y2))
            improved = cur < np.log(dim)
        aligned = np.einsum("ij,ij->i", Y1, Y2) > 0.0
        bad = improved & ~aligned
        if bad.any():
            j = int(np.argmax(bad))
            return Y1[j].copy(), Y2[j].copy()
        done += chunk
    return None
