"""Reference numpy implementation of the feedforward kernels.

The compiled extension (``_mlpcore``) exposes the same four entry points;
``attacksearch._kernels`` picks whichever is importable. Both backends take
weights as a list of (out, in) C-contiguous float64 matrices, biases as
(out,) vectors and activations as a list of integer codes.
"""

from __future__ import annotations

import numpy as np

ACT_ID = 0
ACT_RELU = 1
ACT_SOFTMAX = 2


def _softmax(z):
    # max subtraction keeps exp() in range for any finite input
    e = np.exp(z - z.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def mlp_forward(weights, biases, acts, x):
    h = x
    for W, b, a in zip(weights, biases, acts):
        z = W @ h + b
        if a == ACT_RELU:
            z = np.maximum(z, 0.0)
        elif a == ACT_SOFTMAX:
            z = _softmax(z)
        h = z
    return h


def mlp_forward_many(weights, biases, acts, X):
    H = X
    for W, b, a in zip(weights, biases, acts):
        Z = H @ W.T + b
        if a == ACT_RELU:
            Z = np.maximum(Z, 0.0)
        elif a == ACT_SOFTMAX:
            Z = _softmax(Z)
        H = Z
    return H


def mlp_vjp(weights, biases, acts, x, u):
    """Pullback u through the network at x (returns J(x)^T u)."""
    h = x
    saved = []
    for W, b, a in zip(weights, biases, acts):
        z = W @ h + b
        if a == ACT_RELU:
            saved.append(z > 0.0)  # subgradient 0 at the kink
            h = np.maximum(z, 0.0)
        elif a == ACT_SOFTMAX:
            s = _softmax(z)
            saved.append(s)
            h = s
        else:
            saved.append(None)
            h = z
    g = u
    for W, a, cache in zip(reversed(weights), reversed(acts), reversed(saved)):
        if a == ACT_RELU:
            g = np.where(cache, g, 0.0)
        elif a == ACT_SOFTMAX:
            s = cache
            g = s * (g - np.dot(g, s))
        g = W.T @ g
    return g


def mlp_vjp_many(weights, biases, acts, X, U):
    H = X
    saved = []
    for W, b, a in zip(weights, biases, acts):
        Z = H @ W.T + b
        if a == ACT_RELU:
            saved.append(Z > 0.0)
            H = np.maximum(Z, 0.0)
        elif a == ACT_SOFTMAX:
            S = _softmax(Z)
            saved.append(S)
            H = S
        else:
            saved.append(None)
            H = Z
    G = U
    for W, a, cache in zip(reversed(weights), reversed(acts), reversed(saved)):
        if a == ACT_RELU:
            G = np.where(cache, G, 0.0)
        elif a == ACT_SOFTMAX:
            S = cache
            G = S * (G - (G * S).sum(axis=1, keepdims=True))
        G = G @ W
    return G
