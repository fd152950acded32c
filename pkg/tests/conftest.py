"""Shared test helpers: finite-difference oracles and probe construction.

The finite-difference Jacobian here is the independent reference every
derivative in the package is checked against; it only uses map evaluation,
never the map's own pullback.
"""

import numpy as np

FD_STEP = 1e-6


def fd_jacobian(m, x, h=FD_STEP):
    """Central-difference Jacobian of a DifferentiableMap at x."""
    x = np.asarray(x, dtype=np.float64)
    J = np.empty((m.out_dim, m.in_dim))
    for i in range(m.in_dim):
        e = np.zeros(m.in_dim)
        e[i] = h
        J[:, i] = (np.asarray(m.eval(x + e)) - np.asarray(m.eval(x - e))) / (2 * h)
    return J


def vjp_jacobian(m, x):
    """Jacobian assembled from pullbacks of the output basis covectors."""
    x = np.asarray(x, dtype=np.float64)
    rows = []
    for j in range(m.out_dim):
        e = np.zeros(m.out_dim)
        e[j] = 1.0
        rows.append(np.asarray(m.vjp(x, e)))
    return np.stack(rows)


def relu_preactivation_margin(net, x):
    """Smallest |pre-activation| over all relu units of an MlpNetwork at x
    (inf when the net has no relu layer). Small margins mean the point sits
    near a kink where finite differences are unreliable."""
    h = np.asarray(x, dtype=np.float64)
    margin = np.inf
    for W, b, act in net.layers:
        z = W @ h + b
        if act == "relu":
            if z.size:
                margin = min(margin, float(np.abs(z).min()))
            h = np.maximum(z, 0.0)
        elif act == "softmax":
            e = np.exp(z - z.max())
            h = e / e.sum()
        else:
            h = z
    return margin


def probe_away_from_kinks(rng, net, margin=1e-4, scale=1.0, tries=200):
    """Random probe whose relu pre-activations all clear the margin."""
    for _ in range(tries):
        x = rng.normal(0.0, scale, size=net.in_dim)
        if relu_preactivation_margin(net, x) > margin:
            return x
    raise AssertionError("could not find a probe away from relu kinks")


def relative_error(approx, exact):
    approx = np.asarray(approx, dtype=np.float64)
    exact = np.asarray(exact, dtype=np.float64)
    return float(np.abs(approx - exact).max() / max(1.0, np.abs(exact).max()))
