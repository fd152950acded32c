"""Network engine and the map algebra the solvers build around it.

Everything upstream touches a network only through the ``DifferentiableMap``
contract: evaluation plus vector-Jacobian products. That is exactly what a
backpropagation framework exposes for an opaque model, so the solvers never
assume access to weights. The concrete engine here is a plain feedforward
stack (affine layers with id / relu / softmax activations), which is enough
to express every catalog problem while staying fully deterministic.
"""

from __future__ import annotations

import io
from typing import Callable, Sequence, TextIO

import numpy as np

from . import _kernels

ACTIVATIONS = ("id", "relu", "softmax")
_ACT_CODES = {
    "id": _kernels.ACT_ID,
    "relu": _kernels.ACT_RELU,
    "softmax": _kernels.ACT_SOFTMAX,
}
WEIGHT_FORMAT_NAME = "mlpnet"
WEIGHT_FORMAT_VERSION = 1


def _as_vector(x, dim: int, what: str) -> np.ndarray:
    v = np.ascontiguousarray(x, dtype=np.float64)
    if v.shape != (dim,):
        raise ValueError(f"{what}: expected shape ({dim},), got {v.shape}")
    return v


class DifferentiableMap:
    """A map R^in_dim -> R^out_dim exposing eval() and vjp().

    ``vjp(x, u)`` returns J(x)^T u, the pullback of the output covector u.
    Batched variants have loop defaults; concrete maps override them when a
    vectorized path exists.
    """

    in_dim: int
    out_dim: int

    def eval(self, x) -> np.ndarray:
        raise NotImplementedError

    def vjp(self, x, u) -> np.ndarray:
        raise NotImplementedError

    def eval_many(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return np.stack([self.eval(row) for row in X])

    def vjp_many(self, X, U) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        U = np.asarray(U, dtype=np.float64)
        return np.stack([self.vjp(x, u) for x, u in zip(X, U)])


class CallableMap(DifferentiableMap):
    """Wrap explicit callables (analytic constraints and similar plumbing)."""

    def __init__(self, in_dim: int, out_dim: int,
                 fn: Callable[[np.ndarray], np.ndarray],
                 vjp_fn: Callable[[np.ndarray, np.ndarray], np.ndarray]):
        self.in_dim = int(in_dim)
        self.out_dim = int(out_dim)
        self._fn = fn
        self._vjp_fn = vjp_fn

    def eval(self, x):
        x = _as_vector(x, self.in_dim, "CallableMap input")
        return np.asarray(self._fn(x), dtype=np.float64).reshape(self.out_dim)

    def vjp(self, x, u):
        x = _as_vector(x, self.in_dim, "CallableMap input")
        u = _as_vector(u, self.out_dim, "CallableMap covector")
        return np.asarray(self._vjp_fn(x, u), dtype=np.float64).reshape(self.in_dim)


class MlpNetwork(DifferentiableMap):
    """Feedforward stack of affine layers, each followed by id/relu/softmax.

    Layers are (weight, bias, activation) triples with weight shaped
    (out, in). Construction validates the dimension chain and freezes
    float64 C-contiguous copies of all parameters.
    """

    def __init__(self, layers: Sequence[tuple]):
        if not layers:
            raise ValueError("MlpNetwork needs at least one layer")
        weights, biases, tags = [], [], []
        prev = None
        for i, (W, b, act) in enumerate(layers):
            W = np.ascontiguousarray(W, dtype=np.float64)
            b = np.ascontiguousarray(b, dtype=np.float64)
            if W.ndim != 2:
                raise ValueError(f"layer {i}: weight must be 2-d, got ndim={W.ndim}")
            out_d, in_d = W.shape
            if b.shape != (out_d,):
                raise ValueError(
                    f"layer {i}: bias shape {b.shape} does not match weight rows {out_d}"
                )
            if prev is not None and in_d != prev:
                raise ValueError(
                    f"layer {i}: input dim {in_d} does not chain with previous output {prev}"
                )
            if act not in _ACT_CODES:
                raise ValueError(f"layer {i}: unknown activation {act!r}")
            W.flags.writeable = False
            b.flags.writeable = False
            weights.append(W)
            biases.append(b)
            tags.append(act)
            prev = out_d
        self._weights = weights
        self._biases = biases
        self.activations = tuple(tags)
        self._acts = [_ACT_CODES[t] for t in tags]
        self.in_dim = weights[0].shape[1]
        self.out_dim = weights[-1].shape[0]

    @property
    def layers(self) -> tuple:
        return tuple(zip(self._weights, self._biases, self.activations))

    def eval(self, x):
        x = _as_vector(x, self.in_dim, "network input")
        return _kernels.mlp_forward(self._weights, self._biases, self._acts, x)

    def vjp(self, x, u):
        x = _as_vector(x, self.in_dim, "network input")
        u = _as_vector(u, self.out_dim, "network covector")
        return _kernels.mlp_vjp(self._weights, self._biases, self._acts, x, u)

    def eval_many(self, X):
        X = np.ascontiguousarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"batch shape {X.shape} does not match input dim {self.in_dim}")
        return _kernels.mlp_forward_many(self._weights, self._biases, self._acts, X)

    def vjp_many(self, X, U):
        X = np.ascontiguousarray(X, dtype=np.float64)
        U = np.ascontiguousarray(U, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != self.in_dim:
            raise ValueError(f"batch shape {X.shape} does not match input dim {self.in_dim}")
        if U.shape != (X.shape[0], self.out_dim):
            raise ValueError(f"covector batch shape {U.shape} does not match {X.shape[0]}x{self.out_dim}")
        return _kernels.mlp_vjp_many(self._weights, self._biases, self._acts, X, U)


def random_mlp(rng: np.random.Generator, dims: Sequence[int],
               activations: Sequence[str] | None = None, scale: float = 1.0) -> MlpNetwork:
    """Gaussian-initialized network; hidden layers relu, output id by default."""
    if len(dims) < 2:
        raise ValueError("need at least input and output dims")
    if activations is None:
        activations = ["relu"] * (len(dims) - 2) + ["id"]
    if len(activations) != len(dims) - 1:
        raise ValueError("one activation per layer required")
    layers = []
    for i in range(len(dims) - 1):
        fan_in = dims[i]
        W = rng.normal(0.0, scale / np.sqrt(fan_in), size=(dims[i + 1], dims[i]))
        b = rng.normal(0.0, 0.1 * scale, size=dims[i + 1])
        layers.append((W, b, activations[i]))
    return MlpNetwork(layers)


class DifferentialMap(DifferentiableMap):
    """Anchored difference d -> base(anchor + d) - base(anchor).

    The base image at the anchor is computed once, so eval(0) is exactly the
    zero vector and every evaluation costs one base evaluation.
    """

    def __init__(self, base: DifferentiableMap, anchor):
        self.base = base
        self.anchor = _as_vector(anchor, base.in_dim, "anchor")
        self.at_anchor = np.asarray(base.eval(self.anchor), dtype=np.float64)
        self.in_dim = base.in_dim
        self.out_dim = base.out_dim

    def eval(self, d):
        d = _as_vector(d, self.in_dim, "direction")
        return self.base.eval(self.anchor + d) - self.at_anchor

    def vjp(self, d, u):
        d = _as_vector(d, self.in_dim, "direction")
        return self.base.vjp(self.anchor + d, u)

    def eval_many(self, D):
        D = np.asarray(D, dtype=np.float64)
        return self.base.eval_many(self.anchor + D) - self.at_anchor


class AugmentedMap(DifferentiableMap):
    """Network output stacked with rectified constraint values.

    eval(x) = [phi(x), max(c(phi(x)), 0)]. Wherever the constraints hold the
    extra block is exactly zero, so the augmented map carries the same
    information as the plain network on the feasible set while exposing the
    violation to attack targets elsewhere.
    """

    def __init__(self, phi: DifferentiableMap, constraint: DifferentiableMap):
        if constraint.in_dim != phi.out_dim:
            raise ValueError("constraint must consume the network output")
        self.phi = phi
        self.constraint = constraint
        self.in_dim = phi.in_dim
        self.out_dim = phi.out_dim + constraint.out_dim

    def eval(self, x):
        y = self.phi.eval(x)
        z = np.maximum(self.constraint.eval(y), 0.0)
        return np.concatenate([y, z])

    def vjp(self, x, u):
        m = self.phi.out_dim
        y = self.phi.eval(x)
        c = self.constraint.eval(y)
        gz = np.where(c > 0.0, u[m:], 0.0)  # relu pullback, 0 on the kink
        gy = u[:m] + self.constraint.vjp(y, gz)
        return self.phi.vjp(x, gy)

    def eval_many(self, X):
        Y = self.phi.eval_many(X)
        Z = np.stack([np.maximum(self.constraint.eval(y), 0.0) for y in Y])
        return np.concatenate([Y, Z], axis=1)


class ScaledDifferentialMap(DifferentiableMap):
    """Differential map reparameterized so [0, 1]^n covers the radius-r box.

    eval(zeta) = diff(2 r (zeta - 1/2)); the box center maps to the zero
    direction, zeta in [0,1]^n sweeps the max-norm ball of radius r, and the
    chain rule contributes the factor 2r to every pullback.
    """

    def __init__(self, diff: DifferentialMap, radius: float):
        if radius < 0:
            raise ValueError("radius must be nonnegative")
        self.diff = diff
        self.radius = float(radius)
        self.in_dim = diff.in_dim
        self.out_dim = diff.out_dim

    def to_direction(self, zeta) -> np.ndarray:
        zeta = _as_vector(zeta, self.in_dim, "box coordinate")
        return 2.0 * self.radius * (zeta - 0.5)

    def eval(self, zeta):
        return self.diff.eval(self.to_direction(zeta))

    def vjp(self, zeta, u):
        return 2.0 * self.radius * self.diff.vjp(self.to_direction(zeta), u)


class _ConcatWithInput(DifferentiableMap):
    def __init__(self, psi: DifferentiableMap):
        self.psi = psi
        self.in_dim = psi.in_dim
        self.out_dim = psi.out_dim + psi.in_dim

    def eval(self, x):
        x = _as_vector(x, self.in_dim, "input")
        return np.concatenate([self.psi.eval(x), x])

    def vjp(self, x, u):
        x = _as_vector(x, self.in_dim, "input")
        u = _as_vector(u, self.out_dim, "covector")
        k = self.psi.out_dim
        return self.psi.vjp(x, u[:k]) + u[k:]

    def eval_many(self, X):
        X = np.asarray(X, dtype=np.float64)
        return np.concatenate([self.psi.eval_many(X), X], axis=1)


def concat_with_input(psi: DifferentiableMap) -> DifferentiableMap:
    """x -> [psi(x), x]: exposes the input block to output-space constraints."""
    return _ConcatWithInput(psi)


def _fmt(value: float) -> str:
    # repr() of a Python float is the shortest string that round-trips
    return repr(float(value))


def save_network(net: MlpNetwork, path_or_file) -> None:
    """Write a network as a self-describing text document.

    Header: format name + version, then the network's (in, out) dims and the
    layer count. Each layer contributes a ``in out activation`` line, one
    line per weight row (row-major), and one bias line. All floats use
    shortest round-trip decimal notation, so load(save(net)) is bit-exact.
    """
    lines = [
        f"{WEIGHT_FORMAT_NAME} {WEIGHT_FORMAT_VERSION}",
        f"{net.in_dim} {net.out_dim}",
        f"{len(net.layers)}",
    ]
    for W, b, act in net.layers:
        out_d, in_d = W.shape
        lines.append(f"{in_d} {out_d} {act}")
        for row in W:
            lines.append(" ".join(_fmt(v) for v in row))
        lines.append(" ".join(_fmt(v) for v in b))
    text = "\n".join(lines) + "\n"
    if hasattr(path_or_file, "write"):
        path_or_file.write(text)
    else:
        with open(path_or_file, "w") as fh:
            fh.write(text)


def load_network(path_or_file) -> MlpNetwork:
    """Inverse of save_network; malformed input raises ValueError naming the layer."""
    if hasattr(path_or_file, "read"):
        text = path_or_file.read()
    else:
        with open(path_or_file) as fh:
            text = fh.read()
    tokens = io.StringIO(text).read().split("\n")
    rows = [line.strip() for line in tokens if line.strip()]
    if not rows:
        raise ValueError("empty network file")
    head = rows[0].split()
    if len(head) != 2 or head[0] != WEIGHT_FORMAT_NAME:
        raise ValueError(f"bad header {rows[0]!r}")
    if int(head[1]) != WEIGHT_FORMAT_VERSION:
        raise ValueError(f"unsupported format version {head[1]}")
    try:
        n, m = (int(t) for t in rows[1].split())
        n_layers = int(rows[2])
    except (IndexError, ValueError) as exc:
        raise ValueError(f"bad dimension header: {exc}") from None
    pos = 3
    layers = []
    for li in range(n_layers):
        try:
            in_d, out_d, act = rows[pos].split()
            in_d, out_d = int(in_d), int(out_d)
        except (IndexError, ValueError):
            raise ValueError(f"layer {li}: malformed layer header") from None
        if act not in ACTIVATIONS:
            raise ValueError(f"layer {li}: unknown activation tag {act!r}")
        pos += 1
        W = np.empty((out_d, in_d))
        for r in range(out_d):
            try:
                vals = [float(t) for t in rows[pos].split()]
            except (IndexError, ValueError):
                raise ValueError(f"layer {li}: malformed weight row {r}") from None
            if len(vals) != in_d:
                raise ValueError(
                    f"layer {li}: weight row {r} has {len(vals)} entries, expected {in_d}"
                )
            W[r] = vals
            pos += 1
        try:
            bvals = [float(t) for t in rows[pos].split()]
        except (IndexError, ValueError):
            raise ValueError(f"layer {li}: malformed bias row") from None
        if len(bvals) != out_d:
            raise ValueError(f"layer {li}: bias has {len(bvals)} entries, expected {out_d}")
        pos += 1
        layers.append((W, np.array(bvals), act))
    if pos != len(rows):
        raise ValueError("trailing content after last layer")
    net = MlpNetwork(layers)
    if net.in_dim != n or net.out_dim != m:
        raise ValueError(
            f"header dims ({n}, {m}) do not match layers ({net.in_dim}, {net.out_dim})"
        )
    return net
