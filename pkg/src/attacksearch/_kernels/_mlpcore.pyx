# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled feedforward kernels.

Accelerates the latency-bound single-vector paths (one trial point per call,
layer dims in the tens) where interpreter and dispatch overhead dominates.
The batched entry points stay on the numpy implementation: they are
BLAS-bound already, and keeping them shared means batch results are
identical across backends.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp

from . import pure as _pure

cnp.import_array()

ACT_ID = 0
ACT_RELU = 1
ACT_SOFTMAX = 2


cdef void _matvec(const double[:, ::1] W, const double[::1] b,
                  const double[::1] h, double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(W.shape[0]):
        acc = b[i]
        for j in range(W.shape[1]):
            acc += W[i, j] * h[j]
        out[i] = acc


cdef void _matvec_transpose(const double[:, ::1] W, const double[::1] g,
                            double[::1] out) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double gi
    for j in range(W.shape[1]):
        out[j] = 0.0
    for i in range(W.shape[0]):
        gi = g[i]
        for j in range(W.shape[1]):
            out[j] += W[i, j] * gi


cdef void _softmax_inplace(double[::1] z) noexcept nogil:
    cdef Py_ssize_t i
    cdef double m = z[0]
    cdef double s = 0.0
    for i in range(1, z.shape[0]):
        if z[i] > m:
            m = z[i]
    for i in range(z.shape[0]):
        z[i] = exp(z[i] - m)
        s += z[i]
    for i in range(z.shape[0]):
        z[i] /= s


cdef void _relu_inplace(double[::1] z) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(z.shape[0]):
        if z[i] < 0.0:
            z[i] = 0.0


def mlp_forward(weights, biases, acts, x):
    cdef cnp.ndarray h = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray z
    cdef Py_ssize_t li
    cdef int a
    for li in range(len(weights)):
        W = weights[li]
        z = np.empty(W.shape[0], dtype=np.float64)
        _matvec(W, biases[li], h, z)
        a = acts[li]
        if a == ACT_RELU:
            _relu_inplace(z)
        elif a == ACT_SOFTMAX:
            _softmax_inplace(z)
        h = z
    return h


def mlp_forward_many(weights, biases, acts, X):
    return _pure.mlp_forward_many(weights, biases, acts, X)


def mlp_vjp(weights, biases, acts, x, u):
    """Pullback u through the network at x (returns J(x)^T u)."""
    cdef cnp.ndarray h = np.ascontiguousarray(x, dtype=np.float64)
    cdef cnp.ndarray z, g, gnext
    cdef Py_ssize_t li, i, n_layers = len(weights)
    cdef int a
    cdef double[::1] zv, gv
    cdef const cnp.uint8_t[::1] mask
    cdef cnp.uint8_t[::1] mv
    saved = []
    for li in range(n_layers):
        W = weights[li]
        z = np.empty(W.shape[0], dtype=np.float64)
        _matvec(W, biases[li], h, z)
        a = acts[li]
        if a == ACT_RELU:
            zv = z
            m = np.empty(W.shape[0], dtype=np.uint8)
            mv = m
            for i in range(zv.shape[0]):
                mv[i] = 1 if zv[i] > 0.0 else 0  # subgradient 0 at the kink
            saved.append(m)
            _relu_inplace(z)
        elif a == ACT_SOFTMAX:
            _softmax_inplace(z)
            saved.append(z.copy())
        else:
            saved.append(None)
        h = z
    g = np.ascontiguousarray(u, dtype=np.float64).copy()
    for li in range(n_layers - 1, -1, -1):
        a = acts[li]
        if a == ACT_RELU:
            gv = g
            mask = saved[li]
            for i in range(gv.shape[0]):
                if mask[i] == 0:
                    gv[i] = 0.0
        elif a == ACT_SOFTMAX:
            _softmax_backward(saved[li], g)
        W = weights[li]
        gnext = np.empty(W.shape[1], dtype=np.float64)
        _matvec_transpose(W, g, gnext)
        g = gnext
    return g


cdef void _softmax_backward(const double[::1] s, double[::1] g) noexcept nogil:
    cdef Py_ssize_t i
    cdef double dot = 0.0
    for i in range(s.shape[0]):
        dot += g[i] * s[i]
    for i in range(s.shape[0]):
        g[i] = s[i] * (g[i] - dot)


def mlp_vjp_many(weights, biases, acts, X, U):
    return _pure.mlp_vjp_many(weights, biases, acts, X, U)
