# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled stepping kernels.

Twin of ``_stepkernels_py`` with identical call contracts, selected at
import time by :mod:`spheredyn.dynamics`. The zero-temperature stepping
(including the fused multi-step driver) and the move-and-retract pass run
as C loops; the softmax consensus reuses the vectorized BLAS route of the
fallback, which benchmarks faster than any scalar rewrite for the n^2
attention matrix (see benchmarks/bench_kernels.py).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

from spheredyn._stepkernels_py import consensus_all as _blas_consensus_all

cnp.import_array()

BACKEND = "cython"

cdef double _NORM_EPS = 1e-12


def consensus_all(x, b, double beta):
    """Softmax-weighted consensus point of every token, shape (n, d)."""
    return _blas_consensus_all(np.asarray(x), np.asarray(b), beta)


def finite_beta_step(x, b, v, double beta, double dt):
    """One synchronous Euler step of the softmax attention dynamics."""
    m = _blas_consensus_all(np.asarray(x), np.asarray(b), beta)
    return _move_and_retract(np.asarray(x), m @ np.asarray(v).T, dt)


def zero_temp_step(x, b, v, double dt):
    """One synchronous Euler step of the zero-temperature dynamics."""
    return zero_temp_run(x, b, v, dt, 1)


def zero_temp_run(x, b, v, double dt, Py_ssize_t n_steps):
    """Advance ``n_steps`` zero-temperature Euler steps without returning
    to Python in between. Returns ``(tokens, bad)`` like the single-step
    kernels; on a degenerate update the index of the offending token is
    reported and the tokens of the failing step are returned as-is."""
    cdef const double[:, ::1] x0 = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = x0.shape[0]
    cdef Py_ssize_t d = x0.shape[1]
    cur_arr = np.array(x0, dtype=np.float64)
    cdef double[:, ::1] cur = cur_arr
    cdef const double[:, ::1] bt = np.ascontiguousarray(np.asarray(b, dtype=np.float64).T)
    cdef const double[:, ::1] vm = np.ascontiguousarray(np.asarray(v, dtype=np.float64))
    g_arr = np.empty(d, dtype=np.float64)
    w_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] g = g_arr
    cdef double[::1] w = w_arr
    cdef Py_ssize_t step, i, k, l
    cdef double nrm, dot
    cdef Py_ssize_t bad = -1
    with nogil:
        for step in range(n_steps):
            for i in range(n):
                # g = B^T x_i, normalized
                nrm = 0.0
                for k in range(d):
                    dot = 0.0
                    for l in range(d):
                        dot += bt[k, l] * cur[i, l]
                    g[k] = dot
                    nrm += dot * dot
                nrm = sqrt(nrm)
                for k in range(d):
                    g[k] /= nrm
                # w = V g, then tangent-project at x_i and move
                dot = 0.0
                for k in range(d):
                    w[k] = 0.0
                    for l in range(d):
                        w[k] += vm[k, l] * g[l]
                    dot += cur[i, k] * w[k]
                nrm = 0.0
                for k in range(d):
                    w[k] = cur[i, k] + dt * (w[k] - dot * cur[i, k])
                    nrm += w[k] * w[k]
                nrm = sqrt(nrm)
                if nrm <= _NORM_EPS:
                    bad = i
                    break
                for k in range(d):
                    cur[i, k] = w[k] / nrm
            if bad >= 0:
                break
    return cur_arr, int(bad)


def _move_and_retract(const double[:, ::1] x, const double[:, ::1] field, double dt):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t d = x.shape[1]
    out = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t i, k
    cdef double dot, nrm
    cdef Py_ssize_t bad = -1
    with nogil:
        for i in range(n):
            dot = 0.0
            for k in range(d):
                dot += x[i, k] * field[i, k]
            nrm = 0.0
            for k in range(d):
                y[i, k] = x[i, k] + dt * (field[i, k] - dot * x[i, k])
                nrm += y[i, k] * y[i, k]
            nrm = sqrt(nrm)
            if nrm <= _NORM_EPS:
                if bad < 0:
                    bad = i
            else:
                for k in range(d):
                    y[i, k] /= nrm
    return out, int(bad)
