# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-step kernels for the episode loop.

Mirrors ``numpy_backend`` exactly; the simulation consumes whichever backend
``timepercept.backends`` selected at import.
"""

from libc.math cimport exp, sqrt

import numpy as np

NAME = "cython"

cdef double INV_SQRT_2PI = 1.0 / sqrt(2.0 * 3.141592653589793)


def features_into(
    double[::1] out,
    double[::1] ages,
    unsigned char[::1] active,
    int m,
    double xi,
    double beta,
):
    cdef int zeta = ages.shape[0]
    cdef int s, j, lo
    cdef double h, center, d, denom
    denom = 2.0 * beta * beta
    for s in range(zeta):
        lo = s * m
        if not active[s]:
            for j in range(m):
                out[lo + j] = 0.0
            continue
        h = exp(-(1.0 - xi) * ages[s])
        for j in range(m):
            center = (j + 1.0) / m
            d = h - center
            out[lo + j] = h * INV_SQRT_2PI * exp(-(d * d) / denom)


def action_values_into(double[::1] out, double[:, ::1] w, double[::1] x):
    cdef int n_actions = w.shape[0]
    cdef int d = w.shape[1]
    cdef int a, j
    cdef double acc
    for a in range(n_actions):
        acc = 0.0
        for j in range(d):
            acc += w[a, j] * x[j]
        out[a] = acc


def td_update(
    double[:, ::1] w,
    double[:, ::1] e,
    double[::1] x,
    int action,
    double delta,
    double gamma_eta,
    double alpha,
    bint trace_first,
):
    cdef int n_actions = e.shape[0]
    cdef int d = e.shape[1]
    cdef int a, j
    cdef double scale = alpha * delta
    if trace_first:
        for a in range(n_actions):
            for j in range(d):
                e[a, j] *= gamma_eta
        for j in range(d):
            e[action, j] += x[j]
            w[action, j] += scale * e[action, j]
    else:
        for j in range(d):
            w[action, j] += scale * e[action, j]
        for a in range(n_actions):
            for j in range(d):
                e[a, j] *= gamma_eta
        for j in range(d):
            e[action, j] += x[j]
