# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the queue simulation and the caching bisection.

Arithmetic mirrors ``_ref.py`` expression for expression so both
implementations produce bit-identical doubles (the build disables
floating-point contraction for the same reason).
"""
from libc.math cimport INFINITY

import numpy as np

IMPL_NAME = "compiled"


cdef inline double _hit_derivative(double load, double f, double wa,
                                   double ws, double hit) nogil:
    cdef double W, den, mu0sq, t1, t2, t3, t4, t5
    if f <= 0.0:
        return -INFINITY
    W = (1.0 - hit) * wa + ws
    den = f - load * W
    if den <= 0.0:
        return -INFINITY
    mu0sq = (f / wa) * (f / wa)
    t1 = wa / f
    t2 = load * load * wa * W * W / (2.0 * f * den * den)
    t3 = f * load * load * (1.0 - hit) * (1.0 + hit) * wa / (2.0 * mu0sq * den * den)
    t4 = f * load * hit / (mu0sq * den)
    t5 = load * wa * W / (f * den)
    return -(t1 + t2 + t3 + t4 + t5)


def hit_derivative(double load, double f, double wa, double ws, double hit):
    """Derivative of the cache-search sojourn time w.r.t. the hit rate."""
    return _hit_derivative(load, f, wa, ws, hit)


def efficiency_bracket(double hit, Py_ssize_t station, const double[::1] lam_row,
                       const double[::1] y_row, const double[::1] f_row, const double[::1] dt_row,
                       double rate, double wa, double ws, double weight):
    """Marginal value of raising one app's hit rate, summed over stations."""
    cdef double total = 0.0
    cdef double c, d
    cdef Py_ssize_t j, n = lam_row.shape[0]
    for j in range(n):
        c = weight * lam_row[j] * y_row[j]
        if c == 0.0:
            continue
        d = _hit_derivative(lam_row[j] * rate, f_row[j], wa, ws, hit)
        if d == -INFINITY:
            return -INFINITY
        if j == station:
            total = total + c * d
        else:
            total = total + c * (d + dt_row[j])
    return total


def queue_waits(const double[::1] interarrivals, const double[::1] services):
    """Waiting times of a FIFO single-server queue (Lindley recursion)."""
    cdef Py_ssize_t m = interarrivals.shape[0]
    waits_arr = np.empty(m, dtype=np.float64)
    cdef double[::1] waits = waits_arr
    cdef double w = 0.0
    cdef Py_ssize_t i
    if m == 0:
        return waits_arr
    waits[0] = 0.0
    with nogil:
        for i in range(1, m):
            w = w + services[i - 1] - interarrivals[i]
            if w < 0.0:
                w = 0.0
            waits[i] = w
    return waits_arr
