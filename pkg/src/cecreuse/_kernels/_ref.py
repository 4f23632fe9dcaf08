"""Pure-Python reference kernels.

These mirror the compiled kernels in ``_fast.pyx`` operation for operation:
plain sequential loops, the same expression shapes, no vectorized reductions.
Keeping the floating-point evaluation order identical makes results
bit-for-bit equal regardless of which implementation is selected, so solver
outputs do not depend on whether the extension built.
"""
import math

import numpy as np

IMPL_NAME = "pure"


def hit_derivative(load, f, wa, ws, hit):
    """Derivative of the cache-search sojourn time with respect to the hit rate.

    ``load`` is the absolute arrival rate (tasks/s), ``f`` the absolute CPU
    speed (cycles/s), ``wa`` the mean workload and ``ws`` the search workload
    (cycles), ``hit`` the total hit rate in [0, 1].  Returns -inf when the
    queue is unstable at this hit rate (callers treat that as "unboundedly
    beneficial to raise the hit rate").
    """
    if f <= 0.0:
        return -math.inf
    W = (1.0 - hit) * wa + ws
    den = f - load * W
    if den <= 0.0:
        return -math.inf
    mu0sq = (f / wa) * (f / wa)
    t1 = wa / f
    t2 = load * load * wa * W * W / (2.0 * f * den * den)
    t3 = f * load * load * (1.0 - hit) * (1.0 + hit) * wa / (2.0 * mu0sq * den * den)
    t4 = f * load * hit / (mu0sq * den)
    t5 = load * wa * W / (f * den)
    return -(t1 + t2 + t3 + t4 + t5)


def efficiency_bracket(hit, station, lam_row, y_row, f_row, dt_row, rate, wa, ws, weight):
    """Marginal value of raising one app's hit rate, summed over stations.

    ``lam_row``, ``y_row``, ``f_row`` and ``dt_row`` are per-station arrays
    for a single app: workload fractions, cache-search flags (0/1 floats),
    absolute CPU speeds and transfer delays.  ``station`` is the station whose
    cache is being optimized; its own transfer delay does not enter (a local
    hit needs no transfer).  Returns -inf if any active queue is unstable at
    this hit rate.
    """
    total = 0.0
    n = lam_row.shape[0]
    for j in range(n):
        c = weight * lam_row[j] * y_row[j]
        if c == 0.0:
            continue
        d = hit_derivative(lam_row[j] * rate, f_row[j], wa, ws, hit)
        if d == -math.inf:
            return -math.inf
        if j == station:
            total = total + c * d
        else:
            total = total + c * (d + dt_row[j])
    return total


def queue_waits(interarrivals, services):
    """Waiting times of a FIFO single-server queue (Lindley recursion).

    ``interarrivals[i]`` is the gap between arrivals i-1 and i (index 0 is
    ignored; the first task arrives to an empty system and waits zero).
    """
    m = interarrivals.shape[0]
    waits = np.empty(m, dtype=np.float64)
    w = 0.0
    waits[0] = 0.0
    for i in range(1, m):
        w = w + services[i - 1] - interarrivals[i]
        if w < 0.0:
            w = 0.0
        waits[i] = w
    return waits
