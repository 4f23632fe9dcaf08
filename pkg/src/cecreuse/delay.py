"""Response-time formulas, the weighted objective and its analytic gradient.

Each (app, station) pair is an isolated FCFS queue.  Without cache searching
the queue is M/M/1 with service rate mu0 = f/w^a.  With searching the service
time is w^s/f plus, on a miss, an Exp(w^a)/f computation, giving an M/G/1
queue with rate mu1 = f/(w^s + (1-P_hr) w^a); its mean sojourn is the
Pollaczek-Khinchine value written out in delay_with_cache.

Internally the M/G/1 terms are evaluated in cycle units,

    D1 = srv1/f + load (srv1^2 + (1-P^2) w^2) / (2 f (f - load srv1)),

with srv1 = w^s + (1-P) w^a, which is the same algebra with fewer divisions.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import StabilityViolation
from .model import CacheAssignment, Scenario, SchedulingState, compute_hit_rates

# slope reported for routing load onto a zero-CPU queue; the projection step
# zeroes such coordinates, the value itself never enters any accepted point
BIG_GRADIENT = 1e12


@dataclass(frozen=True)
class ServiceRates:
    """Service rates of the two branches (tasks/s)."""

    mu0: float
    mu1: float


def service_rates(f: float, wa: float, ws: float, p_hr: float) -> ServiceRates:
    mu0 = f / wa
    srv1 = ws + (1.0 - p_hr) * wa
    mu1 = math.inf if srv1 == 0.0 else f / srv1
    return ServiceRates(mu0=mu0, mu1=mu1)


# -- scalar delay operations -------------------------------------------------


def delay_no_cache(lam_frac: float, rate: float, mu0: float) -> float:
    """Mean sojourn time of the no-search branch (M/M/1)."""
    load = lam_frac * rate
    if not load < mu0:
        raise StabilityViolation(f"load {load} >= mu0 {mu0}")
    return 1.0 / (mu0 - load)


def delay_with_cache(lam_frac: float, rate: float, mu0: float, mu1: float,
                     p_hr: float) -> float:
    """Mean sojourn time of the cache-search branch (M/G/1)."""
    load = lam_frac * rate
    if not load < mu1:
        raise StabilityViolation(f"load {load} >= mu1 {mu1}")
    if math.isinf(mu1):
        return 0.0
    t1 = 1.0 / mu1
    t2 = load / (2.0 * mu1 * (mu1 - load))
    if p_hr == 1.0:
        t3 = 0.0
    else:
        t3 = (1.0 - p_hr) * (1.0 + p_hr) * load * mu1 / (2.0 * (mu1 - load) * mu0 * mu0)
    return t1 + t2 + t3


def service_time_cdf(w: float, p_hr: float, wa: float, ws: float) -> float:
    """CDF of the per-task computation cost in cycles under cache searching.

    Jumps from 0 to p_hr at w = ws (a hit costs exactly the search), then
    approaches 1 with the exponential miss tail.
    """
    if w < ws:
        return 0.0
    return 1.0 - (1.0 - p_hr) * math.exp(-(w - ws) / wa)


def choose_cache_search(d0: float, d1: float, p_nhr: float, dt: float) -> int:
    """1 if searching the cache lowers the processing delay, else 0.

    Either delay may be +inf to mark an unstable branch; ties keep y = 0.
    """
    return 1 if d0 > d1 + p_nhr * dt else 0


def d_delay1_d_phr(lam_frac: float, rate: float, f: float, wa: float,
                   ws: float, p_hr: float) -> float:
    """Derivative of the cache-search sojourn time w.r.t. the total hit rate.

    Always <= -wa/f < 0: a better hit rate shortens both the service mixture
    and the queue in front of it.
    """
    d = _kernels.hit_derivative(lam_frac * rate, f, wa, ws, p_hr)
    if d == -math.inf:
        raise StabilityViolation("search branch unstable at this hit rate")
    return d


# -- vectorized objective ----------------------------------------------------


@dataclass
class EvalResult:
    """Objective evaluation at one decision point.

    ``objective`` is None when some station carries load without a stable
    service branch; delays are per (app, station) with 0 where no traffic is
    routed and no CPU assigned.
    """

    objective: float | None
    app_delays: np.ndarray | None
    station_delays: np.ndarray | None
    y: np.ndarray
    feasible: bool


def _branch_tables(scenario: Scenario, total_hit: np.ndarray,
                   lam: np.ndarray, fshare: np.ndarray):
    """Both branch delays (A, N) plus validity masks; no infinities stored."""
    wa = scenario.workloads[:, None]
    ws = scenario.search_workload
    f = fshare * scenario.compute_capacities[None, :]
    load = lam * scenario.total_rates[:, None]
    fpos = f > 0.0

    den0 = f - load * wa
    ok0 = fpos & (den0 > 0.0)
    d0 = np.divide(wa * np.ones_like(f), den0, out=np.zeros_like(f), where=ok0)

    srv1 = ws + (1.0 - total_hit)[:, None] * wa
    den1 = f - load * srv1
    ok1 = fpos & (den1 > 0.0)
    # second moment numerator of the service mixture, in cycles^2
    sq = srv1 * srv1 + (1.0 - total_hit * total_hit)[:, None] * wa * wa
    two_f_den1 = 2.0 * f * den1
    d1 = np.divide(srv1 * np.ones_like(f), f, out=np.zeros_like(f), where=fpos)
    d1 += np.divide(load * sq, two_f_den1, out=np.zeros_like(f), where=ok1)
    d1 = np.where(ok1, d1, 0.0)
    return f, load, d0, ok0, d1, ok1, den0, den1, srv1, sq


def recompute_search_flags(scenario: Scenario, total_hit: np.ndarray,
                           neighbor_hit: np.ndarray, lam: np.ndarray,
                           fshare: np.ndarray) -> np.ndarray:
    """Per-(app, station) search flags minimizing the processing delay.

    An unstable branch counts as infinitely slow; ties keep y = 0.
    """
    _, _, d0, ok0, d1, ok1, *_ = _branch_tables(scenario, total_hit, lam, fshare)
    dt = scenario.transfer_delays[None, :]
    cand0 = np.where(ok0, d0, np.inf)
    cand1 = np.where(ok1, d1 + neighbor_hit * dt, np.inf)
    return (cand0 > cand1).astype(np.int8)


def evaluate_with_rates(scenario: Scenario, total_hit: np.ndarray,
                        neighbor_hit: np.ndarray, lam: np.ndarray,
                        fshare: np.ndarray,
                        y: np.ndarray | None = None) -> EvalResult:
    """Weighted objective from precomputed hit rates; y recomputed if None."""
    if y is None:
        y = recompute_search_flags(scenario, total_hit, neighbor_hit, lam, fshare)
    f, load, d0, ok0, d1, ok1, *_ = _branch_tables(scenario, total_hit, lam, fshare)
    dt = scenario.transfer_delays[None, :]
    ysel = y == 1

    idle = (load == 0.0) & (f == 0.0)
    ok_selected = np.where(ysel, ok1, ok0)
    if not np.all(ok_selected | idle):
        return EvalResult(None, None, None, y, False)

    station_delays = np.where(ysel, d1 + neighbor_hit * dt, d0)
    station_delays = np.where(idle, 0.0, station_delays)

    rates = scenario.total_rates
    carried = rates > 0.0
    arr = scenario.arrival_rate_matrix
    with np.errstate(divide="ignore", invalid="ignore"):
        trans = np.abs(load - arr) * dt / rates[:, None]
    trans = np.where(carried[:, None], trans, 0.0)
    app_delays = np.where(carried, (lam * station_delays).sum(axis=1) + trans.sum(axis=1), 0.0)
    objective = float(scenario.weights @ app_delays)
    return EvalResult(objective, app_delays, station_delays, y, True)


def evaluate_objective(scenario: Scenario, cache: CacheAssignment,
                       sched: SchedulingState,
                       frozen_y: np.ndarray | None = None) -> EvalResult:
    """Non-raising objective evaluation (hit rates from the cache)."""
    rates = compute_hit_rates(scenario, cache)
    neighbor = rates.neighbor
    return evaluate_with_rates(scenario, rates.total, neighbor, sched.lam,
                               sched.fshare, y=frozen_y)


def weighted_objective(scenario: Scenario, cache: CacheAssignment,
                       sched: SchedulingState,
                       frozen_y: np.ndarray | None = None) -> float:
    """Weighted mean response time over all apps; raises when unstable."""
    res = evaluate_objective(scenario, cache, sched, frozen_y=frozen_y)
    if not res.feasible:
        raise StabilityViolation("some station carries load without a stable branch")
    return res.objective


def processing_delay(scenario: Scenario, cache: CacheAssignment,
                     sched: SchedulingState, a: int, n: int) -> float:
    """Mean processing delay of app a at station n under sched.y."""
    rates = compute_hit_rates(scenario, cache)
    res = evaluate_with_rates(scenario, rates.total, rates.neighbor,
                              sched.lam, sched.fshare, y=sched.y)
    if not res.feasible:
        raise StabilityViolation(f"unstable branch selected at app {a}, station {n}")
    return float(res.station_delays[a, n])


def response_time(scenario: Scenario, sched: SchedulingState, a: int,
                  station_delays: np.ndarray) -> float:
    """App response time: routed processing delays plus transfer imbalance."""
    rate = float(scenario.total_rates[a])
    if rate == 0.0:
        return 0.0
    lam = sched.lam[a]
    arr = scenario.arrival_rate_matrix[a]
    dt = scenario.transfer_delays
    return float(lam @ station_delays + np.abs(lam * rate - arr) @ dt / rate)


# -- analytic gradient -------------------------------------------------------


@dataclass(frozen=True)
class ObjectiveGradient:
    dlam: np.ndarray     # seconds per unit workload fraction, (A, N)
    dfshare: np.ndarray  # seconds per unit CPU share, (A, N)


def gradient_with_rates(scenario: Scenario, total_hit: np.ndarray,
                        neighbor_hit: np.ndarray, lam: np.ndarray,
                        fshare: np.ndarray, y: np.ndarray) -> ObjectiveGradient:
    """Exact partials of the y-frozen objective w.r.t. lam and fshare."""
    f, load, d0, ok0, d1, ok1, den0, den1, srv1, sq = _branch_tables(
        scenario, total_hit, lam, fshare)
    wa = scenario.workloads[:, None]
    dt = scenario.transfer_delays[None, :]
    phi = scenario.weights[:, None]
    ysel = y == 1

    idle = (load == 0.0) & (f == 0.0)
    ok_selected = np.where(ysel, ok1, ok0)
    if not np.all(ok_selected | idle):
        raise StabilityViolation("gradient requested at an unstable point")

    # d(lam * D)/dlam per branch; load = lam * R throughout
    g0 = d0 + np.divide(load * wa * wa, den0 * den0,
                        out=np.zeros_like(f), where=ok0)
    g1 = (d1 + neighbor_hit * dt) + np.divide(load * sq, 2.0 * den1 * den1,
                                              out=np.zeros_like(f), where=ok1)
    sign = np.where(load - scenario.arrival_rate_matrix >= 0.0, 1.0, -1.0)
    dlam = phi * (np.where(ysel, g1, g0) + sign * dt)

    # d(lam * D)/df per branch, then chain rule df/dfshare = C_n
    h0 = -np.divide(lam * wa, den0 * den0, out=np.zeros_like(f), where=ok0)
    h1 = -np.divide(lam * srv1, f * f, out=np.zeros_like(f), where=ok1)
    h1 -= np.divide(lam * load * sq * (den1 + f), 2.0 * f * f * den1 * den1,
                    out=np.zeros_like(f), where=ok1)
    dfshare = phi * np.where(ysel, h1, h0) * scenario.compute_capacities[None, :]

    # zero-CPU, zero-load coordinates: routing load there is ruinous, adding
    # CPU there changes nothing
    dlam = np.where(idle, BIG_GRADIENT, dlam)
    dfshare = np.where(idle, 0.0, dfshare)

    # apps with no traffic contribute nothing anywhere
    quiet = scenario.total_rates == 0.0
    dlam = np.where(quiet[:, None], 0.0, dlam)
    dfshare = np.where(quiet[:, None], 0.0, dfshare)
    return ObjectiveGradient(dlam=dlam, dfshare=dfshare)


def objective_gradient(scenario: Scenario, cache: CacheAssignment,
                       sched: SchedulingState,
                       frozen_y: np.ndarray) -> ObjectiveGradient:
    rates = compute_hit_rates(scenario, cache)
    return gradient_with_rates(scenario, rates.total, rates.neighbor,
                               sched.lam, sched.fshare, frozen_y)
