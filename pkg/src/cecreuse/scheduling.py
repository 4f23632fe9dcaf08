"""Workload routing and CPU allocation by projected gradient descent.

The decision block is the pair (lam, fshare): lam rows live on the
probability simplex (each app's workload split over stations), fshare
columns live on the simplex too (each station's CPU split over apps).  Both
projections are separable, so the euclidean projection of the whole block is
row/column-wise sort-based simplex projection.  Steps follow a diminishing
schedule theta0 / sqrt(i) toward the projected target, with an Armijo
backtracking line search that additionally keeps every queue strictly inside
its stability region by a small margin.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .delay import (evaluate_with_rates, gradient_with_rates,
                    recompute_search_flags)
from .errors import EmptyVector, Infeasible, LineSearchExhausted, StabilityViolation
from .model import (CacheAssignment, Scenario, SchedulingState,
                    compute_hit_rates)


@dataclass(frozen=True)
class PgdParams:
    """Step schedule and line-search constants."""
    theta0: float = 1.0        # base step size, scaled by 1/sqrt(iteration)
    alpha: float = 0.3         # Armijo sufficient-decrease fraction
    beta: float = 0.5          # backtracking shrink factor
    j_max: int = 60            # line-search attempts before giving up
    delta_stab: float = 1e-6   # relative utilization margin below 1


def project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {w : w >= 0, sum w = 1}.

    Sorts v in decreasing order and finds the largest j such that
    u_j + (1 - sum_{i<=j} u_i) / j > 0; that prefix determines the shift.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.size == 0:
        raise EmptyVector("cannot project an empty vector")
    u = np.sort(v)[::-1]
    css = np.cumsum(u)
    idx = np.arange(1, v.size + 1)
    cond = u + (1.0 - css) / idx > 0.0
    rho = idx[cond][-1]
    tau = (1.0 - css[rho - 1]) / rho
    return np.maximum(v + tau, 0.0)


def project_decisions(lam: np.ndarray, fshare: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    """Project lam rows and fshare columns onto their simplices."""
    lam_p = np.vstack([project_simplex(row) for row in lam])
    fsh_p = np.column_stack([project_simplex(col) for col in fshare.T])
    return lam_p, fsh_p


def stability_margin_ok(scenario: Scenario, total_hit: np.ndarray,
                        lam: np.ndarray, fshare: np.ndarray,
                        y: np.ndarray, delta: float) -> bool:
    """True when every selected queue satisfies load * E[S] <= (1-delta) f."""
    f = fshare * scenario.compute_capacities[None, :]
    load = lam * scenario.total_rates[:, None]
    wa = scenario.workloads[:, None]
    srv1 = scenario.search_workload + (1.0 - total_hit)[:, None] * wa
    srv = np.where(y == 1, srv1, wa)
    return bool(np.all(load * srv <= (1.0 - delta) * f))


def backtrack(objective_fn, margin_fn, point: tuple[np.ndarray, np.ndarray],
              direction: tuple[np.ndarray, np.ndarray], base_obj: float,
              grad_dot_dir: float, params: PgdParams
              ) -> tuple[int, np.ndarray, np.ndarray, float]:
    """Smallest j whose step beta^j meets the decrease and margin tests.

    Returns (j, lam, fshare, objective) of the accepted point.  objective_fn
    must return None on unstable points; margin_fn gates the stability
    margin before any evaluation.
    """
    for j in range(params.j_max + 1):
        step = params.beta ** j
        lam = point[0] + step * direction[0]
        fsh = point[1] + step * direction[1]
        if not margin_fn(lam, fsh):
            continue
        obj = objective_fn(lam, fsh)
        if obj is None:
            continue
        if base_obj - obj >= -params.alpha * step * grad_dot_dir:
            return j, lam, fsh, obj
    raise LineSearchExhausted(
        "no backtracking step met the decrease and margin tests",
        tried=params.j_max + 1)


# a projected target this close to the iterate counts as stationary
STATIONARY_TOL = 1e-14


def solve_scheduling(scenario: Scenario, cache: CacheAssignment,
                     sched: SchedulingState, iters: int,
                     params: PgdParams = PgdParams()
                     ) -> tuple[SchedulingState, list[tuple[int, float, int]]]:
    """Improve (lam, fshare) under a frozen cache.

    Search flags are re-chosen from the branch delays at the start of every
    iteration and held fixed through its gradient and line search.  The
    trace rows are (iteration, objective, backtrack_count); the objective
    column is non-increasing.  Stops early at a stationary projected target
    or when the line search is exhausted, keeping the current point.
    """
    sched = sched.copy()
    hit = compute_hit_rates(scenario, cache)
    trace: list[tuple[int, float, int]] = []
    for i in range(1, iters + 1):
        y = recompute_search_flags(scenario, hit.total, hit.neighbor,
                                   sched.lam, sched.fshare)
        res = evaluate_with_rates(scenario, hit.total, hit.neighbor,
                                  sched.lam, sched.fshare, y=y)
        if not res.feasible:
            raise StabilityViolation("scheduling started from an unstable point")
        grad = gradient_with_rates(scenario, hit.total, hit.neighbor,
                                   sched.lam, sched.fshare, y)
        theta = params.theta0 / np.sqrt(i)
        target = project_decisions(sched.lam - theta * grad.dlam,
                                   sched.fshare - theta * grad.dfshare)
        d_lam = target[0] - sched.lam
        d_fsh = target[1] - sched.fshare
        if max(np.abs(d_lam).max(), np.abs(d_fsh).max()) < STATIONARY_TOL:
            trace.append((i, res.objective, 0))
            break
        grad_dot = float(np.sum(grad.dlam * d_lam) + np.sum(grad.dfshare * d_fsh))

        def objective_fn(lam, fsh):
            out = evaluate_with_rates(scenario, hit.total, hit.neighbor,
                                      lam, fsh, y=y)
            return out.objective if out.feasible else None

        def margin_fn(lam, fsh):
            return stability_margin_ok(scenario, hit.total, lam, fsh, y,
                                       params.delta_stab)

        try:
            j, new_lam, new_fsh, new_obj = backtrack(
                objective_fn, margin_fn, (sched.lam, sched.fshare),
                (d_lam, d_fsh), res.objective, grad_dot, params)
        except LineSearchExhausted:
            trace.append((i, res.objective, params.j_max + 1))
            break
        sched.lam = new_lam
        sched.fshare = new_fsh
        trace.append((i, new_obj, j))
    sched.y = recompute_search_flags(scenario, hit.total, hit.neighbor,
                                     sched.lam, sched.fshare)
    return sched, trace


def initial_feasible_point(scenario: Scenario,
                           cache: CacheAssignment) -> SchedulingState:
    """Capacity-proportional routing, uniform CPU split, repaired to stability.

    lam rows start proportional to compute capacity and fshare uniform.  If
    some queue is overloaded, each app's excess load moves to its
    largest-slack stations; if a row cannot fit under the current split,
    fshare is rebalanced proportionally to the demanded cycle rates and the
    shift is retried.  Raises Infeasible when no stable point is found.
    """
    hit = compute_hit_rates(scenario, cache)
    A, N = scenario.num_apps, scenario.num_stations
    caps = scenario.compute_capacities
    rates = scenario.total_rates
    wa = scenario.workloads[:, None]
    srv1 = scenario.search_workload + (1.0 - hit.total)[:, None] * wa
    srv_best = np.minimum(wa * np.ones((A, N)), srv1)
    delta = PgdParams().delta_stab

    lam = np.tile(caps / caps.sum(), (A, 1))
    fshare = np.full((A, N), 1.0 / A)
    for _attempt in range(4):
        f = fshare * caps[None, :]
        cap_load = (1.0 - delta) * f / srv_best
        load = lam * rates[:, None]
        if np.all(load <= cap_load):
            break
        stuck = False
        for a in range(A):
            if rates[a] == 0.0:
                continue
            row = np.minimum(load[a], cap_load[a])
            excess = float(load[a].sum() - row.sum())
            if excess <= 0.0:
                continue
            slack = cap_load[a] - row
            for n in np.argsort(-slack, kind="stable"):
                take = min(excess, float(slack[n]))
                row[n] += take
                excess -= take
                if excess <= 0.0:
                    break
            if excess > 1e-12 * rates[a]:
                stuck = True
            load[a] = row
            lam[a] = row / rates[a]
            lam[a, np.argmax(lam[a])] += 1.0 - lam[a].sum()
        if not stuck:
            continue
        # rebalance each station's CPU toward the demanded cycle rates
        demand = load * srv_best
        col = demand.sum(axis=0)
        fshare = np.where(col[None, :] > 0.0, demand / np.maximum(col, 1e-300),
                          1.0 / A)
        fshare = fshare / fshare.sum(axis=0, keepdims=True)

    f = fshare * caps[None, :]
    load = lam * rates[:, None]
    if not np.all(load * srv_best <= (1.0 - delta) * f):
        raise Infeasible("no stable routing found for the given capacities")
    y = recompute_search_flags(scenario, hit.total, hit.neighbor, lam, fshare)
    return SchedulingState(lam=lam, fshare=fshare, y=y)
