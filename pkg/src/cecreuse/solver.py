"""Alternating minimization over caching and scheduling, plus baselines.

One round is a full caching sweep (all stations, several passes) followed by
a block of projected-gradient scheduling iterations.  Both subproblem
solvers are non-increasing in the objective, so the concatenated trace is
non-increasing as well.  Baselines: Greedy (ratio-order caching with
capacity-proportional routing, no optimization), NoR (no reuse: empty
caches, scheduling only) and NoC (no collaboration: every station solves
its own single-station problem on its local arrivals).
"""
from __future__ import annotations

import time
from dataclasses import dataclass, replace

import numpy as np

from .caching import LEVEL_ACCURACY, sweep_all_stations
from .delay import evaluate_objective
from .errors import Infeasible
from .model import (Application, BaseStation, CacheAssignment, Scenario,
                    SchedulingState)
from .scheduling import PgdParams, initial_feasible_point, solve_scheduling

# relative per-round improvement below which alternation stops
ROUND_IMPROVEMENT_TOL = 1e-6

TraceRow = tuple[int, str, int, float]


@dataclass
class SolveReport:
    """Everything a solve produced, JSON round-trippable."""
    algorithm: str
    objective_trace: list[TraceRow]
    cache: CacheAssignment | None
    sched: SchedulingState | None
    final_objective: float | None
    rounds_completed: int
    wall_time_s: float
    feasible: bool = True

    def to_dict(self) -> dict:
        d = {
            "algorithm": self.algorithm,
            "objective_trace": [list(row) for row in self.objective_trace],
            "final_objective": self.final_objective,
            "rounds_completed": self.rounds_completed,
            "wall_time_s": self.wall_time_s,
            "feasible": self.feasible,
            "cache": None,
            "sched": None,
        }
        if self.cache is not None:
            d["cache"] = {"mode": self.cache.mode,
                          "entries": [e.tolist() for e in self.cache.entries]}
        if self.sched is not None:
            d["sched"] = {"lam": self.sched.lam.tolist(),
                          "fshare": self.sched.fshare.tolist(),
                          "y": self.sched.y.tolist()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SolveReport":
        cache = None
        if d["cache"] is not None:
            cache = CacheAssignment(
                entries=[np.array(e, dtype=np.float64) for e in d["cache"]["entries"]],
                mode=d["cache"]["mode"])
        sched = None
        if d["sched"] is not None:
            sched = SchedulingState(
                lam=np.array(d["sched"]["lam"], dtype=np.float64),
                fshare=np.array(d["sched"]["fshare"], dtype=np.float64),
                y=np.array(d["sched"]["y"], dtype=np.int8))
        return cls(algorithm=d["algorithm"],
                   objective_trace=[(int(r), str(p), int(i), float(o))
                                    for r, p, i, o in d["objective_trace"]],
                   cache=cache, sched=sched,
                   final_objective=d["final_objective"],
                   rounds_completed=int(d["rounds_completed"]),
                   wall_time_s=float(d["wall_time_s"]),
                   feasible=bool(d["feasible"]))


def greedy_cache(scenario: Scenario) -> CacheAssignment:
    """Fill each station in descending p/s order until the next item no
    longer fits (ties broken by (app, input) index)."""
    ratios = []
    for a in range(scenario.num_apps):
        p = scenario.match_probs[a]
        s = scenario.result_sizes[a]
        for k in range(scenario.catalog_size(a)):
            ratios.append((a, k, p[k] / s[k], s[k]))
    apps_idx = np.array([r[0] for r in ratios])
    input_idx = np.array([r[1] for r in ratios])
    ratio = np.array([r[2] for r in ratios])
    order = np.lexsort((input_idx, apps_idx, -ratio))

    cache = CacheAssignment.zeros(scenario)
    for n in range(scenario.num_stations):
        budget = float(scenario.storage_capacities[n])
        for pos in order:
            a, k = int(apps_idx[pos]), int(input_idx[pos])
            size = scenario.result_sizes[a][k]
            if size > budget:
                break
            cache.entries[a][n, k] = 1.0
            budget -= size
    return cache


def _greedy_state(scenario: Scenario) -> tuple[CacheAssignment, SchedulingState, float]:
    cache = greedy_cache(scenario)
    sched = initial_feasible_point(scenario, cache)
    res = evaluate_objective(scenario, cache, sched)
    if not res.feasible:
        raise Infeasible("repaired starting point is still unstable")
    sched.y = res.y
    return cache, sched, res.objective


def solve_greedy(scenario: Scenario) -> SolveReport:
    """Ratio-order caching + capacity-proportional routing, no optimization."""
    t0 = time.perf_counter()
    cache, sched, obj = _greedy_state(scenario)
    return SolveReport(algorithm="greedy",
                       objective_trace=[(0, "init", 0, obj)],
                       cache=cache, sched=sched, final_objective=obj,
                       rounds_completed=0,
                       wall_time_s=time.perf_counter() - t0)


def alternating_solve(scenario: Scenario, rounds: int = 10,
                      caching_iters: int = 10, scheduling_iters: int = 10,
                      params: PgdParams = PgdParams(),
                      accuracy: float = LEVEL_ACCURACY) -> SolveReport:
    """Alternate the caching sweep and the scheduling descent from the
    Greedy state, stopping early once a round improves by less than 1e-6
    relative."""
    t0 = time.perf_counter()
    cache, sched, obj = _greedy_state(scenario)
    trace: list[TraceRow] = [(0, "init", 0, obj)]
    rounds_completed = 0
    prev = obj
    for r in range(1, rounds + 1):
        cache, sched, pass_objs = sweep_all_stations(
            scenario, cache, sched, passes=caching_iters, accuracy=accuracy)
        for i, o in enumerate(pass_objs, start=1):
            trace.append((r, "caching", i, o))
        sched, strace = solve_scheduling(scenario, cache, sched,
                                         scheduling_iters, params)
        for i, o, _j in strace:
            trace.append((r, "scheduling", i, o))
        rounds_completed = r
        cur = trace[-1][3]
        if prev - cur < ROUND_IMPROVEMENT_TOL * max(abs(prev), 1e-300):
            break
        prev = cur
    return SolveReport(algorithm="proposed", objective_trace=trace,
                       cache=cache, sched=sched, final_objective=trace[-1][3],
                       rounds_completed=rounds_completed,
                       wall_time_s=time.perf_counter() - t0)


def solve_nor(scenario: Scenario, rounds: int = 10, caching_iters: int = 10,
              scheduling_iters: int = 10,
              params: PgdParams = PgdParams()) -> SolveReport:
    """No reuse: empty caches, y forced off by the branch rule, scheduling
    only with the same total iteration budget."""
    t0 = time.perf_counter()
    cache = CacheAssignment.zeros(scenario)
    sched = initial_feasible_point(scenario, cache)
    res = evaluate_objective(scenario, cache, sched)
    if not res.feasible:
        raise Infeasible("repaired starting point is still unstable")
    sched.y = res.y
    trace: list[TraceRow] = [(0, "init", 0, res.objective)]
    sched, strace = solve_scheduling(scenario, cache, sched,
                                     rounds * scheduling_iters, params)
    for i, o, _j in strace:
        trace.append((1, "scheduling", i, o))
    return SolveReport(algorithm="nor", objective_trace=trace, cache=cache,
                       sched=sched, final_objective=trace[-1][3],
                       rounds_completed=1,
                       wall_time_s=time.perf_counter() - t0)


def _single_station_scenario(scenario: Scenario, n: int,
                             kept: list[int]) -> Scenario:
    """Station n in isolation, kept apps reweighted by their local share."""
    rates = scenario.arrival_rate_matrix
    apps = []
    for a in kept:
        app = scenario.apps[a]
        share = rates[a, n] / scenario.total_rates[a]
        apps.append(Application(weight=app.weight * share,
                                mean_workload=app.mean_workload,
                                typical_inputs=app.typical_inputs))
    st = scenario.stations[n]
    station = BaseStation(compute_capacity=st.compute_capacity,
                          storage_capacity=st.storage_capacity,
                          transfer_delay=st.transfer_delay,
                          arrival_rates=tuple(float(rates[a, n]) for a in kept))
    return Scenario(stations=(station,), apps=tuple(apps),
                    search_workload=scenario.search_workload)


def solve_noc(scenario: Scenario, rounds: int = 10, caching_iters: int = 10,
              scheduling_iters: int = 10,
              params: PgdParams = PgdParams()) -> SolveReport:
    """No collaboration: each station serves its own arrivals in isolation.

    Every station becomes a single-station scenario (apps reweighted by
    their local arrival share, zero-arrival apps dropped) solved with the
    full machinery; routing is then trivial and the descent only moves the
    CPU split.  The reported objective is the sum of the per-station
    objectives.  The assembled cache/sched is a per-station patchwork for
    inspection; it is not a collaborative evaluation.
    """
    if scenario.num_stations == 1:
        rep = alternating_solve(scenario, rounds, caching_iters,
                                scheduling_iters, params)
        return replace(rep, algorithm="noc")
    t0 = time.perf_counter()
    A, N = scenario.num_apps, scenario.num_stations
    caps = scenario.compute_capacities
    rates = scenario.arrival_rate_matrix

    cache = CacheAssignment.zeros(scenario)
    lam = np.tile(caps / caps.sum(), (A, 1))
    fshare = np.full((A, N), 1.0 / A)
    y = np.zeros((A, N), dtype=np.int8)
    init_sum = 0.0
    final_sum = 0.0
    rounds_completed = 0
    for n in range(N):
        kept = [a for a in range(A) if rates[a, n] > 0.0]
        if not kept:
            continue
        sub = _single_station_scenario(scenario, n, kept)
        rep = alternating_solve(sub, rounds, caching_iters,
                                scheduling_iters, params)
        init_sum += rep.objective_trace[0][3]
        final_sum += rep.final_objective
        rounds_completed = max(rounds_completed, rep.rounds_completed)
        for idx, a in enumerate(kept):
            cache.entries[a][n] = rep.cache.entries[idx][0]
            fshare[a, n] = rep.sched.fshare[idx, 0]
            y[a, n] = rep.sched.y[idx, 0]
        for a in range(A):
            if a not in kept:
                fshare[a, n] = 0.0
    for a in range(A):
        if scenario.total_rates[a] > 0.0:
            lam[a] = rates[a] / scenario.total_rates[a]
    sched = SchedulingState(lam=lam, fshare=fshare, y=y)
    trace: list[TraceRow] = [(0, "init", 0, init_sum), (1, "noc", 1, final_sum)]
    return SolveReport(algorithm="noc", objective_trace=trace, cache=cache,
                       sched=sched, final_objective=final_sum,
                       rounds_completed=rounds_completed,
                       wall_time_s=time.perf_counter() - t0)
