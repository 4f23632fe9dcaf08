"""Per-station cache placement via bisection on the storage-efficiency level.

The marginal value of caching result k of app a at station n, per byte, is
its storage efficiency eps(x).  Results already cached at some other station
("replicated") have constant efficiency -(p/s) * phi lam_n y_n D^t_n: a local
copy only saves the transfer on local hits.  Results cached nowhere else
("exclusive") have eps(x) = (p/s) * G(P_hr), where G sums each station's
sensitivity to the app's total hit rate plus the transfer cost its remote
hits would incur.  eps is non-decreasing in x, so for any level B the set
{eps <= B} is a sorted prefix per app with at most one fractional entry, and
the storage used is monotone in B.  Bisecting B until the used storage meets
the capacity solves the relaxed per-station subproblem; rounding the single
fractional entry per app to 0 restores a binary assignment.
"""
from __future__ import annotations

import math

import numpy as np

from . import _kernels
from .delay import evaluate_objective, evaluate_with_rates
from .errors import (BracketError, DegenerateInput, Infeasible, MalformedInput,
                     StabilityViolation, TooLarge)
from .model import (BINARY_TOL, CacheAssignment, Scenario, SchedulingState,
                    storage_used)

# default level-bisection accuracy (efficiency units, s/byte)
LEVEL_ACCURACY = 1e-9
# absolute tolerance of the scalar inverse bisection, in x units
INVERSE_TOL = 1e-12


def partition_inputs(scenario: Scenario, cache: CacheAssignment,
                     station: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Per app: (exclusive, replicated) input indices relative to station.

    An input is replicated when some other station holds any of its mass.
    """
    out = []
    for a in range(scenario.num_apps):
        x = cache.entries[a]
        peer_sum = x.sum(axis=0) - x[station]
        replicated = np.nonzero(peer_sum > 0.0)[0]
        exclusive = np.nonzero(peer_sum <= 0.0)[0]
        out.append((exclusive, replicated))
    return out


class EfficiencyContext:
    """Frozen view of one station's caching subproblem.

    Holds the scheduling state, the neighbor partition, the p/s-sorted order
    over exclusive inputs with prefix sums, and the constant efficiencies of
    replicated inputs.  All level queries of the solver go through here.
    """

    def __init__(self, scenario: Scenario, cache: CacheAssignment,
                 sched: SchedulingState, station: int):
        self.scenario = scenario
        self.station = station
        self.lam = np.ascontiguousarray(sched.lam, dtype=np.float64)
        self.f = np.ascontiguousarray(sched.cpu_speeds(scenario), dtype=np.float64)
        self.yf = np.ascontiguousarray(sched.y, dtype=np.float64)
        self.dt = np.ascontiguousarray(scenario.transfer_delays, dtype=np.float64)

        A = scenario.num_apps
        self.exclusive: list[np.ndarray] = []     # sorted by p/s desc, index asc
        self.replicated: list[np.ndarray] = []
        self.exc_p: list[np.ndarray] = []
        self.exc_s: list[np.ndarray] = []
        self.ratio: list[np.ndarray] = []
        self.prefix_p: list[np.ndarray] = []      # prefix_p[j] = sum of p before j
        self.prefix_s: list[np.ndarray] = []
        self.base_hit: list[float] = []           # hit mass available from peers
        self.rep_eff: list[np.ndarray] = []
        self.current_x: list[np.ndarray] = []
        self.active: list[bool] = []              # any phi lam y > 0 anywhere

        for a in range(A):
            x = cache.entries[a]
            peers = np.delete(np.arange(scenario.num_stations), station)
            xp = x[peers]
            if np.any((xp > BINARY_TOL) & (xp < 1.0 - BINARY_TOL)):
                raise MalformedInput(f"app {a}: neighbor cache entries not binary")
            peer_sum = xp.sum(axis=0)
            rep = np.nonzero(peer_sum > 0.0)[0]
            exc = np.nonzero(peer_sum <= 0.0)[0]
            p = scenario.match_probs[a]
            s = scenario.result_sizes[a]
            ratio_exc = p[exc] / s[exc]
            order = np.lexsort((exc, -ratio_exc))
            exc = exc[order]
            self.exclusive.append(exc)
            self.replicated.append(rep)
            self.exc_p.append(p[exc])
            self.exc_s.append(s[exc])
            self.ratio.append(ratio_exc[order])
            self.prefix_p.append(np.concatenate(([0.0], np.cumsum(p[exc]))))
            self.prefix_s.append(np.concatenate(([0.0], np.cumsum(s[exc]))))
            self.base_hit.append(float(p[rep].sum()))
            local_c = float(scenario.weights[a] * self.lam[a, station]
                            * self.yf[a, station])
            self.rep_eff.append(-(p[rep] / s[rep]) * (local_c * self.dt[station]))
            self.current_x.append(x[station].copy())
            self.active.append(bool(np.any(
                scenario.weights[a] * self.lam[a] * self.yf[a] > 0.0)))

    def bracket(self, a: int, hit: float) -> float:
        """G(P_hr): hit-rate sensitivity summed over stations, -inf if unstable."""
        sc = self.scenario
        return _kernels.efficiency_bracket(
            hit, self.station, self.lam[a], self.yf[a], self.f[a], self.dt,
            float(sc.total_rates[a]), float(sc.workloads[a]),
            sc.search_workload, float(sc.weights[a]))

    def exclusive_eff(self, a: int, j: int, xv: float) -> float:
        """eps of the j-th sorted exclusive input with the prefix before it
        fully cached, the suffix after it empty, and its own value xv."""
        r = self.ratio[a][j]
        if r == 0.0:
            return 0.0
        hit = self.base_hit[a] + self.prefix_p[a][j] + self.exc_p[a][j] * xv
        return r * self.bracket(a, hit)

    def efficiency_floor(self) -> float:
        """Level certainly below every finite efficiency, with 1% margin."""
        cands = []
        for a in range(self.scenario.num_apps):
            if not self.active[a]:
                continue
            cands.extend(self.rep_eff[a].tolist())
            if len(self.exclusive[a]):
                for hit in (self.base_hit[a],
                            self.base_hit[a] + self.prefix_p[a][-1]):
                    g = self.bracket(a, hit)
                    if math.isfinite(g):
                        vals = self.ratio[a] * g
                        cands.extend(vals.tolist())
        if not cands:
            return 0.0
        lo = min(cands)
        if lo >= 0.0:
            return 0.0
        return 1.01 * lo


def storage_efficiency(ctx: EfficiencyContext, a: int, k: int, xv: float) -> float:
    """eps for input k of app a, other current-station entries held as-is."""
    rep_pos = np.nonzero(ctx.replicated[a] == k)[0]
    if len(rep_pos):
        return float(ctx.rep_eff[a][rep_pos[0]])
    pos = np.nonzero(ctx.exclusive[a] == k)[0]
    if not len(pos):
        raise MalformedInput(f"input {k} not in app {a}'s catalog")
    j = int(pos[0])
    r = ctx.ratio[a][j]
    if r == 0.0:
        return 0.0
    x_cur = ctx.current_x[a][ctx.exclusive[a]]
    hit = ctx.base_hit[a] + float(ctx.exc_p[a] @ x_cur) \
        - ctx.exc_p[a][j] * x_cur[j] + ctx.exc_p[a][j] * xv
    g = ctx.bracket(a, hit)
    if g == -math.inf:
        raise StabilityViolation("hit rate below the stability threshold")
    return float(r * g)


def solve_inverse_efficiency(ctx: EfficiencyContext, a: int, j: int,
                             level: float, tol: float = INVERSE_TOL) -> float:
    """Smallest x in [0, 1] with eps(x) = level, by bisection.

    The prefix before sorted position j is fully cached, the suffix empty.
    """
    e0 = ctx.exclusive_eff(a, j, 0.0)
    e1 = ctx.exclusive_eff(a, j, 1.0)
    if e0 > level or e1 < level:
        raise BracketError(f"level {level} outside [{e0}, {e1}]")
    if e0 >= level:
        return 0.0
    lo, hi = 0.0, 1.0
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if ctx.exclusive_eff(a, j, mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi


def _locate_level(ctx: EfficiencyContext, a: int, level: float) -> tuple[int, float]:
    """(m, xm): sorted positions < m get 1, position m gets xm, rest 0.

    m = K0 means the whole exclusive class is cached.  Relies on the
    interleaved efficiency sequence eps_0(0) <= eps_0(1) <= eps_1(0) <= ...
    being non-decreasing wherever it is negative.
    """
    k0 = len(ctx.exclusive[a])
    if ctx.exclusive_eff(a, 0, 0.0) > level:
        return 0, 0.0
    if ctx.exclusive_eff(a, k0 - 1, 1.0) < level:
        return k0, 0.0
    lo, hi = 0, k0 - 1
    # largest position whose empty-value efficiency is still <= level
    while lo < hi:
        mid = (lo + hi + 1) // 2
        if ctx.exclusive_eff(a, mid, 0.0) <= level:
            lo = mid
        else:
            hi = mid - 1
    if ctx.exclusive_eff(a, lo, 1.0) < level:
        return lo + 1, 0.0
    return lo, solve_inverse_efficiency(ctx, a, lo, level)


def g_of_B(ctx: EfficiencyContext, level: float) -> list[np.ndarray]:
    """Station rows (one per app) attaining efficiency level `level`.

    Replicated inputs are cached iff their constant efficiency is <= level
    and strictly negative; over the sorted exclusive class a boundary
    position is located by bisection and solved for its fractional value.
    Zero-benefit inputs are never cached.
    """
    rows = []
    for a in range(ctx.scenario.num_apps):
        x = np.zeros(ctx.scenario.catalog_size(a))
        if not ctx.active[a]:
            rows.append(x)
            continue
        re = ctx.rep_eff[a]
        chosen = ctx.replicated[a][(re <= level) & (re < 0.0)]
        x[chosen] = 1.0
        if len(ctx.exclusive[a]):
            m, xm = _locate_level(ctx, a, level)
            x[ctx.exclusive[a][:m]] = 1.0
            if m < len(ctx.exclusive[a]) and xm > 0.0:
                x[ctx.exclusive[a][m]] = xm
        rows.append(x)
    return rows


def _rows_storage(scenario: Scenario, rows: list[np.ndarray]) -> float:
    used = 0.0
    for a, row in enumerate(rows):
        used += float(row @ scenario.result_sizes[a])
    return used


def solve_caching_bs(scenario: Scenario, cache: CacheAssignment,
                     sched: SchedulingState, station: int,
                     accuracy: float = LEVEL_ACCURACY
                     ) -> tuple[list[np.ndarray], float]:
    """Relaxed cache placement for one station under frozen scheduling.

    Bisects the level B on [floor, 0] against the storage constraint and
    returns the station rows together with the level actually used.  Falls
    back to the last certainly-fitting level if the midpoint overshoots.
    """
    ctx = EfficiencyContext(scenario, cache, sched, station)
    cap = float(scenario.storage_capacities[station])
    floor = ctx.efficiency_floor()
    if floor == 0.0:
        return [np.zeros(scenario.catalog_size(a))
                for a in range(scenario.num_apps)], 0.0
    b_l, b_r = floor, 0.0
    while b_r - b_l >= accuracy:
        b_m = 0.5 * (b_l + b_r)
        if _rows_storage(scenario, g_of_B(ctx, b_m)) < cap:
            b_l = b_m
        else:
            b_r = b_m
    level = 0.5 * (b_l + b_r)
    rows = g_of_B(ctx, level)
    if _rows_storage(scenario, rows) > cap:
        level = b_l
        rows = g_of_B(ctx, level)
    return rows, level


def efficiencies_at_solution(ctx: EfficiencyContext,
                             rows: list[np.ndarray]) -> list[np.ndarray]:
    """Every input's efficiency evaluated at the hit rate the rows induce.

    Ordered by original input index per app; used to check the optimality
    conditions (cached iff efficiency below the level, one fractional entry
    at the level, capacity tight when the level is interior).
    """
    out = []
    for a in range(ctx.scenario.num_apps):
        eff = np.zeros(ctx.scenario.catalog_size(a))
        eff[ctx.replicated[a]] = ctx.rep_eff[a]
        if len(ctx.exclusive[a]):
            hit = ctx.base_hit[a] + float(ctx.exc_p[a] @ rows[a][ctx.exclusive[a]])
            g = ctx.bracket(a, hit)
            eff[ctx.exclusive[a]] = ctx.ratio[a] * g
        out.append(eff)
    return out


def round_to_binary(rows: list[np.ndarray],
                    atol: float = BINARY_TOL) -> list[np.ndarray]:
    """Drop the (at most one per app) fractional entry to 0."""
    out = []
    for a, row in enumerate(rows):
        r = row.copy()
        frac = (r > atol) & (r < 1.0 - atol)
        if frac.sum() > 1:
            raise MalformedInput(f"app {a}: {int(frac.sum())} fractional entries")
        r[frac] = 0.0
        out.append(np.where(r > 0.5, 1.0, 0.0))
    return out


def theorem3_ratio(d_zero: float, d_rounded: float, d_star: float,
                   s_max: float, apps_cached: int,
                   storage_capacity: float) -> tuple[float, float]:
    """Rounding quality (D0-Dhat)/(D0-D*) and its a-priori lower bound."""
    if d_zero == d_star:
        raise DegenerateInput("empty-cache delay equals the relaxed optimum")
    if storage_capacity <= 0.0:
        raise DegenerateInput("bound undefined without storage")
    ratio = (d_zero - d_rounded) / (d_zero - d_star)
    bound = 1.0 - s_max * apps_cached / storage_capacity
    return ratio, bound


def sweep_all_stations(scenario: Scenario, cache: CacheAssignment,
                       sched: SchedulingState, passes: int,
                       accuracy: float = LEVEL_ACCURACY
                       ) -> tuple[CacheAssignment, SchedulingState, list[float]]:
    """Station-by-station cache improvement under frozen (lam, fshare).

    Each station solve is rounded and written back only if the objective
    (with search flags refreshed) does not increase, which makes the
    objective non-increasing by construction.  Returns the per-pass
    objective values; stops early once a full pass changes nothing.
    """
    cache = cache.copy()
    sched = sched.copy()
    res = evaluate_objective(scenario, cache, sched)
    if not res.feasible:
        raise StabilityViolation("sweep started from an unstable point")
    sched.y = res.y
    obj = res.objective
    pass_objs: list[float] = []
    for _ in range(passes):
        changed = False
        for n in range(scenario.num_stations):
            rows, _level = solve_caching_bs(scenario, cache, sched, n, accuracy)
            rows_bin = round_to_binary(rows)
            if all(np.array_equal(rows_bin[a], cache.entries[a][n])
                   for a in range(scenario.num_apps)):
                continue
            cand = cache.with_station(n, rows_bin)
            if storage_used(scenario, cand, n) > scenario.storage_capacities[n]:
                continue
            res2 = evaluate_objective(scenario, cand, sched)
            if res2.feasible and res2.objective <= obj:
                cache = cand
                sched.y = res2.y
                assert res2.objective <= obj
                obj = res2.objective
                changed = True
        pass_objs.append(obj)
        if not changed:
            break
    return cache, sched, pass_objs


def relaxed_objective(scenario: Scenario, cache: CacheAssignment,
                      sched: SchedulingState, station: int,
                      rows: list[np.ndarray],
                      frozen_y: np.ndarray | None = None) -> float | None:
    """Objective of a fractional station assignment under the smooth hit model.

    The app hit rate is the peers' mass plus the station's fractional
    exclusive mass (replicated entries add nothing new); neighbor rates
    follow as total minus local.  Coincides with the binary evaluation
    whenever the rows are binary.  frozen_y keeps the given search flags
    instead of re-choosing them per branch delay.
    """
    cand = cache.with_station(station, rows, mode="fractional")
    A = scenario.num_apps
    total = np.zeros(A)
    local = np.zeros((A, scenario.num_stations))
    for a in range(A):
        x = cand.entries[a]
        p = scenario.match_probs[a]
        peer_sum = x.sum(axis=0) - x[station]
        exc = peer_sum <= 0.0
        total[a] = p[~exc].sum() + float(p[exc] @ x[station, exc])
        local[a] = x @ p
    neighbor = np.maximum(total[:, None] - local, 0.0)
    res = evaluate_with_rates(scenario, total, neighbor, sched.lam, sched.fshare,
                              y=frozen_y)
    return res.objective


def brute_force_cache_oracle(scenario: Scenario, cache: CacheAssignment,
                             sched: SchedulingState, station: int,
                             max_items: int = 22
                             ) -> tuple[list[np.ndarray], float]:
    """Exhaustive optimum over binary station rows (small instances only).

    Enumerates every subset of the station's candidate entries that fits the
    storage capacity, evaluates the true objective with search flags
    re-chosen, and returns the best rows with their objective.
    """
    items = [(a, k) for a in range(scenario.num_apps)
             for k in range(scenario.catalog_size(a))]
    t = len(items)
    if t > max_items:
        raise TooLarge(f"{t} items exceeds the enumeration cap {max_items}")
    sizes = np.array([scenario.result_sizes[a][k] for a, k in items])
    cap = scenario.storage_capacities[station]

    masks = np.arange(1 << t, dtype=np.int64)
    bits = (masks[:, None] >> np.arange(t)[None, :]) & 1
    fits = np.nonzero(bits @ sizes <= cap)[0]

    best_obj = None
    best_rows = None
    for mask in fits:
        rows = [np.zeros(scenario.catalog_size(a)) for a in range(scenario.num_apps)]
        for pos, (a, k) in enumerate(items):
            if bits[mask, pos]:
                rows[a][k] = 1.0
        cand = cache.with_station(station, rows)
        res = evaluate_objective(scenario, cand, sched)
        if res.feasible and (best_obj is None or res.objective < best_obj):
            best_obj = res.objective
            best_rows = rows
    if best_obj is None:
        raise Infeasible("no stable cache subset exists at this station")
    return best_rows, best_obj
