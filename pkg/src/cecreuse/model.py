"""Network model: stations, applications, decision containers, feasibility.

Internal units are CPU cycles and cycles/s for work, bytes for storage and
seconds for time.  A scenario holds N base stations and A applications; each
application has a catalog of typical inputs whose results can be cached.

Decision variables:
  cache entries  x[a][n, k] in [0, 1]  result k of app a kept at station n
  search flags   y[a, n] in {0, 1}     station searches its cache for app a
  load fractions lam[a, n] in [0, 1]   share of app a's tasks sent to n
  cpu shares     fshare[a, n] in [0,1] share of station n's CPU given to a
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DimensionMismatch, MalformedInput

# absolute tolerance on the two simplex equality constraints
EQUALITY_TOL = 1e-9
# entries closer than this to 0 or 1 count as exactly binary
BINARY_TOL = 1e-12


@dataclass(frozen=True)
class TypicalInput:
    """One cacheable result: how often fresh tasks match it, and its size."""

    match_prob: float
    result_size: float  # bytes


@dataclass(frozen=True)
class Application:
    weight: float           # relative importance in the objective
    mean_workload: float    # cycles per full computation
    typical_inputs: tuple[TypicalInput, ...]


@dataclass(frozen=True)
class BaseStation:
    compute_capacity: float        # cycles/s
    storage_capacity: float        # bytes
    transfer_delay: float          # s, one result transfer from a peer
    arrival_rates: tuple[float, ...]  # tasks/s per app


@dataclass(frozen=True)
class Scenario:
    stations: tuple[BaseStation, ...]
    apps: tuple[Application, ...]
    search_workload: float  # cycles to scan a local cache, shared by all apps

    def __post_init__(self):
        if not self.stations:
            raise MalformedInput("scenario needs at least one station")
        if not self.apps:
            raise MalformedInput("scenario needs at least one app")
        if self.search_workload < 0:
            raise MalformedInput("search workload must be nonnegative")
        for n, st in enumerate(self.stations):
            if st.compute_capacity <= 0:
                raise MalformedInput(f"station {n}: compute capacity must be positive")
            if st.storage_capacity < 0:
                raise MalformedInput(f"station {n}: storage capacity must be nonnegative")
            if st.transfer_delay < 0:
                raise MalformedInput(f"station {n}: transfer delay must be nonnegative")
            if len(st.arrival_rates) != len(self.apps):
                raise DimensionMismatch(
                    f"station {n}: {len(st.arrival_rates)} arrival rates for "
                    f"{len(self.apps)} apps"
                )
            if any(r < 0 for r in st.arrival_rates):
                raise MalformedInput(f"station {n}: arrival rates must be nonnegative")
        for a, app in enumerate(self.apps):
            if app.weight < 0:
                raise MalformedInput(f"app {a}: weight must be nonnegative")
            if app.mean_workload <= 0:
                raise MalformedInput(f"app {a}: mean workload must be positive")
            total_p = 0.0
            for k, ti in enumerate(app.typical_inputs):
                if not 0.0 <= ti.match_prob <= 1.0:
                    raise MalformedInput(f"app {a} input {k}: match prob outside [0, 1]")
                if ti.result_size <= 0:
                    raise MalformedInput(f"app {a} input {k}: result size must be positive")
                total_p += ti.match_prob
            if total_p > 1.0 + 1e-12:
                raise MalformedInput(f"app {a}: match probabilities sum to {total_p} > 1")

    # -- cached array views ------------------------------------------------

    @property
    def num_stations(self) -> int:
        return len(self.stations)

    @property
    def num_apps(self) -> int:
        return len(self.apps)

    @cached_property
    def compute_capacities(self) -> np.ndarray:
        v = np.array([st.compute_capacity for st in self.stations], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def storage_capacities(self) -> np.ndarray:
        v = np.array([st.storage_capacity for st in self.stations], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def transfer_delays(self) -> np.ndarray:
        v = np.array([st.transfer_delay for st in self.stations], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def arrival_rate_matrix(self) -> np.ndarray:
        """Shape (A, N): tasks/s of app a arriving at station n."""
        v = np.array(
            [[st.arrival_rates[a] for st in self.stations] for a in range(self.num_apps)],
            dtype=np.float64,
        )
        v.setflags(write=False)
        return v

    @cached_property
    def total_rates(self) -> np.ndarray:
        v = self.arrival_rate_matrix.sum(axis=1)
        v.setflags(write=False)
        return v

    @cached_property
    def weights(self) -> np.ndarray:
        v = np.array([app.weight for app in self.apps], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def workloads(self) -> np.ndarray:
        v = np.array([app.mean_workload for app in self.apps], dtype=np.float64)
        v.setflags(write=False)
        return v

    @cached_property
    def match_probs(self) -> tuple[np.ndarray, ...]:
        out = []
        for app in self.apps:
            v = np.array([ti.match_prob for ti in app.typical_inputs], dtype=np.float64)
            v.setflags(write=False)
            out.append(v)
        return tuple(out)

    @cached_property
    def result_sizes(self) -> tuple[np.ndarray, ...]:
        out = []
        for app in self.apps:
            v = np.array([ti.result_size for ti in app.typical_inputs], dtype=np.float64)
            v.setflags(write=False)
            out.append(v)
        return tuple(out)

    def catalog_size(self, a: int) -> int:
        return len(self.apps[a].typical_inputs)


def total_arrival_rate(scenario: Scenario, a: int) -> float:
    """Network-wide arrival rate of app a (tasks/s)."""
    return float(scenario.total_rates[a])


# -- decision containers ---------------------------------------------------


class CacheAssignment:
    """Per-app cache matrices x[a] of shape (N, K_a) with entries in [0, 1].

    ``mode`` is "binary" or "fractional"; the relaxed per-station solver
    produces fractional assignments with at most one fractional entry per app.
    """

    __slots__ = ("entries", "mode")

    def __init__(self, entries: list[np.ndarray], mode: str = "binary"):
        if mode not in ("binary", "fractional"):
            raise MalformedInput(f"unknown cache mode {mode!r}")
        self.entries = [np.asarray(x, dtype=np.float64) for x in entries]
        self.mode = mode
        for a, x in enumerate(self.entries):
            if x.ndim != 2:
                raise DimensionMismatch(f"app {a}: cache matrix must be 2-D")
            if np.any(x < -BINARY_TOL) or np.any(x > 1.0 + BINARY_TOL):
                raise MalformedInput(f"app {a}: cache entries outside [0, 1]")

    @classmethod
    def zeros(cls, scenario: Scenario) -> "CacheAssignment":
        return cls(
            [np.zeros((scenario.num_stations, scenario.catalog_size(a)))
             for a in range(scenario.num_apps)],
            mode="binary",
        )

    def copy(self) -> "CacheAssignment":
        return CacheAssignment([x.copy() for x in self.entries], mode=self.mode)

    def with_station(self, n: int, station_rows: list[np.ndarray],
                     mode: str | None = None) -> "CacheAssignment":
        """New assignment with station n's row replaced in every app matrix."""
        new = [x.copy() for x in self.entries]
        for a, row in enumerate(station_rows):
            if row.shape != (new[a].shape[1],):
                raise DimensionMismatch(f"app {a}: station row has wrong length")
            new[a][n, :] = row
        return CacheAssignment(new, mode=self.mode if mode is None else mode)

    def is_binary(self, tol: float = BINARY_TOL) -> bool:
        for x in self.entries:
            if np.any((x > tol) & (x < 1.0 - tol)):
                return False
        return True


@dataclass
class SchedulingState:
    """Workload fractions, CPU shares and cache-search flags, all (A, N)."""

    lam: np.ndarray              # load fractions, rows sum to 1 per app
    fshare: np.ndarray           # cpu shares, columns sum to 1 per station
    y: np.ndarray                # search flags in {0, 1}

    def __post_init__(self):
        self.lam = np.asarray(self.lam, dtype=np.float64)
        self.fshare = np.asarray(self.fshare, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int8)
        if not (self.lam.shape == self.fshare.shape == self.y.shape):
            raise DimensionMismatch("lam, fshare and y must share the (A, N) shape")

    def copy(self) -> "SchedulingState":
        return SchedulingState(self.lam.copy(), self.fshare.copy(), self.y.copy())

    def cpu_speeds(self, scenario: Scenario) -> np.ndarray:
        """Absolute CPU speed (cycles/s) per (app, station)."""
        return self.fshare * scenario.compute_capacities[None, :]


@dataclass(frozen=True)
class HitRateTable:
    """Hit-rate summary for one cache assignment.

    ``local[a, n]``    probability a task of app a hits station n's own cache
    ``neighbor[a, n]`` probability it misses locally but some peer caches it
    ``total[a]``       probability the result is cached somewhere; for binary
                       assignments total = local + neighbor at every station
    """

    local: np.ndarray
    neighbor: np.ndarray
    total: np.ndarray


def compute_hit_rates(scenario: Scenario, cache: CacheAssignment) -> HitRateTable:
    """Local, neighbor and total hit rates for every (app, station).

    With fractional entries the peer indicator applies to the real-valued
    sum (any positive mass at a peer counts as available there).
    """
    if len(cache.entries) != scenario.num_apps:
        raise DimensionMismatch("cache has wrong number of apps")
    nst = scenario.num_stations
    local = np.zeros((scenario.num_apps, nst))
    neighbor = np.zeros((scenario.num_apps, nst))
    total = np.zeros(scenario.num_apps)
    for a in range(scenario.num_apps):
        x = cache.entries[a]
        if x.shape != (nst, scenario.catalog_size(a)):
            raise DimensionMismatch(f"app {a}: cache matrix shape {x.shape}")
        p = scenario.match_probs[a]
        local[a, :] = x @ p
        col_sum = x.sum(axis=0)
        peer_sum = col_sum[None, :] - x
        peer_has = (peer_sum > 0.0).astype(np.float64)
        neighbor[a, :] = ((1.0 - x) * peer_has) @ p
        total[a] = p @ (col_sum > 0.0).astype(np.float64)
    local.setflags(write=False)
    neighbor.setflags(write=False)
    total.setflags(write=False)
    return HitRateTable(local=local, neighbor=neighbor, total=total)


def storage_used(scenario: Scenario, cache: CacheAssignment, n: int) -> float:
    """Bytes occupied at station n (fractional entries count pro rata)."""
    used = 0.0
    for a in range(scenario.num_apps):
        used += float(cache.entries[a][n, :] @ scenario.result_sizes[a])
    return used


# -- feasibility -----------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    constraint: str          # storage | workload_sum | cpu_sum | stability | range
    app: int | None
    station: int | None
    magnitude: float


def validate(scenario: Scenario, cache: CacheAssignment,
             sched: SchedulingState) -> list[Violation]:
    """All constraint violations of a candidate decision, empty if feasible.

    Checks storage capacities, the two simplex equalities, variable ranges,
    binary flags, and strict queue stability of the selected service branch
    wherever a station carries traffic.
    """
    out: list[Violation] = []
    A, N = scenario.num_apps, scenario.num_stations
    if sched.lam.shape != (A, N):
        raise DimensionMismatch("scheduling state has wrong shape")

    for a in range(A):
        x = cache.entries[a]
        bad = (x < -BINARY_TOL) | (x > 1.0 + BINARY_TOL)
        if cache.mode == "binary":
            bad |= (x > BINARY_TOL) & (x < 1.0 - BINARY_TOL)
        for n in np.unique(np.nonzero(bad)[0]):
            out.append(Violation("range", a, int(n), float(np.max(np.abs(x[n] - 0.5)))))

    for n in range(N):
        used = storage_used(scenario, cache, n)
        cap = scenario.storage_capacities[n]
        if used > cap + 1e-6:  # bytes; sub-byte slack only
            out.append(Violation("storage", None, n, used - cap))

    for arr, lo, hi, tag in ((sched.lam, 0.0, 1.0, "range"), (sched.fshare, 0.0, 1.0, "range")):
        bad = (arr < lo - BINARY_TOL) | (arr > hi + BINARY_TOL)
        for a, n in zip(*np.nonzero(bad)):
            out.append(Violation(tag, int(a), int(n), float(arr[a, n])))
    bad_y = (sched.y != 0) & (sched.y != 1)
    for a, n in zip(*np.nonzero(bad_y)):
        out.append(Violation("range", int(a), int(n), float(sched.y[a, n])))

    row_sums = sched.lam.sum(axis=1)
    for a in range(A):
        if abs(row_sums[a] - 1.0) > EQUALITY_TOL:
            out.append(Violation("workload_sum", a, None, float(row_sums[a] - 1.0)))
    col_sums = sched.fshare.sum(axis=0)
    for n in range(N):
        if abs(col_sums[n] - 1.0) > EQUALITY_TOL:
            out.append(Violation("cpu_sum", None, n, float(col_sums[n] - 1.0)))

    rates = compute_hit_rates(scenario, cache)
    f = sched.cpu_speeds(scenario)
    for a in range(A):
        wa = scenario.workloads[a]
        ws = scenario.search_workload
        for n in range(N):
            load = sched.lam[a, n] * scenario.total_rates[a]
            if load <= 0.0:
                continue
            if f[a, n] <= 0.0:
                out.append(Violation("stability", a, n, load))
                continue
            if sched.y[a, n]:
                mu = f[a, n] / (ws + (1.0 - rates.total[a]) * wa)
            else:
                mu = f[a, n] / wa
            if not load < mu:
                out.append(Violation("stability", a, n, load - mu))
    return out


# -- JSON schema -----------------------------------------------------------


def scenario_to_dict(scenario: Scenario) -> dict:
    return {
        "search_workload_cycles": scenario.search_workload,
        "stations": [
            {
                "compute_capacity_hz": st.compute_capacity,
                "storage_capacity_bytes": st.storage_capacity,
                "transfer_delay_s": st.transfer_delay,
                "arrival_rates": list(st.arrival_rates),
            }
            for st in scenario.stations
        ],
        "apps": [
            {
                "weight": app.weight,
                "mean_workload_cycles": app.mean_workload,
                "typical_inputs": [
                    {"match_prob": ti.match_prob, "result_size_bytes": ti.result_size}
                    for ti in app.typical_inputs
                ],
            }
            for app in scenario.apps
        ],
    }


def scenario_from_dict(data: dict) -> Scenario:
    try:
        stations = tuple(
            BaseStation(
                compute_capacity=float(st["compute_capacity_hz"]),
                storage_capacity=float(st["storage_capacity_bytes"]),
                transfer_delay=float(st["transfer_delay_s"]),
                arrival_rates=tuple(float(r) for r in st["arrival_rates"]),
            )
            for st in data["stations"]
        )
        apps = tuple(
            Application(
                weight=float(app["weight"]),
                mean_workload=float(app["mean_workload_cycles"]),
                typical_inputs=tuple(
                    TypicalInput(
                        match_prob=float(ti["match_prob"]),
                        result_size=float(ti["result_size_bytes"]),
                    )
                    for ti in app["typical_inputs"]
                ),
            )
            for app in data["apps"]
        )
        return Scenario(
            stations=stations,
            apps=apps,
            search_workload=float(data["search_workload_cycles"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedInput(f"bad scenario document: {exc}") from exc


def save_scenario(scenario: Scenario, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(scenario_to_dict(scenario), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_dict(json.load(fh))
