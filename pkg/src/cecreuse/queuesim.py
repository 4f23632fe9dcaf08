"""Single-server FCFS queue simulation against the analytic delay forms.

Arrivals are Poisson; service times follow the two-branch model: without
cache searching the service is an exponential workload over the CPU speed
(M/M/1), with searching every task pays the deterministic search workload
and with probability P_hr skips computation entirely (M/G/1 with an atom at
w^s / f).  Waits follow the Lindley recursion; the mean sojourn over the
post-warmup tasks carries a batch-means 95% confidence interval.

RNG: numpy PCG64 seeded through SeedSequence, exponentials via inverse CDF,
draws in the fixed order interarrivals, hit indicators, workloads.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _kernels
from .delay import delay_no_cache, delay_with_cache, service_rates
from .errors import MalformedInput, UnstableConfig

NUM_BATCHES = 32


@dataclass(frozen=True)
class QueueSimConfig:
    """One (app, station) queue in isolation."""
    arrival_rate: float          # tasks/s
    cpu: float                   # cycles/s
    app_workload: float          # w^a, cycles
    search_workload: float       # w^s, cycles
    hit_rate: float              # P_hr
    mode: str                    # "no_cache" | "with_cache"
    num_tasks: int
    warmup_tasks: int | None = None   # None -> 10% of num_tasks
    rng_seed: int = 0


@dataclass(frozen=True)
class SimResult:
    mean_sojourn: float
    half_width_95: float
    tasks_counted: int


def _mean_service(cfg: QueueSimConfig) -> float:
    if cfg.mode == "no_cache":
        return cfg.app_workload / cfg.cpu
    return (cfg.search_workload
            + (1.0 - cfg.hit_rate) * cfg.app_workload) / cfg.cpu


def _draw_services(cfg: QueueSimConfig, rng: np.random.Generator,
                   n: int) -> np.ndarray:
    if cfg.mode == "with_cache":
        hits = rng.random(n) < cfg.hit_rate
    else:
        hits = np.zeros(n, dtype=bool)
    workloads = -cfg.app_workload * np.log1p(-rng.random(n))
    if cfg.mode == "no_cache":
        return workloads / cfg.cpu
    cycles = cfg.search_workload + np.where(hits, 0.0, workloads)
    return cycles / cfg.cpu


def simulate(cfg: QueueSimConfig) -> SimResult:
    """Mean sojourn time with a batch-means 95% half width.

    A zero arrival rate injects a single task whose sojourn is exactly its
    service time (no queueing).
    """
    if cfg.mode not in ("no_cache", "with_cache"):
        raise MalformedInput(f"unknown mode {cfg.mode!r}")
    if not 0.0 <= cfg.hit_rate <= 1.0:
        raise MalformedInput("hit rate outside [0, 1]")
    if cfg.cpu <= 0.0 or cfg.app_workload <= 0.0 or cfg.search_workload < 0.0:
        raise MalformedInput("cpu and workloads must be positive")
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence(cfg.rng_seed)))

    if cfg.arrival_rate == 0.0:
        service = float(_draw_services(cfg, rng, 1)[0])
        return SimResult(mean_sojourn=service, half_width_95=0.0, tasks_counted=1)

    if cfg.arrival_rate * _mean_service(cfg) >= 1.0:
        raise UnstableConfig("utilization at or above 1")
    warmup = cfg.num_tasks // 10 if cfg.warmup_tasks is None else cfg.warmup_tasks
    if not 0 <= warmup < cfg.num_tasks:
        raise MalformedInput("need num_tasks > warmup_tasks >= 0")

    n = cfg.num_tasks
    interarrivals = -np.log1p(-rng.random(n)) / cfg.arrival_rate
    services = _draw_services(cfg, rng, n)
    waits = _kernels.queue_waits(
        np.ascontiguousarray(interarrivals), np.ascontiguousarray(services))
    sojourns = np.asarray(waits) + services

    counted = sojourns[warmup:]
    mean = float(counted.mean())
    if counted.size < 2:
        return SimResult(mean_sojourn=mean, half_width_95=0.0,
                         tasks_counted=int(counted.size))
    batches = min(NUM_BATCHES, counted.size)
    size = counted.size // batches
    bm = counted[:batches * size].reshape(batches, size).mean(axis=1)
    hw = float(stats.t.ppf(0.975, batches - 1) * bm.std(ddof=1) / np.sqrt(batches))
    return SimResult(mean_sojourn=mean, half_width_95=hw,
                     tasks_counted=int(counted.size))


def analytic_mean(cfg: QueueSimConfig) -> float:
    """Closed-form mean sojourn for the configured branch."""
    rates = service_rates(cfg.cpu, cfg.app_workload, cfg.search_workload,
                          cfg.hit_rate)
    if cfg.mode == "no_cache":
        return delay_no_cache(1.0, cfg.arrival_rate, rates.mu0)
    return delay_with_cache(1.0, cfg.arrival_rate, rates.mu0, rates.mu1,
                            cfg.hit_rate)


def compare_to_analytic(cfg: QueueSimConfig) -> float:
    """|simulated mean - analytic mean| / analytic mean."""
    analytic = analytic_mean(cfg)
    sim = simulate(cfg)
    return abs(sim.mean_sojourn - analytic) / analytic
