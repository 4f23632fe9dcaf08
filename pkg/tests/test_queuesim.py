"""Discrete-event queue against the closed-form means."""
import pytest

from cecreuse import (MalformedInput, QueueSimConfig, UnstableConfig,
                      analytic_mean, compare_to_analytic, simulate)


def cfg(**kw):
    base = dict(arrival_rate=5.0, cpu=2e9, app_workload=2e8,
                search_workload=2.5e7, hit_rate=0.0, mode="no_cache",
                num_tasks=200_000, rng_seed=7)
    base.update(kw)
    return QueueSimConfig(**base)


def test_single_task_is_exact_service():
    # every task hits: deterministic service ws / cpu, no queueing
    r = simulate(cfg(arrival_rate=0.0, mode="with_cache", hit_rate=1.0,
                     search_workload=5e7))
    assert r.mean_sojourn == 5e7 / 2e9
    assert r.half_width_95 == 0.0 and r.tasks_counted == 1


def test_mm1_matches_analytic():
    c = cfg()  # mu0 = 10/s, arrival 5/s -> sojourn 0.2 s
    assert analytic_mean(c) == pytest.approx(0.2)
    r = simulate(c)
    assert abs(r.mean_sojourn - 0.2) <= 2.0 * r.half_width_95
    assert compare_to_analytic(c) < 0.025


def test_md1_all_hits_matches_analytic():
    c = cfg(arrival_rate=20.0, mode="with_cache", hit_rate=1.0,
            search_workload=5e7, rng_seed=11)
    assert analytic_mean(c) == pytest.approx(0.0375)
    r = simulate(c)
    assert abs(r.mean_sojourn - 0.0375) <= 2.0 * r.half_width_95
    assert compare_to_analytic(c) < 0.01


def test_mixed_service_accuracy():
    c = cfg(arrival_rate=6.0, mode="with_cache", hit_rate=0.5, rng_seed=3)
    assert compare_to_analytic(c) < 0.025


def test_determinism():
    a = simulate(cfg(rng_seed=123))
    b = simulate(cfg(rng_seed=123))
    assert a == b
    c = simulate(cfg(rng_seed=124))
    assert c.mean_sojourn != a.mean_sojourn


def test_unstable_raises():
    with pytest.raises(UnstableConfig):
        simulate(cfg(arrival_rate=10.0))  # rho = 1 exactly
    with pytest.raises(UnstableConfig):
        simulate(cfg(arrival_rate=40.0, mode="with_cache", hit_rate=0.2))


def test_default_warmup_drops_ten_percent():
    r = simulate(cfg(num_tasks=50_000))
    assert r.tasks_counted == 50_000 - 5_000
    r2 = simulate(cfg(num_tasks=50_000, warmup_tasks=123))
    assert r2.tasks_counted == 50_000 - 123


def test_malformed_inputs():
    with pytest.raises(MalformedInput):
        simulate(cfg(mode="half"))
    with pytest.raises(MalformedInput):
        simulate(cfg(hit_rate=1.5, mode="with_cache"))
    with pytest.raises(MalformedInput):
        simulate(cfg(cpu=0.0))
    with pytest.raises(MalformedInput):
        simulate(cfg(warmup_tasks=200_000))
