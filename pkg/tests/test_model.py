"""Scenario model: hit rates, storage accounting, feasibility, serialization."""
import numpy as np
import pytest

from cecreuse import (CacheAssignment, DimensionMismatch, MalformedInput,
                      SchedulingState, compute_hit_rates, load_scenario,
                      save_scenario, storage_used, total_arrival_rate, validate)
from cecreuse.solver import greedy_cache, solve_greedy

from conftest import build_scenario, full_cache, uniform_state


def test_total_arrival_rate_zero_and_identity():
    sc = build_scenario((1e9,), (1e9,), (0.01,), ((0.0,),),
                        [(1.0, 1e8, [(0.1, 1e5)])])
    assert total_arrival_rate(sc, 0) == 0.0
    sc = build_scenario((1e9,), (1e9,), (0.01,), ((1.5,),),
                        [(1.0, 1e8, [(0.1, 1e5)])])
    assert total_arrival_rate(sc, 0) == 1.5


def test_total_arrival_rate_sums_over_stations():
    sc = build_scenario((1e9,) * 3, (1e9,) * 3, (0.01,) * 3,
                        ((0.5,), (1.0,), (1.5,)),
                        [(1.0, 1e8, [(0.1, 1e5)])])
    assert total_arrival_rate(sc, 0) == pytest.approx(3.0)


def test_hit_rates_empty_cache(two_station_one_app):
    rates = compute_hit_rates(two_station_one_app,
                              CacheAssignment.zeros(two_station_one_app))
    assert not rates.local.any()
    assert not rates.neighbor.any()
    assert not rates.total.any()


def test_hit_rates_single_station_full_cache():
    sc = build_scenario((1e9,), (1e9,), (0.01,), ((1.0,),),
                        [(1.0, 1e8, [(0.2, 1e4), (0.3, 1e4)])])
    rates = compute_hit_rates(sc, full_cache(sc))
    assert rates.local[0, 0] == pytest.approx(0.5)
    assert rates.neighbor[0, 0] == 0.0
    assert rates.total[0] == pytest.approx(0.5)


def test_hit_rates_two_station_catalog_split(two_station_one_app):
    # p = (0.2, 0.3, 0.1); station 0 holds items 0 and 2, station 1 items 1, 2
    cache = CacheAssignment([np.array([[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]])])
    rates = compute_hit_rates(two_station_one_app, cache)
    assert rates.local[0, 0] == pytest.approx(0.3)
    assert rates.neighbor[0, 0] == pytest.approx(0.3)
    assert rates.local[0, 1] == pytest.approx(0.4)
    assert rates.neighbor[0, 1] == pytest.approx(0.2)
    assert rates.total[0] == pytest.approx(0.6)
    # total = local + neighbor at every station for binary caches
    np.testing.assert_allclose(rates.local + rates.neighbor,
                               np.broadcast_to(rates.total[:, None], rates.local.shape),
                               rtol=0, atol=1e-12)


def test_hit_rate_sums_station_independent_random():
    rng = np.random.Generator(np.random.PCG64(7))
    for _ in range(20):
        n, k = int(rng.integers(2, 5)), int(rng.integers(1, 8))
        p = rng.dirichlet(np.ones(k)) * 0.9
        sc = build_scenario((1e9,) * n, (1e9,) * n, (0.01,) * n,
                            tuple((1.0,) for _ in range(n)),
                            [(1.0, 1e8, [(pi, 1e4) for pi in p])])
        cache = CacheAssignment([rng.integers(0, 2, size=(n, k)).astype(float)])
        rates = compute_hit_rates(sc, cache)
        sums = rates.local[0] + rates.neighbor[0]
        np.testing.assert_allclose(sums, rates.total[0], rtol=0, atol=1e-12)


def test_hit_rate_monotone_in_single_entry():
    rng = np.random.Generator(np.random.PCG64(8))
    for _ in range(20):
        n, k = 3, 5
        p = rng.dirichlet(np.ones(k)) * 0.8
        sc = build_scenario((1e9,) * n, (1e9,) * n, (0.01,) * n,
                            tuple((1.0,) for _ in range(n)),
                            [(1.0, 1e8, [(pi, 1e4) for pi in p])])
        x = rng.integers(0, 2, size=(n, k)).astype(float)
        before = compute_hit_rates(sc, CacheAssignment([x])).total[0]
        station, item = int(rng.integers(n)), int(rng.integers(k))
        x2 = x.copy()
        x2[station, item] = 1.0
        after = compute_hit_rates(sc, CacheAssignment([x2])).total[0]
        assert after >= before - 1e-15
        assert after <= p.sum() + 1e-15


def test_storage_used_hand_values():
    sc = build_scenario((1e9,), (1e9,), (0.01,), ((1.0,),),
                        [(1.0, 1e8, [(0.1, 1e6), (0.1, 2e6)])])
    assert storage_used(sc, CacheAssignment.zeros(sc), 0) == 0.0
    one = CacheAssignment([np.array([[1.0, 0.0]])])
    assert storage_used(sc, one, 0) == pytest.approx(1e6)
    frac = CacheAssignment([np.array([[1.0, 0.5]])], mode="fractional")
    assert storage_used(sc, frac, 0) == pytest.approx(2e6)


def test_storage_used_linear_in_x():
    sc = build_scenario((1e9,), (1e9,), (0.01,), ((1.0,),),
                        [(1.0, 1e8, [(0.1, 3e5), (0.1, 7e5)])])
    rng = np.random.Generator(np.random.PCG64(9))
    x = rng.random((1, 2))
    used = storage_used(sc, CacheAssignment([x], mode="fractional"), 0)
    half = storage_used(sc, CacheAssignment([0.5 * x], mode="fractional"), 0)
    assert half == pytest.approx(0.5 * used, rel=1e-12)


def test_validate_accepts_greedy_state(default_scenario):
    rep = solve_greedy(default_scenario)
    assert validate(default_scenario, rep.cache, rep.sched) == []


def test_validate_reports_row_sum_violation(two_station_one_app):
    sched = SchedulingState(lam=np.array([[0.6, 0.6]]),
                            fshare=np.ones((1, 2)),
                            y=np.zeros((1, 2), dtype=np.int8))
    out = validate(two_station_one_app, CacheAssignment.zeros(two_station_one_app), sched)
    sums = [v for v in out if v.constraint == "workload_sum"]
    assert len(sums) == 1
    assert sums[0].magnitude == pytest.approx(0.2)


def test_validate_reports_stability_boundary():
    # mu0 = f / wa = 2 tasks/s and lam R = 2: the open constraint fails
    sc = build_scenario((2e9,), (1e9,), (0.01,), ((2.0,),),
                        [(1.0, 1e9, [(0.1, 1e5)])])
    sched = SchedulingState(lam=np.ones((1, 1)), fshare=np.ones((1, 1)),
                            y=np.zeros((1, 1), dtype=np.int8))
    out = validate(sc, CacheAssignment.zeros(sc), sched)
    assert any(v.constraint == "stability" for v in out)


def test_validate_reports_storage_overflow():
    sc = build_scenario((1e9,), (1e5,), (0.01,), ((0.1,),),
                        [(1.0, 1e8, [(0.1, 1e5), (0.1, 1e5)])])
    out = validate(sc, full_cache(sc), uniform_state(sc))
    assert any(v.constraint == "storage" for v in out)


def test_scenario_json_roundtrip(tmp_path, default_scenario):
    path = tmp_path / "scenario.json"
    save_scenario(default_scenario, path)
    loaded = load_scenario(path)
    assert loaded == default_scenario


def test_scenario_rejects_bad_inputs():
    good_apps = [(1.0, 1e8, [(0.1, 1e5)])]
    with pytest.raises(MalformedInput):
        build_scenario((0.0,), (1e9,), (0.01,), ((1.0,),), good_apps)
    with pytest.raises(MalformedInput):
        build_scenario((1e9,), (1e9,), (0.01,), ((1.0,),),
                       [(1.0, 1e8, [(0.6, 1e5), (0.6, 1e5)])])
    with pytest.raises(DimensionMismatch):
        build_scenario((1e9,), (1e9,), (0.01,), ((1.0, 1.0),), good_apps)
    with pytest.raises(MalformedInput):
        build_scenario((1e9,), (1e9,), (0.01,), ((1.0,),),
                       [(1.0, -1e8, [(0.1, 1e5)])])


def test_cache_assignment_rejects_out_of_range():
    with pytest.raises(MalformedInput):
        CacheAssignment([np.array([[1.5]])])
    with pytest.raises(MalformedInput):
        CacheAssignment([np.array([[0.5]])], mode="half")
    with pytest.raises(DimensionMismatch):
        CacheAssignment([np.array([0.5])])


def test_cache_is_binary_flag(default_scenario):
    assert CacheAssignment.zeros(default_scenario).is_binary()
    frac = CacheAssignment([np.array([[0.4]])], mode="fractional")
    assert not frac.is_binary()


def test_greedy_cache_respects_storage(default_scenario):
    cache = greedy_cache(default_scenario)
    for n in range(default_scenario.num_stations):
        assert (storage_used(default_scenario, cache, n)
                <= default_scenario.storage_capacities[n])
