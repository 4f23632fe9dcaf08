"""Shared builders and fixtures for the test suite.

Hand-built networks keep the worked examples readable; the seeded default
scenario exercises everything at the scale the solvers are tuned for.
"""
import numpy as np
import pytest

from cecreuse import (Application, BaseStation, CacheAssignment, GeneratorParams,
                      Scenario, SchedulingState, TypicalInput, generate_scenario)


def build_scenario(compute, storage, transfer, rates, apps, search_workload=25e6):
    """Scenario from plain lists.

    rates[n][a] are per-station arrival rates; apps is a list of
    (weight, mean_workload, [(match_prob, result_size), ...]) triples.
    """
    stations = tuple(
        BaseStation(compute_capacity=float(c), storage_capacity=float(s),
                    transfer_delay=float(d), arrival_rates=tuple(float(r) for r in rr))
        for c, s, d, rr in zip(compute, storage, transfer, rates))
    app_objs = tuple(
        Application(weight=float(w), mean_workload=float(wl),
                    typical_inputs=tuple(TypicalInput(float(p), float(sz))
                                         for p, sz in inputs))
        for w, wl, inputs in apps)
    return Scenario(stations=stations, apps=app_objs,
                    search_workload=float(search_workload))


def uniform_state(scenario, y=0):
    """Uniform routing and CPU shares with a constant search flag."""
    A, N = scenario.num_apps, scenario.num_stations
    return SchedulingState(lam=np.full((A, N), 1.0 / N),
                           fshare=np.full((A, N), 1.0 / A),
                           y=np.full((A, N), y, dtype=np.int8))


def full_cache(scenario):
    """Everything cached everywhere (storage permitting is the caller's job)."""
    return CacheAssignment(
        [np.ones((scenario.num_stations, scenario.catalog_size(a)))
         for a in range(scenario.num_apps)])


@pytest.fixture(scope="session")
def default_scenario():
    """Seeded desk-scale default network (10 stations, 5 apps)."""
    return generate_scenario(GeneratorParams(seed=42))


@pytest.fixture
def two_station_one_app():
    """Two identical stations, one app with a three-item catalog."""
    return build_scenario(
        compute=(2e9, 2e9), storage=(4e9, 4e9), transfer=(0.01, 0.02),
        rates=((1.0,), (1.0,)),
        apps=[(1.0, 4e8, [(0.2, 1e5), (0.3, 1e5), (0.1, 1e5)])])


@pytest.fixture
def single_station_app():
    """One station, one app, generous capacity."""
    return build_scenario(
        compute=(2e9,), storage=(4e9,), transfer=(0.02,),
        rates=((2.0,),),
        apps=[(1.0, 4e8, [(0.2, 1e5), (0.3, 1e5), (0.1, 1e5)])])
