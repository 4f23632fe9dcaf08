"""Compiled and pure kernels must agree bit for bit."""
import math
import os
import subprocess
import sys

import numpy as np
import pytest

import cecreuse
from cecreuse._kernels import _ref

_fast = pytest.importorskip("cecreuse._kernels._fast")


def test_extension_active_in_this_build():
    assert cecreuse.HAVE_EXT
    assert cecreuse.IMPL_NAME == "compiled"


def test_pure_mode_via_environment():
    env = dict(os.environ, CEC_REUSE_PURE="1")
    out = subprocess.run(
        [sys.executable, "-c",
         "import cecreuse; print(cecreuse.IMPL_NAME, cecreuse.HAVE_EXT)"],
        capture_output=True, text=True, env=env, check=True)
    assert out.stdout.split() == ["pure", "False"]


def test_hit_derivative_parity():
    rng = np.random.Generator(np.random.PCG64(31))
    for _ in range(2000):
        f = rng.uniform(1e8, 8e9)
        wa = rng.uniform(1e8, 6e8)
        ws = rng.uniform(0.0, 5e7)
        hit = rng.uniform(0.0, 1.0)
        load = rng.uniform(0.0, 2.0) * f / (ws + (1.0 - hit) * wa)
        a = _ref.hit_derivative(load, f, wa, ws, hit)
        b = _fast.hit_derivative(load, f, wa, ws, hit)
        assert a == b  # covers the -inf unstable branch too
    assert _fast.hit_derivative(1.0, 0.0, 2e8, 1e7, 0.5) == -math.inf


def test_efficiency_bracket_parity():
    rng = np.random.Generator(np.random.PCG64(37))
    for _ in range(500):
        n = int(rng.integers(1, 8))
        lam = rng.dirichlet(np.ones(n))
        lam[rng.random(n) < 0.2] = 0.0
        y = (rng.random(n) < 0.7).astype(np.float64)
        fr = rng.uniform(5e8, 8e9, n)
        dt = rng.uniform(0.01, 0.03, n)
        rate = rng.uniform(0.0, 30.0)
        wa = rng.uniform(1e8, 6e8)
        ws = rng.uniform(0.0, 5e7)
        weight = rng.uniform(0.1, 3.0)
        hit = rng.uniform(0.0, 1.0)
        station = int(rng.integers(0, n))
        a = _ref.efficiency_bracket(hit, station, lam, y, fr, dt, rate, wa, ws, weight)
        b = _fast.efficiency_bracket(hit, station, lam, y, fr, dt, rate, wa, ws, weight)
        assert a == b


def test_queue_waits_parity_and_lindley():
    rng = np.random.Generator(np.random.PCG64(41))
    inter = rng.exponential(0.2, 10_000)
    serv = rng.exponential(0.15, 10_000)
    a = np.asarray(_ref.queue_waits(inter, serv))
    b = np.asarray(_fast.queue_waits(inter, serv))
    assert np.array_equal(a, b)

    # independent Lindley recursion
    want = np.zeros_like(a)
    for i in range(1, len(want)):
        want[i] = max(0.0, want[i - 1] + serv[i - 1] - inter[i])
    assert np.array_equal(a, want)
    assert (a >= 0.0).all() and a[0] == 0.0
