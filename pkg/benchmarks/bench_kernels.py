"""Timing comparison of the compiled kernels against the pure-Python mirrors.

Runs the three hot kernels on representative inputs with both implementations
and reports per-call times plus speedups, then times one full solver run per
implementation in a subprocess (kernel selection happens at import, so the
end-to-end comparison needs fresh interpreters).

Usage: python3 benchmarks/bench_kernels.py [--quick]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from cecreuse._kernels import _ref

try:
    from cecreuse._kernels import _fast
except ImportError:
    _fast = None


def best_of(fn, repeats=3):
    best = np.inf
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_hit_derivative(impl, calls):
    rng = np.random.Generator(np.random.PCG64(1))
    load = rng.uniform(0.5, 20.0, calls)
    f = rng.uniform(1e9, 8e9, calls)
    hit = rng.uniform(0.0, 0.95, calls)
    fn = impl.hit_derivative

    def run():
        acc = 0.0
        for i in range(calls):
            acc += fn(load[i], f[i], 2e8, 25e6, hit[i])
        return acc

    return best_of(run) / calls


def bench_efficiency_bracket(impl, calls, stations=10):
    rng = np.random.Generator(np.random.PCG64(2))
    lam = rng.dirichlet(np.ones(stations), calls)
    y = (rng.uniform(size=(calls, stations)) < 0.7).astype(np.float64)
    fr = rng.uniform(5e8, 4e9, (calls, stations))
    dt = rng.uniform(0.01, 0.03, (calls, stations))
    fn = impl.efficiency_bracket

    def run():
        acc = 0.0
        for i in range(calls):
            acc += fn(0.4, 0, lam[i], y[i], fr[i], dt[i], 12.0, 2e8, 25e6, 1.0)
        return acc

    return best_of(run) / calls


def bench_queue_waits(impl, tasks):
    rng = np.random.Generator(np.random.PCG64(3))
    inter = rng.exponential(0.1, tasks)
    serv = rng.exponential(0.08, tasks)
    fn = impl.queue_waits
    return best_of(lambda: fn(inter, serv)) / tasks


def bench_solver(pure):
    env = dict(os.environ)
    if pure:
        env["CEC_REUSE_PURE"] = "1"
    else:
        env.pop("CEC_REUSE_PURE", None)
    code = (
        "import time\n"
        "from cecreuse import GeneratorParams, generate_scenario, alternating_solve\n"
        "sc = generate_scenario(GeneratorParams(seed=42))\n"
        "t0 = time.perf_counter()\n"
        "rep = alternating_solve(sc)\n"
        "print(time.perf_counter() - t0, rep.final_objective)\n"
    )
    out = subprocess.run([sys.executable, "-c", code], env=env,
                         capture_output=True, text=True, check=True)
    elapsed, objective = out.stdout.split()
    return float(elapsed), float(objective)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--quick", action="store_true",
                    help="smaller call counts, rougher numbers")
    args = ap.parse_args()

    if _fast is None:
        print("compiled extension not built; nothing to compare against")
        return 1

    calls = 20_000 if args.quick else 100_000
    tasks = 200_000 if args.quick else 1_000_000
    cases = [
        ("hit_derivative", bench_hit_derivative, calls),
        ("efficiency_bracket", bench_efficiency_bracket, calls),
        (f"queue_waits ({tasks} tasks)", bench_queue_waits, tasks),
    ]
    print(f"{'kernel':<28} {'pure':>12} {'compiled':>12} {'speedup':>9}")
    for name, bench, n in cases:
        t_pure = bench(_ref, n)
        t_fast = bench(_fast, n)
        print(f"{name:<28} {t_pure * 1e9:>10.0f}ns {t_fast * 1e9:>10.0f}ns "
              f"{t_pure / t_fast:>8.1f}x")

    t_pure, obj_pure = bench_solver(pure=True)
    t_fast, obj_fast = bench_solver(pure=False)
    print(f"\n{'full solve (seed 42)':<28} {t_pure:>10.2f}s  {t_fast:>10.2f}s "
          f"{t_pure / t_fast:>8.1f}x")
    match = "identical" if obj_pure == obj_fast else "DIFFERENT"
    print(f"final objectives {match}: {obj_pure!r} vs {obj_fast!r}")
    return 0 if obj_pure == obj_fast else 1


if __name__ == "__main__":
    sys.exit(main())
