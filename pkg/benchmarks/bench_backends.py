"""Time the compiled and pure-Python kernels on the workloads the package runs.

Usage:
    python3 benchmarks/bench_backends.py [--repeat 5] [--json]
"""
from __future__ import annotations

import argparse
import json
import math
import timeit

import numpy as np

from idefront import _backend
from idefront.dynamics import Dynamics
from idefront.eigen import assemble, principal_eigen
from idefront.habitat import Grid, Habitat, PeriodicField, piecewise_two_patch
from idefront.kernel import Gaussian, Laplace
from idefront.speeds import RecursionSystem, recursion_classify


def _habitat(grid: Grid) -> Habitat:
    f = lambda a, b: piecewise_two_patch(grid.L, 5.5, a, b, grid)
    e = PeriodicField.constant(math.e, grid)
    return Habitat(e, e, f(1.0, 0.5), f(1.0, 0.5), f(0.3, 0.4), f(2.0, 1.5))


def workloads() -> dict[str, callable]:
    rng = np.random.default_rng(0)
    size = 5120
    p, q, qs = rng.uniform(0, 1, (3, size))
    coef = [rng.uniform(0.5, 2.5, size) for _ in range(6)]
    x = rng.uniform(0, 1, size + 200)
    w = Gaussian(0.1).discrete_weights(10.0 / 128)
    rows = rng.uniform(0, 1, (400, 64 + w.size - 1))
    A = rng.uniform(0, 1, (400, 64))
    floor = np.zeros_like(A)

    grid = Grid(10.0, 128)
    m = piecewise_two_patch(10.0, 5.5, 2.0, 0.7, grid)
    sim_grid = Grid(10.0, 128, 40)
    hab = _habitat(sim_grid)
    coarse = Grid(10.0, 64)
    scalar = RecursionSystem.scalar(PeriodicField.constant(math.e, coarse),
                                    PeriodicField.constant(1.0, coarse), Gaussian(0.1), coarse)

    def simulate():
        dyn = Dynamics(hab, Gaussian(0.1), Laplace(0.1), sim_grid, p_star=np.ones(128),
                       q_star=np.full(128, 0.5))
        dyn.simulate(dyn.initial_state(), 20)

    return {
        "growth_competitive (5120 pts)": lambda: _backend.impl.growth_competitive(p, q, *coef),
        "growth_cooperative (5120 pts)": lambda: _backend.impl.growth_cooperative(p, q, qs, *coef),
        "convolve_valid (5120 pts)": lambda: _backend.impl.convolve_valid(x, w),
        "convolve_rows_valid (400 rows)": lambda: _backend.impl.convolve_rows_valid(rows, w),
        "shift_rows_max (400 rows)": lambda: _backend.impl.shift_rows_max(A, 2.3, floor),
        "periodize + assemble (n=128, Laplace)": lambda: assemble(m, Laplace(0.5), grid, 1.2),
        "principal eigenpair (n=128)": lambda: principal_eigen(assemble(m, Gaussian(0.1), grid, 2.0)),
        "simulate 20 steps (n=128, 40 periods)": simulate,
        "recursion classify c=0.2 (n=64)": lambda: recursion_classify(0.2, scalar),
    }


def run(repeat: int) -> list[dict]:
    results = []
    names = list(workloads())
    for backend in sorted(_backend.AVAILABLE):
        _backend.use(backend)
        jobs = workloads()
        for name in names:
            fn = jobs[name]
            fn()
            timer = timeit.Timer(fn)
            number, _ = timer.autorange()
            best = min(timer.repeat(repeat, number)) / number
            results.append({"backend": backend, "workload": name, "seconds": best})
    return results


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()
    before = _backend.BACKEND
    results = run(args.repeat)
    _backend.use(before)
    if args.json:
        print(json.dumps(results, indent=2))
        return
    table: dict[str, dict[str, float]] = {}
    for r in results:
        table.setdefault(r["workload"], {})[r["backend"]] = r["seconds"]
    backends = sorted(_backend.AVAILABLE)
    width = max(len(k) for k in table)
    head = "".join(f"{b:>14}" for b in backends)
    print(f"{'workload'.ljust(width)}{head}{'speedup':>10}")
    for name, row in table.items():
        cells = "".join(f"{row[b] * 1e3:12.3f}ms" for b in backends)
        speed = row["python"] / row["cython"] if "cython" in row else float("nan")
        print(f"{name.ljust(width)}{cells}{speed:9.2f}x")


if __name__ == "__main__":
    main()
