#!/usr/bin/env python3
"""Benchmark the compiled stepper against the pure-Python fallback.

Runs the same flow problems through both backends and reports accepted
steps per second plus the speedup factor.

Usage: python benchmarks/bench_kernels.py [--reps 3]
"""

import argparse
import math
import time

import numpy as np

from magzoll import flow, geometry, kernels


def bench_case(name, surface, lam, y0, t1, tol, max_step, reps):
    rows = {}
    for backend in kernels.available_backends():
        best = math.inf
        n_steps = 0
        for _ in range(reps):
            t0 = time.perf_counter()
            ts, ys, status, stats = kernels.propagate(
                surface, lam, y0, 0.0, t1, tol, max_step, backend=backend)
            dt = time.perf_counter() - t0
            best = min(best, dt)
            n_steps = len(ts)
        rows[backend] = (n_steps, best)
    print(f"\n{name}  ({n_steps} steps)")
    base = None
    for backend, (n, dt) in rows.items():
        rate = n / dt
        line = f"  {backend:<8} {dt * 1e3:9.2f} ms   {rate / 1e6:8.3f} Msteps/s"
        if backend == "python":
            base = dt
        print(line)
    if "cython" in rows and "python" in rows:
        print(f"  speedup: {rows['python'][1] / rows['cython'][1]:.1f}x")


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--reps", type=int, default=3)
    args = parser.parse_args()

    print(f"available backends: {kernels.available_backends()}")

    torus = geometry.flat_torus(f="1 + 0.5*cos(2*pi*x)")
    st = torus.state_from_angle((0.25, 0.5), 0.3)
    bench_case("torus, oscillating field, lam=40, T=20",
               torus, 40.0, st.as_array(), 20.0, 1e-10,
               flow.default_max_step(torus, 40.0), args.reps)

    sphere = geometry.round_sphere(1.0, f=1.0)
    st2 = sphere.unit_state((math.pi / 3, 0.0), (0.3, 1.0))
    bench_case("round sphere, constant field, lam=5, T=50",
               sphere, 5.0, st2.as_array(), 50.0, 1e-10,
               flow.default_max_step(sphere, 5.0), args.reps)

    neck = geometry.sphere_of_revolution(
        "sin(theta)*(1 - 0.2*exp(-(theta-pi/2)**2/0.09))", f=1.0)
    st3 = neck.unit_state((math.pi / 2, 0.0), (0.1, 1.0))
    bench_case("revolution surface (program profile), lam=2, T=50",
               neck, 2.0, st3.as_array(), 50.0, 1e-10,
               flow.default_max_step(neck, 2.0), args.reps)


if __name__ == "__main__":
    main()
