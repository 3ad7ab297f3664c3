#!/usr/bin/env python3
"""Benchmark the numba kernels against the pure-numpy fallback.

Runs the hot paths (wave stepping, adjoint stepping, disk rasterization and
one full shot) in fresh subprocesses with SEDINV_BACKEND set to each backend
and prints a comparison table.

    python3 benchmarks/bench_backends.py [--n 400] [--steps 300]
"""

from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys

WORKER = r"""
import json, os, time
import numpy as np

import sedinv
from sedinv import kernels
from sedinv.grid import GridGeometry, ScalarField2D
from sedinv.medium import DensityField, MediumConstants, rasterize_velocity, sample_cloud
from sedinv.wavesim import AcquisitionGeometry, RickerSource, SolverConfig, simulate

n = {n}
steps = {steps}
results = {{"backend": sedinv.backend_name()}}

rng = np.random.default_rng(0)
prev = rng.standard_normal((n, n))
cur = rng.standard_normal((n, n))
coef = np.full((n, n), 1e-3)
d1 = np.ones((n, n)); d2 = np.ones((n, n))
out = np.zeros((n, n))

kernels.step_forward(prev, cur, coef, d1, d2, 4.0, 4.0, out)  # warm up / compile
t0 = time.perf_counter()
for _ in range(steps):
    kernels.step_forward(prev, cur, coef, d1, d2, 4.0, 4.0, out)
dt = (time.perf_counter() - t0) / steps
results["step_forward_ms"] = dt * 1e3
results["step_forward_mcells"] = n * n / dt / 1e6

kernels.step_adjoint(prev, cur, coef, d1, d2, 4.0, 4.0, out)
t0 = time.perf_counter()
for _ in range(steps):
    kernels.step_adjoint(prev, cur, coef, d1, d2, 4.0, 4.0, out)
dt = (time.perf_counter() - t0) / steps
results["step_adjoint_ms"] = dt * 1e3

geom = GridGeometry(nx=n, ny=n, dx=1.0 / n, dy=1.0 / n)
rho = DensityField(ScalarField2D.constant(geom, 0.05))
cloud = sample_cloud(rho, 8.0 / n, seed=1)
constants = MediumConstants()
rasterize_velocity(cloud, constants, geom)  # warm up
t0 = time.perf_counter()
for _ in range(5):
    rasterize_velocity(cloud, constants, geom)
results["rasterize_ms"] = (time.perf_counter() - t0) / 5 * 1e3
results["rasterize_points"] = cloud.n_points

m = ScalarField2D.constant(geom, 1.0 / 1500.0**2)
src = RickerSource(position=(0.5, 0.0), f0=15000.0)
acq = AcquisitionGeometry(sources=(src,), receivers=np.array([[0.5, 1.0]]),
                          record_dt=20e-6, record_T=0.5e-3)
simulate(m, src, acq, SolverConfig())
t0 = time.perf_counter()
simulate(m, src, acq, SolverConfig())
results["full_shot_s"] = time.perf_counter() - t0

print(json.dumps(results))
"""


def run_backend(backend: str, n: int, steps: int) -> dict:
    env = dict(os.environ, SEDINV_BACKEND=backend)
    code = WORKER.format(n=n, steps=steps)
    proc = subprocess.run([sys.executable, "-c", code], env=env,
                          capture_output=True, text=True, check=True)
    return json.loads(proc.stdout.strip().splitlines()[-1])


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=400, help="grid side")
    ap.add_argument("--steps", type=int, default=300, help="timed kernel calls")
    args = ap.parse_args()

    rows = [run_backend(b, args.n, args.steps) for b in ("numpy", "numba")]
    keys = ["step_forward_ms", "step_adjoint_ms", "rasterize_ms", "full_shot_s"]
    labels = {
        "step_forward_ms": "forward step [ms]",
        "step_adjoint_ms": "adjoint step [ms]",
        "rasterize_ms": "rasterize [ms]",
        "full_shot_s": "full shot [s]",
    }
    print(f"grid {args.n}x{args.n}, {args.steps} timed calls, "
          f"{rows[1]['rasterize_points']} particles")
    print(f"{'kernel':<20}{'numpy':>12}{'numba':>12}{'speedup':>10}")
    for k in keys:
        a, b = rows[0][k], rows[1][k]
        print(f"{labels[k]:<20}{a:>12.3f}{b:>12.3f}{a / b:>9.1f}x")
    return 0


if __name__ == "__main__":
    sys.exit(main())
