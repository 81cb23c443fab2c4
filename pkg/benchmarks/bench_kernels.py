#!/usr/bin/env python3
"""Compare the numba and pure-numpy kernel backends.

Kernel timings call both implementations directly; the end-to-end timing runs
a joint solve in a subprocess per backend (the backend is fixed at import).

Usage:
    python benchmarks/bench_kernels.py [--size 128] [--repeat 20]
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from l12refit import _kernels_numba as nb
from l12refit import _kernels_numpy as npk

SOLVE_SNIPPET = """
import time
from l12refit import kernels
from l12refit.experiments import ExperimentConfig, run_experiment
cfg = ExperimentConfig(task="denoise", noise_std=20.0, penalty="sd", synthetic="{size}x{size}",
                       seed=1, iterations={iters})
run_experiment(ExperimentConfig(task="denoise", noise_std=20.0, synthetic="16x16", iterations=2))
t = time.perf_counter()
run_experiment(cfg)
print(kernels.BACKEND, time.perf_counter() - t)
"""


def best_of(fn, repeat):
    fn()  # warm-up (includes numba compilation)
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return min(times)


def kernel_cases(size, rng):
    x = rng.standard_normal((size, size, 3))
    g = rng.standard_normal((size, size, 6))
    m = size * size
    z = rng.standard_normal((m, 6))
    gv = rng.standard_normal((m, 6))
    ref = rng.standard_normal((m, 6))
    mask = rng.random(m) < 0.3
    nu = z + gv
    nrm = np.sqrt((nu ** 2).sum(1))
    return {
        "gradient": lambda k: k.gradient(x),
        "gradient_adjoint": lambda k: k.gradient_adjoint(g),
        "ball_dual_update": lambda k: k.ball_dual_update(z, gv, 1 / 6, 1.0),
        "psi_blocks": lambda k: k.psi_blocks(nu, nrm, 1.0, 1 / 6, mask),
        "prox_conj_blocks[sd]": lambda k: k.prox_conj_blocks(k.SD, z, ref, mask, 1.0, 1 / 6),
        "prox_conj_blocks[qo]": lambda k: k.prox_conj_blocks(k.QO, z, ref, mask, 1.0, 1 / 6),
    }


def solve_time(disable_numba, size, iters):
    env = dict(os.environ, L12REFIT_DISABLE_NUMBA="1" if disable_numba else "0")
    out = subprocess.run([sys.executable, "-c", SOLVE_SNIPPET.format(size=size, iters=iters)],
                         env=env, capture_output=True, text=True, check=True)
    backend, secs = out.stdout.split()
    return backend, float(secs)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--size", type=int, default=128)
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--iters", type=int, default=300)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    print(f"kernels on a {args.size}x{args.size} RGB image (best of {args.repeat})")
    print(f"{'kernel':24s} {'numpy ms':>10s} {'numba ms':>10s} {'speedup':>8s}")
    for name, call in kernel_cases(args.size, rng).items():
        t_np = best_of(lambda: call(npk), args.repeat)
        t_nb = best_of(lambda: call(nb), args.repeat)
        print(f"{name:24s} {1e3 * t_np:10.3f} {1e3 * t_nb:10.3f} {t_np / t_nb:8.2f}x")

    print(f"\njoint SD solve, {args.size}x{args.size}, {args.iters} iterations")
    for disable in (True, False):
        backend, secs = solve_time(disable, args.size, args.iters)
        print(f"{backend:8s} {secs:8.3f} s")


if __name__ == "__main__":
    main()
