"""Compare the numba and numpy versions of every hot kernel.

Usage:
    python benchmarks/bench_kernels.py [--repeat N] [--runs]

``--runs`` also times a full learner run under each backend; the numpy
backend is selected in a subprocess with PLANPACE_NO_JIT=1 because the
switch is read at import time.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from planpace import kernels
from planpace._jit import HAVE_NUMBA

RUN_SNIPPET = """
import time
from planpace import run, AlgorithmSpec, Instance, SpendingPlan, Environment, EnvironmentSpec
from planpace._jit import backend_name
T = 16384
inst = Instance.from_plan(SpendingPlan.uniform(T, 1, 0.25), 3)
spec = EnvironmentSpec([[0, 0.5, 0.2]], [[0, 0.5, 0.1]], noise="bernoulli", seed=1)
for setting in ("ORA", "OLRC_full", "OLRC_bandit"):
    run(inst, Environment(spec, T), AlgorithmSpec(setting))  # warm up / compile
    t0 = time.perf_counter()
    run(inst, Environment(spec, T, run_seed=1), AlgorithmSpec(setting))
    print(f"{backend_name():6s} {setting:12s} T={T}: {time.perf_counter() - t0:.3f}s")
"""


def cases(rng):
    tab = rng.normal(size=(120, 240))
    A = rng.uniform(0, 1, size=(4, 3))
    b = rng.uniform(0.5, 2, size=4)
    E = np.zeros((0, 3))
    e = np.zeros(0)
    c = rng.uniform(-1, 1, size=3)
    point = rng.normal(size=8)
    logw = rng.normal(size=16)
    probs = kernels.softmax_np(logw)
    f = rng.uniform(size=8)
    cm = rng.uniform(size=(8, 2))
    lam = rng.uniform(size=2)
    return {
        "project_l1_ball": (kernels.project_l1_ball_np, kernels.project_l1_ball_nb, (point, 1.0)),
        "softmax": (kernels.softmax_np, kernels.softmax_nb, (logw,)),
        "sample_index": (kernels.sample_index_np, kernels.sample_index_nb, (probs, 0.37)),
        "best_response": (kernels.best_response_np, kernels.best_response_nb, (f, cm, lam)),
        "uniform_block": (kernels.uniform_block_np, kernels.uniform_block_nb, (np.uint64(7), 4096, 4, 2, 0)),
        "pivot": (lambda *a: kernels.pivot_np(a[0].copy(), a[1], a[2]),
                  lambda *a: kernels.pivot_nb(a[0].copy(), a[1], a[2]), (tab, 3, 5)),
        "grid_max": (kernels.grid_max_np, kernels.grid_max_nb, (A, b, E, e, c, 0.02, 2.0, 0.01)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--runs", action="store_true")
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy kernels exist")
        return
    rng = np.random.default_rng(0)
    print(f"{'kernel':16s} {'numpy':>12s} {'numba':>12s} {'speedup':>8s}")
    for name, (np_fn, nb_fn, a) in cases(rng).items():
        nb_fn(*a)  # compile outside the timed region
        n = 3 if name == "grid_max" else 2000
        t_np = min(timeit.repeat(lambda: np_fn(*a), number=n, repeat=args.repeat)) / n
        t_nb = min(timeit.repeat(lambda: nb_fn(*a), number=n, repeat=args.repeat)) / n
        print(f"{name:16s} {t_np * 1e6:10.2f}us {t_nb * 1e6:10.2f}us {t_np / t_nb:7.1f}x")
    if args.runs:
        for flag in ("0", "1"):
            env = dict(os.environ, PLANPACE_NO_JIT=flag)
            subprocess.run([sys.executable, "-c", RUN_SNIPPET], env=env, check=True)


if __name__ == "__main__":
    main()
