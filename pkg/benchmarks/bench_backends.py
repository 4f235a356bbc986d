"""Compare the compiled and numpy rollout kernels.

    python3 benchmarks/bench_backends.py
    python3 benchmarks/bench_backends.py --rollouts 10 100 --m 20 128 --steps 2000

For each (rollouts, m) pair a random 1-D squared-exponential model is
fitted, both backends advance the same noise through ``steps`` steps, and
the best of ``--repeat`` wall-clock times is reported with the largest
absolute difference between the two outputs.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from gpssm import Kernel, TrainingSet, _core, fit


def model_of_size(m: int, seed: int):
    rng = np.random.default_rng(seed)
    X = np.linspace(-5, 5, m)[:, None]
    Y = 0.01 * X ** 3 - 0.2 * X ** 2 + 0.2 * X + rng.standard_normal(X.shape)
    return fit(Kernel.squared_exponential(4.0, 3.5), TrainingSet(X, Y, 1.0))


def best_time(fn, repeat: int) -> tuple[float, np.ndarray]:
    best, out = np.inf, None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--rollouts", type=int, nargs="+", default=[1, 10, 100, 1000])
    p.add_argument("--m", type=int, nargs="+", default=[10, 20, 50, 128])
    p.add_argument("--steps", type=int, default=1000)
    p.add_argument("--repeat", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    if _core._native is None:
        print("compiled backend not built; only the numpy fallback is available")
        return 1
    print(f"{'rollouts':>8} {'m':>5} {'native s':>10} {'python s':>10} {'speedup':>8} {'max |diff|':>11}")
    for m in args.m:
        model = model_of_size(m, args.seed)
        arrays = model.se_arrays()
        for R in args.rollouts:
            rng = np.random.default_rng(args.seed)
            x0 = rng.uniform(-5, 5, (R, 1))
            noise = rng.standard_normal((R, args.steps, 1))
            t_nat, a = best_time(lambda: _core.se_rollouts(x0, noise, *arrays, backend="native"), args.repeat)
            t_py, b = best_time(lambda: _core.se_rollouts(x0, noise, *arrays, backend="python"), args.repeat)
            print(f"{R:>8} {m:>5} {t_nat:>10.4f} {t_py:>10.4f} {t_py / t_nat:>8.2f} {np.abs(a - b).max():>11.2e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
