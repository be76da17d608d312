"""Time each hot kernel under both backends and check they agree.

    python3 benchmarks/bench_kernels.py [--repeat 3] [--scale 1.0]

The first numba call (compilation or cache load) is excluded from the timings.
"""
import argparse
import math
import time

import numpy as np

from cmspde import kernels
from cmspde._accel import HAVE_NUMBA
from cmspde.stochastic_core import ensemble_increments


def cases(scale):
    m = max(int(64 * scale), 2)
    dW = ensemble_increments(0, range(m), 2000, 0.005)[:, :, 0]
    yield "quad", (dW, 0.005, 3.0, 8.0, 200, 100)
    dW = ensemble_increments(1, range(m), 3000, 0.01)[:, :, 0]
    yield "strong", (np.full(m, 0.5), np.zeros((m, 7)), dW, 0.01, -0.03, 1.0,
                     kernels.NORMAL_FORM, 100)
    dW = ensemble_increments(2, range(4 * m), 2000, 0.1, 2)
    yield "weak", (np.full(4 * m, 0.5), dW, 0.1, 0.01, np.array([0.3, 0.03]), 100)
    n = 31
    x = math.pi / 32 * np.arange(1, n + 1)
    dW = ensemble_increments(3, range(m // 4 or 1), 2000, 0.0025)
    yield "spde", (np.tile(0.5 * np.sin(x), (dW.shape[0], 1)), dW, 0.0025, math.pi / 32, -0.03,
                   0.5, np.sin(2 * x)[None], 1.0, 100)


def best_of(func, args, repeat):
    times = []
    for _ in range(repeat):
        start = time.perf_counter()
        out = func(*args)
        times.append(time.perf_counter() - start)
    return min(times), out


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--scale", type=float, default=1.0)
    args = parser.parse_args()
    print(f"{'kernel':8s} {'numpy [s]':>10s} {'numba [s]':>10s} {'speed-up':>9s}  max |diff|")
    for name, call in cases(args.scale):
        nb, npy = kernels.KERNELS[name]
        t_np, (ref, _) = best_of(npy, call, args.repeat)
        if not HAVE_NUMBA:
            print(f"{name:8s} {t_np:10.4f} {'n/a':>10s}")
            continue
        nb(*call)
        t_nb, (res, _) = best_of(nb, call, args.repeat)
        diff = float(np.nanmax(np.abs(res - ref)))
        print(f"{name:8s} {t_np:10.4f} {t_nb:10.4f} {t_np / t_nb:8.1f}x  {diff:.1e}")


if __name__ == "__main__":
    main()
