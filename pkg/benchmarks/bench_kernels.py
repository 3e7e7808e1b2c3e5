"""Compare the compiled and pure-numpy paths of the dissimilar-subset
selection kernel.

Run as:  python3 benchmarks/bench_kernels.py

The instance sizes are chosen above the exact-enumeration cutoff so both
timings exercise the greedy + local-search heuristic.
"""

import argparse
import importlib
import os
import time

import numpy as np


def make_instance(n: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    raw = rng.uniform(size=(n, n))
    sim = (raw + raw.T) / 2
    np.fill_diagonal(sim, 1.0)
    return sim


def bench(kernels, n: int, m: int, repeats: int) -> tuple[float, float]:
    times = []
    obj = None
    for rep in range(repeats):
        sim = make_instance(n, seed=rep)
        t0 = time.perf_counter()
        subset = kernels.dissimilar_subset(sim, m)
        times.append(time.perf_counter() - t0)
        obj = kernels.subset_objective(sim, subset)
    return min(times), obj


def load_kernels(no_numba: bool):
    os.environ["MOTIONSEARCH_NO_NUMBA"] = "1" if no_numba else ""
    import motionsearch.kernels as kernels
    return importlib.reload(kernels)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=5)
    parser.add_argument("--sizes", type=int, nargs="+",
                        default=[64, 128, 256, 512])
    args = parser.parse_args()

    print(f"{'n':>5} {'m':>5} {'numpy (s)':>12} {'numba (s)':>12} "
          f"{'speedup':>8}")
    for n in args.sizes:
        m = n // 4
        np_kernels = load_kernels(no_numba=True)
        t_np, obj_np = bench(np_kernels, n, m, args.repeats)
        nb_kernels = load_kernels(no_numba=False)
        # warm-up triggers JIT compilation outside the timed region
        nb_kernels.dissimilar_subset(make_instance(n, seed=99), m)
        t_nb, obj_nb = bench(nb_kernels, n, m, args.repeats)
        assert abs(obj_np - obj_nb) < 1e-9, "paths disagree on the objective"
        print(f"{n:>5} {m:>5} {t_np:>12.4f} {t_nb:>12.4f} "
              f"{t_np / t_nb:>8.2f}x")


if __name__ == "__main__":
    main()
