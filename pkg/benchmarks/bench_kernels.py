"""Time the compiled kernels against the numpy fallback.

    python3 benchmarks/bench_kernels.py [--halves 2000] [--repeat 20]
"""

import argparse
import sys
import timeit

import numpy as np

from cfmmbatch import kernels


def workload(n: int, seed: int = 0):
    rng = np.random.default_rng(seed)
    kind = rng.integers(0, 2, n).astype(np.int64)
    p0 = 10.0 ** rng.uniform(-1, 2, n)
    p1 = 10.0 ** rng.uniform(-1, 1, n)
    pa = 10.0 ** rng.uniform(0, 1, n)
    pb = 10.0 ** rng.uniform(0, 1, n)
    y = rng.uniform(0, 1, n) * p0 * pa
    side = rng.integers(0, 2, n).astype(np.int64)
    grid = np.geomspace(1e-3, 1e3, 2000)
    return kind, p0, p1, pa, pb, y, side, grid


def bench(impl, data, repeat: int) -> dict[str, float]:
    kind, p0, p1, pa, pb, y, side, grid = data
    calls = {
        "half_sold": lambda: impl.half_sold(kind, p0, p1, pa / pb),
        "convex_terms": lambda: impl.convex_terms(kind, p0, p1, pa, pb, y),
        "excess_grid": lambda: impl.excess_grid(kind[:50], p0[:50], p1[:50], side[:50], grid),
    }
    return {name: min(timeit.repeat(fn, number=1, repeat=repeat)) for name, fn in calls.items()}


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--halves", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=20)
    args = ap.parse_args(argv)
    compiled = kernels.compiled_backend()
    data = workload(args.halves)
    py = bench(kernels.python_backend, data, args.repeat)
    cy = bench(compiled, data, args.repeat) if compiled is not None else None
    print(f"{'kernel':<14}{'python ms':>11}{'compiled ms':>13}{'speedup':>9}")
    for name, t in py.items():
        if cy is None:
            print(f"{name:<14}{t * 1e3:>11.3f}{'n/a':>13}{'':>9}")
        else:
            print(f"{name:<14}{t * 1e3:>11.3f}{cy[name] * 1e3:>13.3f}{t / cy[name]:>8.1f}x")
    if cy is None:
        print("compiled extension not built: python3 setup.py build_ext --inplace", file=sys.stderr)
    return 0


if __name__ == "__main__":
    sys.exit(main())
