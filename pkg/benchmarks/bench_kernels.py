"""Time the numba kernels against their numpy fallbacks.

Run with ``python3 benchmarks/bench_kernels.py``. Sizes mimic one bootstrap
replicate of a full league (about 2000 players x 10 seasons x 82 games) and
one latent column of the copula sampler.
"""

import argparse
import timeit

import numpy as np

from metametrics import _kernels as K


def bench(fn, args, repeat, number):
    fn(*args)  # compile / warm caches
    times = timeit.repeat(lambda: fn(*args), repeat=repeat, number=number)
    return min(times) / number


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--lines", type=int, default=1_640_000)
    ap.add_argument("--groups", type=int, default=20_000)
    ap.add_argument("--stats", type=int, default=4)
    ap.add_argument("--rows", type=int, default=20_000)
    ap.add_argument("--levels", type=int, default=500)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()

    rng = np.random.default_rng(0)
    group = np.sort(rng.integers(0, args.groups, args.lines))
    weights = rng.poisson(1.0, args.lines).astype(float)
    values = rng.random((args.lines, args.stats))
    z = np.sort(rng.standard_normal(args.rows))
    starts = np.unique(np.r_[0, np.sort(rng.choice(np.arange(1, args.rows), args.levels - 1, replace=False)),
                             args.rows])

    cases = [
        ("group_sums", K.group_sums_numpy, getattr(K, "group_sums_numba", None),
         (group, weights, values, args.groups)),
        ("level_extrema", K.level_extrema_numpy, getattr(K, "level_extrema_numba", None), (z, starts)),
    ]
    print(f"numba available: {K.HAVE_NUMBA}")
    print(f"{'kernel':<15}{'numpy [ms]':>12}{'numba [ms]':>12}{'speedup':>10}")
    for name, f_np, f_nb, fargs in cases:
        t_np = bench(f_np, fargs, args.repeat, 3)
        if f_nb is None:
            print(f"{name:<15}{t_np * 1e3:>12.3f}{'n/a':>12}{'':>10}")
            continue
        t_nb = bench(f_nb, fargs, args.repeat, 3)
        a, b = f_np(*fargs), f_nb(*fargs)
        agree = all(np.allclose(x, y, rtol=1e-12, atol=1e-9) for x, y in zip(np.atleast_1d(a), np.atleast_1d(b)))
        print(f"{name:<15}{t_np * 1e3:>12.3f}{t_nb * 1e3:>12.3f}{t_np / t_nb:>9.1f}x"
              + ("" if agree else "  MISMATCH"))


if __name__ == "__main__":
    main()
