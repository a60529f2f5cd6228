"""Hot inner loops, compiled with numba when available.

Set ``METAMETRICS_PURE_NUMPY=1`` to force the pure-numpy implementations.
Both paths are exact reductions (sums in a fixed order, maxima, minima), so
results agree to rounding of the summation order; the rank-bound kernels
agree bit for bit.
"""

import os

import numpy as np

PURE_NUMPY = os.environ.get("METAMETRICS_PURE_NUMPY", "").strip().lower() in ("1", "true", "yes")

try:
    if PURE_NUMPY:
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


def group_sums_numpy(group, weights, values, n_groups):
    """Weighted per-group column sums: ``out[g, k] = sum w_i * values[i, k]``."""
    out = np.empty((n_groups, values.shape[1]))
    for k in range(values.shape[1]):
        out[:, k] = np.bincount(group, weights=weights * values[:, k], minlength=n_groups)
    return out


def level_extrema_numpy(z_sorted, starts):
    """Max and min of ``z_sorted`` over each contiguous level block."""
    return (
        np.maximum.reduceat(z_sorted, starts[:-1]),
        np.minimum.reduceat(z_sorted, starts[:-1]),
    )


if HAVE_NUMBA:

    @njit(cache=True)
    def _group_sums_nb(group, weights, values, n_groups):
        n, K = values.shape
        out = np.zeros((n_groups, K))
        for i in range(n):
            w = weights[i]
            if w == 0.0:
                continue
            g = group[i]
            for k in range(K):
                out[g, k] += w * values[i, k]
        return out

    @njit(cache=True)
    def _level_extrema_nb(z_sorted, starts):
        L = starts.shape[0] - 1
        hi = np.empty(L)
        lo = np.empty(L)
        for j in range(L):
            a = starts[j]
            mx = z_sorted[a]
            mn = z_sorted[a]
            for i in range(a + 1, starts[j + 1]):
                v = z_sorted[i]
                if v > mx:
                    mx = v
                if v < mn:
                    mn = v
            hi[j] = mx
            lo[j] = mn
        return hi, lo

    def group_sums_numba(group, weights, values, n_groups):
        return _group_sums_nb(
            np.ascontiguousarray(group, dtype=np.int64),
            np.ascontiguousarray(weights, dtype=np.float64),
            np.ascontiguousarray(values, dtype=np.float64),
            int(n_groups),
        )

    def level_extrema_numba(z_sorted, starts):
        return _level_extrema_nb(
            np.ascontiguousarray(z_sorted, dtype=np.float64),
            np.ascontiguousarray(starts, dtype=np.int64),
        )

    group_sums = group_sums_numba
    level_extrema = level_extrema_numba
else:
    group_sums_numba = None
    level_extrema_numba = None
    group_sums = group_sums_numpy
    level_extrema = level_extrema_numpy


def backend():
    return "numba" if HAVE_NUMBA else "numpy"
