"""Numba kernels for the hot loops (d=3 specializations).

Pure-numpy fallbacks for other dimensions live in fields.py; these exist
because the single-core budget makes the 7-point sweeps and cluster scans
the dominant cost of every experiment.
"""

import numba
import numpy as np


@numba.njit(cache=True, fastmath=True)
def sweep3(src, dst, survival):
    """One lazy-walk step on the interior; dst shape = src shape - 2."""
    m0, m1, m2 = src.shape
    move = survival / 12.0
    stay = survival * 0.5
    for i in range(1, m0 - 1):
        for j in range(1, m1 - 1):
            a = src[i - 1, j]
            b = src[i + 1, j]
            c = src[i, j - 1]
            d = src[i, j + 1]
            e = src[i, j]
            out = dst[i - 1, j - 1]
            for k in range(1, m2 - 1):
                out[k - 1] = stay * e[k] + move * (
                    a[k] + b[k] + c[k] + d[k] + e[k - 1] + e[k + 1])


@numba.njit(cache=True, fastmath=True)
def combine_midpoints3(z0, z1, z2, dst):
    """Midpoint-channel reduction C[z] = sum_i (Z_i[z] + Z_i[z - e_i]).

    dst shape = channel shape - 2 (symmetric crop).
    """
    m0, m1, m2 = z0.shape
    for i in range(1, m0 - 1):
        for j in range(1, m1 - 1):
            for k in range(1, m2 - 1):
                dst[i - 1, j - 1, k - 1] = (z0[i, j, k] + z0[i - 1, j, k]
                                            + z1[i, j, k] + z1[i, j - 1, k]
                                            + z2[i, j, k] + z2[i, j, k - 1])


@numba.njit(cache=True, fastmath=True)
def axpy_core3(acc, src, scale):
    """acc += scale * centered core of src (core shrunk to acc's shape)."""
    k = (src.shape[0] - acc.shape[0]) // 2
    n0, n1, n2 = acc.shape
    for i in range(n0):
        for j in range(n1):
            for l in range(n2):
                acc[i, j, l] += scale * src[i + k, j + k, l + k]
