"""Numba BFS kernels for crossing and pivotality on dense 3-d boxes.

All take occ as a C-contiguous uint8 cube and the inner radius r of the
source ball (crossings run from B_r to the inner boundary of the box).
Pivotal sites in the crossing phase are found by testing only the sites
of one crossing path: a pivotal site lies on every path, hence on that
one, which keeps the per-replica cost near O(path * cluster).
"""

import numba
import numpy as np

_NBR = ((-1, 0, 0), (1, 0, 0), (0, -1, 0), (0, 1, 0), (0, 0, -1), (0, 0, 1))


@numba.njit(cache=True)
def _bfs_from_ball(occ, r, skip, visited, queue, parent, want_path):
    """BFS through occupied sites from the central ball B_r, ignoring the
    flat index skip.  Returns (reached_boundary, boundary_index, qn)."""
    n = occ.shape[0]
    c = (n - 1) // 2
    qn = 0
    for i in range(c - r, c + r + 1):
        for j in range(c - r, c + r + 1):
            for k in range(c - r, c + r + 1):
                if occ[i, j, k]:
                    idx = (i * n + j) * n + k
                    if idx != skip and not visited[idx]:
                        visited[idx] = True
                        if want_path:
                            parent[idx] = -2
                        queue[qn] = idx
                        qn += 1
    head = 0
    while head < qn:
        idx = queue[head]
        head += 1
        i = idx // (n * n)
        j = (idx // n) % n
        k = idx % n
        if i == 0 or i == n - 1 or j == 0 or j == n - 1 or k == 0 or k == n - 1:
            return True, idx, qn
        for t in range(6):
            ii = i + _NBR[t][0]
            jj = j + _NBR[t][1]
            kk = k + _NBR[t][2]
            nidx = (ii * n + jj) * n + kk
            if occ[ii, jj, kk] and nidx != skip and not visited[nidx]:
                visited[nidx] = True
                if want_path:
                    parent[nidx] = idx
                queue[qn] = nidx
                qn += 1
    return False, -1, qn


@numba.njit(cache=True)
def crossing_indicator(occ, r):
    """True iff B_r is connected to the inner boundary in occ."""
    n = occ.shape[0]
    nn = n * n * n
    visited = np.zeros(nn, dtype=np.bool_)
    queue = np.empty(nn, dtype=np.int32)
    parent = np.empty(1, dtype=np.int32)
    hit, _, _ = _bfs_from_ball(occ, r, -1, visited, queue, parent, False)
    return hit


@numba.njit(cache=True)
def _reach_masks(occ, r, from_r, from_b):
    """Occupied sites reachable from B_r and from the boundary."""
    n = occ.shape[0]
    nn = n * n * n
    queue = np.empty(nn, dtype=np.int32)
    parent = np.empty(1, dtype=np.int32)
    _bfs_from_ball(occ, r, -1, from_r, queue, parent, False)
    # boundary-side BFS (no early exit: flood fully)
    qn = 0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if occ[i, j, k] and (i == 0 or i == n - 1 or j == 0 or j == n - 1
                                     or k == 0 or k == n - 1):
                    idx = (i * n + j) * n + k
                    if not from_b[idx]:
                        from_b[idx] = True
                        queue[qn] = idx
                        qn += 1
    head = 0
    while head < qn:
        idx = queue[head]
        head += 1
        i = idx // (n * n)
        j = (idx // n) % n
        k = idx % n
        for t in range(6):
            ii = i + _NBR[t][0]
            jj = j + _NBR[t][1]
            kk = k + _NBR[t][2]
            if 0 <= ii < n and 0 <= jj < n and 0 <= kk < n:
                nidx = (ii * n + jj) * n + kk
                if occ[ii, jj, kk] and not from_b[nidx]:
                    from_b[nidx] = True
                    queue[qn] = nidx
                    qn += 1


@numba.njit(cache=True)
def pivotal_mask(occ, r):
    """Exact pivotal set for the B_r <-> boundary crossing, as a cube mask.

    x is pivotal iff the crossing holds with x forced open but fails with
    x forced closed; x's own occupancy does not matter.
    """
    n = occ.shape[0]
    nn = n * n * n
    c = (n - 1) // 2
    out = np.zeros((n, n, n), dtype=np.bool_)
    visited = np.zeros(nn, dtype=np.bool_)
    queue = np.empty(nn, dtype=np.int32)
    parent = np.full(nn, -1, dtype=np.int32)
    hit, bidx, _ = _bfs_from_ball(occ, r, -1, visited, queue, parent, True)
    if hit:
        # candidates: the sites of one crossing path
        idx = bidx
        while idx != -2:
            i = idx // (n * n)
            j = (idx // n) % n
            k = idx % n
            visited[:] = False
            still, _, _ = _bfs_from_ball(occ, r, idx, visited, queue, parent, False)
            if not still:
                out[i, j, k] = True
            idx = parent[idx]
    else:
        from_r = np.zeros(nn, dtype=np.bool_)
        from_b = np.zeros(nn, dtype=np.bool_)
        _reach_masks(occ, r, from_r, from_b)
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    if occ[i, j, k]:
                        continue
                    reach_r = abs(i - c) <= r and abs(j - c) <= r and abs(k - c) <= r
                    reach_b = (i == 0 or i == n - 1 or j == 0 or j == n - 1
                               or k == 0 or k == n - 1)
                    for t in range(6):
                        ii = i + _NBR[t][0]
                        jj = j + _NBR[t][1]
                        kk = k + _NBR[t][2]
                        if 0 <= ii < n and 0 <= jj < n and 0 <= kk < n:
                            nidx = (ii * n + jj) * n + kk
                            if from_r[nidx]:
                                reach_r = True
                            if from_b[nidx]:
                                reach_b = True
                    if reach_r and reach_b:
                        out[i, j, k] = True
    return out


@numba.njit(cache=True)
def weighted_pivotal_sum(occ, r, weights):
    """sum_x weights[x] * 1{x pivotal}, sharing the pivotal_mask logic."""
    mask = pivotal_mask(occ, r)
    n = occ.shape[0]
    total = 0.0
    for i in range(n):
        for j in range(n):
            for k in range(n):
                if mask[i, j, k]:
                    total += weights[i, j, k]
    return total
