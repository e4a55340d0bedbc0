"""Small geometry helpers shared across the package.

Sites are integer lattice points of Z^d.  A "box" B_L(a) is the sup-norm
ball {y : |y - a|_inf <= L}; dense fields over a box are ndarrays of shape
(2R+1,)*d indexed by site + R relative to the box center.  Distances are
sup-norm unless a function name says otherwise.
"""

from __future__ import annotations

import itertools

import numpy as np


def l1_ball_offsets(d: int, r: int) -> np.ndarray:
    """All lattice offsets with l^1 norm <= r, lexicographically sorted.

    Returns an (n, d) int64 array.  This is the support of the depth-r
    lazy-walk kernel.
    """
    pts = [p for p in itertools.product(range(-r, r + 1), repeat=d)
           if sum(abs(c) for c in p) <= r]
    return np.array(sorted(pts), dtype=np.int64).reshape(-1, d)


def box_sites(center, radius: int) -> np.ndarray:
    """All sites of B_radius(center) as an (n, d) array, lexicographic."""
    center = np.asarray(center, dtype=np.int64)
    rng = range(-radius, radius + 1)
    offs = np.array(list(itertools.product(rng, repeat=len(center))), dtype=np.int64)
    return center + offs


def sup_norm(points: np.ndarray) -> np.ndarray:
    """Sup-norm of each row of an (n, d) array."""
    pts = np.atleast_2d(np.asarray(points))
    return np.abs(pts).max(axis=1)


def sup_dist_point_set(point, sites: np.ndarray) -> int:
    """min_{s in sites} |point - s|_inf; inf-like large value if empty."""
    if len(sites) == 0:
        return np.iinfo(np.int64).max
    return int(np.abs(np.asarray(sites) - np.asarray(point)).max(axis=1).min())


def sup_dist_box_set(anchor, L: int, sites: np.ndarray) -> int:
    """Sup-norm distance d(B_L(anchor), sites); 0 if they intersect."""
    if len(sites) == 0:
        return np.iinfo(np.int64).max
    gaps = np.abs(np.asarray(sites) - np.asarray(anchor)) - L
    return int(np.maximum(gaps, 0).max(axis=1).min())


def sup_dist_box_box(a, La: int, b, Lb: int) -> int:
    """Sup-norm distance between two boxes; 0 if they intersect."""
    gaps = np.abs(np.asarray(a) - np.asarray(b)) - (La + Lb)
    return int(np.maximum(gaps, 0).max())


def l1_dist_box_box(a, La: int, b, Lb: int) -> int:
    """l^1 distance between two boxes.

    Unions of boxes are nearest-neighbor connected exactly when the
    pairwise-touching graph (l^1 box distance <= 1) is connected.
    """
    gaps = np.abs(np.asarray(a) - np.asarray(b)) - (La + Lb)
    return int(np.maximum(gaps, 0).sum())


def boxes_touch(a, La: int, b, Lb: int) -> bool:
    return l1_dist_box_box(a, La, b, Lb) <= 1


def set_diameter(sites: np.ndarray) -> int:
    """Sup-norm diameter of a site set (0 for singletons, -1 if empty)."""
    sites = np.asarray(sites)
    if len(sites) == 0:
        return -1
    return int((sites.max(axis=0) - sites.min(axis=0)).max())


def inner_boundary_mask(shape) -> np.ndarray:
    """Boolean mask of the inner boundary of a dense box array.

    The inner boundary of B_R consists of the sites with a nearest
    neighbor outside the box, i.e. with some coordinate equal to +-R.
    """
    mask = np.zeros(shape, dtype=bool)
    for ax in range(len(shape)):
        sl_lo = [slice(None)] * len(shape)
        sl_hi = [slice(None)] * len(shape)
        sl_lo[ax] = 0
        sl_hi[ax] = shape[ax] - 1
        mask[tuple(sl_lo)] = True
        mask[tuple(sl_hi)] = True
    return mask


def centered_subbox(values: np.ndarray, radius_from: int, radius_to: int) -> np.ndarray:
    """Restrict a dense box array of radius radius_from to radius_to."""
    if radius_to > radius_from:
        raise ValueError("cannot grow a box by restriction")
    k = radius_from - radius_to
    sl = tuple(slice(k, s - k) for s in values.shape)
    return values[sl]
