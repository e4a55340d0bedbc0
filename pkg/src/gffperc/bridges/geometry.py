"""Boxes, anchor lattices, and centered annulus regions.

Anchors of the level-m lattice are the points of (2 L_m + 1) Z^d; the
level-m box attached to x is B_{L_m}(x), and these boxes tile Z^d.  All
regions here are sup-norm annuli {inner < |y - c| <= outer} (inner = -1
gives the full ball), which is all the domain algebra the constructions
need, and keeps every predicate closed-form: no site enumeration.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..scales import ScaleLadder


@dataclass(frozen=True)
class BoxId:
    m: int
    x: tuple

    def anchor(self) -> np.ndarray:
        return np.asarray(self.x, dtype=np.int64)


@dataclass(frozen=True)
class Region:
    """Sup-norm annulus {y : inner < |y - center| <= outer}."""

    center: tuple
    outer: int
    inner: int = -1

    def _c(self) -> np.ndarray:
        return np.asarray(self.center, dtype=np.int64)

    def contains_sites(self, sites) -> np.ndarray:
        r = np.abs(np.atleast_2d(sites) - self._c()).max(axis=1)
        return (r > self.inner) & (r <= self.outer)

    def box_supnorm_range(self, anchor, L: int):
        delta = np.abs(np.asarray(anchor, np.int64) - self._c())
        lo = int(np.maximum(delta - L, 0).max())
        hi = int((delta + L).max())
        return lo, hi

    def meets_box(self, anchor, L: int) -> bool:
        lo, hi = self.box_supnorm_range(anchor, L)
        return lo <= self.outer and hi > self.inner

    def contains_box(self, anchor, L: int) -> bool:
        lo, hi = self.box_supnorm_range(anchor, L)
        return hi <= self.outer and lo > self.inner

    def meets_box_window(self, anchor, L: int, wcenter, W: int) -> bool:
        """Box intersect region intersect window-box nonempty (exact)."""
        a = np.asarray(anchor, np.int64)
        w = np.asarray(wcenter, np.int64)
        lo = np.maximum(a - L, w - W)
        hi = np.minimum(a + L, w + W)
        if np.any(lo > hi):
            return False
        c = self._c()
        # sup-norm range of the intersection box relative to the region center
        near = np.clip(c, lo, hi)
        far = np.where(np.abs(lo - c) >= np.abs(hi - c), lo, hi)
        m = int(np.abs(near - c).max())
        M = int(np.abs(far - c).max())
        return m <= self.outer and M > self.inner

    def shifted(self, x) -> "Region":
        c = tuple(int(a + b) for a, b in zip(self.center, x))
        return Region(center=c, outer=self.outer, inner=self.inner)


@dataclass(frozen=True)
class DomainTriplet:
    """(working region, inner target, shell) at one level and center.

    shell is where bridge boxes live; admissible sets cross from the
    boundary of the working region into the inner target.
    """

    level: int
    center: tuple
    working: Region
    target: Region
    shell: Region
    variant: str = "ball"


def domain_triplet(ladder: ScaleLadder, n: int, center=None,
                   variant: str = "ball") -> DomainTriplet:
    if center is None:
        center = (0, 0, 0)
    center = tuple(int(c) for c in center)
    k, Ln = ladder.kappa, ladder.depth(n)
    shell = Region(center, 9 * k * Ln, int(np.floor(8.5 * k * Ln)))
    if variant == "ball":
        working = Region(center, 10 * k * Ln)
        target = Region(center, 8 * k * Ln)
    elif variant == "annulus":
        working = Region(center, 10 * k * Ln, k * Ln)
        target = Region(center, 8 * k * Ln, k * Ln)
    else:
        raise ValueError(f"unknown domain variant {variant!r}")
    return DomainTriplet(level=n, center=center, working=working,
                         target=target, shell=shell, variant=variant)


def n_max_of_region(ladder: ScaleLadder, region: Region) -> int:
    """Largest k such that some level-k box fits inside the region."""
    k = 0
    while k + 1 <= ladder.n_max:
        L = ladder.depth(k + 1)
        # a box fits iff the annulus holds a full box: outer-inner width
        if region.inner < 0:
            fits = L <= region.outer
        else:
            # box must avoid the inner hole: anchor norm in
            # [inner + L + 1, outer - L], on the anchor grid
            lo, hi = region.inner + L + 1, region.outer - L
            sp = ladder.spacing(k + 1)
            fits = hi >= lo and (hi // sp) * sp >= lo
        if not fits:
            break
        k += 1
    return k


def anchor_of_site(ladder: ScaleLadder, m: int, site) -> tuple:
    """The unique level-m anchor whose box contains the site."""
    sp = ladder.spacing(m)
    s = np.asarray(site, dtype=np.int64)
    return tuple(int(v) for v in np.round(s / sp).astype(np.int64) * sp)


def tower_anchor(ladder: ScaleLadder, j: int, x) -> tuple:
    """Level-j anchor of the tower through the point x."""
    return anchor_of_site(ladder, j, x)


def box_lattice(ladder: ScaleLadder, m: int, region: Region,
                wcenter=None, W: int | None = None,
                limit: int = 2_000_000) -> np.ndarray:
    """All level-m anchors whose box meets region (and the window if given).

    Exact enumeration; errors out beyond `limit` anchors to catch runaway
    domains.
    """
    sp = ladder.spacing(m)
    L = ladder.depth(m)
    c = np.asarray(region.center, np.int64)
    lo = c - (region.outer + L)
    hi = c + (region.outer + L)
    if W is not None:
        w = np.asarray(wcenter, np.int64)
        lo = np.maximum(lo, w - (W + L))
        hi = np.minimum(hi, w + (W + L))
    axes = []
    d = len(c)
    for i in range(d):
        first = -(-lo[i] // sp) * sp
        vals = np.arange(first, hi[i] + 1, sp, dtype=np.int64)
        axes.append(vals)
    count = int(np.prod([len(a) for a in axes])) if axes else 0
    if count > limit:
        raise MemoryError(f"anchor enumeration of {count} exceeds limit {limit}")
    if count == 0:
        return np.zeros((0, d), dtype=np.int64)
    grid = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
    keep = region_box_filter(region, grid, L, wcenter, W)
    return grid[keep]


def region_box_filter(region: Region, anchors: np.ndarray, L: int,
                      wcenter=None, W: int | None = None) -> np.ndarray:
    """Vectorized mask: box(anchor) meets region (and the window box)."""
    anchors = np.atleast_2d(anchors)
    c = np.asarray(region.center, np.int64)
    lo = anchors - L
    hi = anchors + L
    if W is not None:
        w = np.asarray(wcenter, np.int64)
        lo = np.maximum(lo, w - W)
        hi = np.minimum(hi, w + W)
        nonempty = np.all(lo <= hi, axis=1)
    else:
        nonempty = np.ones(len(anchors), dtype=bool)
    near = np.clip(c, lo, hi)
    far = np.where(np.abs(lo - c) >= np.abs(hi - c), lo, hi)
    m = np.abs(near - c).max(axis=1)
    M = np.abs(far - c).max(axis=1)
    return nonempty & (m <= region.outer) & (M > region.inner)


@dataclass
class Bridge:
    """Scale-tagged boxes connecting two sets inside a shell."""

    ladder: ScaleLadder
    level: int
    domain: DomainTriplet
    boxes: list            # list[BoxId]
    b1: BoxId
    b2: BoxId
    meta: dict = field(default_factory=dict)

    def boxes_at_scale(self, m: int):
        return [b for b in self.boxes if b.m == m]


@dataclass
class Arch:
    """One-ended bridge variant: a unique top box linked down to a set."""

    ladder: ScaleLadder
    k: int
    domain: Region
    boxes: list
    top: BoxId
    b1: BoxId
    meta: dict = field(default_factory=dict)


def boxes_union_connected(ladder: ScaleLadder, boxes) -> bool:
    """Union of boxes connected iff the touching graph is (l^1 gap <= 1)."""
    nb = len(boxes)
    if nb == 0:
        return False
    anchors = [np.asarray(b.x, np.int64) for b in boxes]
    Ls = [ladder.depth(b.m) for b in boxes]
    seen = np.zeros(nb, dtype=bool)
    stack = [0]
    seen[0] = True
    while stack:
        i = stack.pop()
        for j in range(nb):
            if not seen[j]:
                gaps = np.abs(anchors[i] - anchors[j]) - (Ls[i] + Ls[j])
                if np.maximum(gaps, 0).sum() <= 1:
                    seen[j] = True
                    stack.append(j)
    return bool(seen.all())
