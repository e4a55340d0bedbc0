"""Recursive box goodness: seed events, tower events, and their cascade.

Level-0 goodness of an anchor means every seed event holds on the level-0
boxes meeting a window around it; level-k goodness forbids a pair of
far-apart (k-1)-bad anchors in the window and requires the level-k tower
events there.  Badness therefore propagates only within a bounded reach
of the primitive bad seeds, which the evaluator exploits: bad sets are
materialized as sparse anchor lists around seeds, never as full grids.

The far-apart-pair test uses that for the sup-norm the largest pairwise
distance of a set equals its largest coordinate spread, so a bounding box
of the qualifying bad anchors decides the clause exactly.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numba
import numpy as np

from ..scales import ScaleLadder
from .geometry import Region, box_lattice, region_box_filter


class TableOracle:
    """Synthetic seed/tower labels: default-true minus explicit bad sets.

    Arbitrary finite label tables for geometry fuzzing; f_bad holds
    level-0 seed anchors, h_bad maps level -> tower anchors.
    """

    def __init__(self, d: int, f_bad=(), h_bad=None):
        self.d = d
        self._f_bad = {tuple(int(v) for v in x) for x in f_bad}
        self._h_bad = {int(n): {tuple(int(v) for v in x) for x in xs}
                       for n, xs in (h_bad or {}).items()}

    def f_good(self, x) -> bool:
        return tuple(int(v) for v in x) not in self._f_bad

    def h_good(self, n: int, x) -> bool:
        return tuple(int(v) for v in x) not in self._h_bad.get(n, ())

    def f_bad_array(self, d=None) -> np.ndarray:
        if not self._f_bad:
            return np.zeros((0, self.d), dtype=np.int64)
        return np.array(sorted(self._f_bad), dtype=np.int64)

    def h_bad_array(self, n: int) -> np.ndarray:
        bad = self._h_bad.get(n, ())
        if not bad:
            return np.zeros((0, self.d), dtype=np.int64)
        return np.array(sorted(bad), dtype=np.int64)

    def h_levels(self):
        return sorted(self._h_bad)


class FieldOracle:
    """Seed/tower events read off precomputed boolean anchor grids.

    Grids are built by the field experiments (event = a field-difference
    staying above its threshold on the box window); this class only
    answers queries.  Every grid is a dense boolean cube over anchors
    {origin + spacing * index}; queries outside any grid raise.
    """

    def __init__(self, d: int, ladder: ScaleLadder, f_grid: np.ndarray,
                 f_origin, h_grids: dict):
        self.d = d
        self.ladder = ladder
        self._f = (np.asarray(f_origin, np.int64), ladder.spacing(0),
                   np.asarray(f_grid, bool))
        self._h = {int(n): (np.asarray(org, np.int64), ladder.spacing(n),
                            np.asarray(grid, bool))
                   for n, (org, grid) in h_grids.items()}

    def _lookup(self, entry, x):
        org, sp, grid = entry
        idx = (np.asarray(x, np.int64) - org) // sp
        if np.any((np.asarray(x, np.int64) - org) % sp):
            raise KeyError(f"{x} is not on the anchor grid")
        if np.any(idx < 0) or np.any(idx >= grid.shape):
            raise KeyError(f"anchor {x} outside the precomputed oracle domain")
        return bool(grid[tuple(idx)])

    def f_good(self, x) -> bool:
        return self._lookup(self._f, x)

    def h_good(self, n: int, x) -> bool:
        if n not in self._h:
            raise KeyError(f"no tower grid at level {n}")
        return self._lookup(self._h[n], x)

    def _bad_of(self, entry) -> np.ndarray:
        org, sp, grid = entry
        idx = np.argwhere(~grid)
        return org + sp * idx

    def f_bad_array(self) -> np.ndarray:
        return self._bad_of(self._f)

    def h_bad_array(self, n: int) -> np.ndarray:
        if n not in self._h:
            return np.zeros((0, self.d), dtype=np.int64)
        return self._bad_of(self._h[n])

    def h_levels(self):
        return sorted(self._h)


@numba.njit(cache=True)
def _pair_spread_mask(cands, W, members, Lm, rc, router, rinner, threshold, out):
    """out[i] = True iff the members whose box meets region-and-window(i)
    have coordinate spread >= threshold on some axis."""
    N = cands.shape[0]
    M = members.shape[0]
    d = cands.shape[1]
    for i in range(N):
        found2 = False
        first = True
        ok = False
        mn = np.empty(d, np.int64)
        mx = np.empty(d, np.int64)
        for j in range(M):
            # quick reject: member box must meet the window at all
            far = 0
            for a in range(d):
                v = members[j, a] - cands[i, a]
                if v < 0:
                    v = -v
                if v > far:
                    far = v
            if far > W + Lm:
                continue
            # exact: box(member) cap window(cand) cap region nonempty
            m_lo = 0
            m_hi = 0
            for a in range(d):
                lo = members[j, a] - Lm
                hi = members[j, a] + Lm
                wl = cands[i, a] - W
                wh = cands[i, a] + W
                if wl > lo:
                    lo = wl
                if wh < hi:
                    hi = wh
                c = rc[a]
                nearv = c
                if nearv < lo:
                    nearv = lo
                if nearv > hi:
                    nearv = hi
                dv = nearv - c
                if dv < 0:
                    dv = -dv
                if dv > m_lo:
                    m_lo = dv
                f1 = lo - c
                if f1 < 0:
                    f1 = -f1
                f2 = hi - c
                if f2 < 0:
                    f2 = -f2
                fv = f1 if f1 > f2 else f2
                if fv > m_hi:
                    m_hi = fv
            if m_lo > router or m_hi <= rinner:
                continue
            if first:
                for a in range(d):
                    mn[a] = members[j, a]
                    mx[a] = members[j, a]
                first = False
            else:
                found2 = True
                for a in range(d):
                    if members[j, a] < mn[a]:
                        mn[a] = members[j, a]
                    if members[j, a] > mx[a]:
                        mx[a] = members[j, a]
        if found2:
            spread = 0
            for a in range(d):
                s = mx[a] - mn[a]
                if s > spread:
                    spread = s
            ok = spread >= threshold
        out[i] = ok
    return out


def _any_seed_hits(cands: np.ndarray, W: int, seeds: np.ndarray, L: int,
                   region: Region) -> np.ndarray:
    """Mask over candidates: some seed's box meets region and the window."""
    hit = np.zeros(len(cands), dtype=bool)
    c = np.asarray(region.center, np.int64)
    for z in seeds:
        lo = np.maximum(z - L, cands - W)
        hi = np.minimum(z + L, cands + W)
        nonempty = np.all(lo <= hi, axis=1)
        near = np.clip(c, lo, hi)
        far = np.where(np.abs(lo - c) >= np.abs(hi - c), lo, hi)
        m = np.abs(near - c).max(axis=1)
        M = np.abs(far - c).max(axis=1)
        hit |= nonempty & (m <= region.outer) & (M > region.inner)
    return hit


class GoodnessEvaluator:
    """Sparse goodness evaluation against one domain region.

    All badness lives within a bounded reach of the oracle's bad seeds;
    point queries far from every seed return good immediately, and bad
    anchor sets are materialized per level as sparse lists.
    """

    def __init__(self, oracle, ladder: ScaleLadder, domain: Region):
        self.oracle = oracle
        self.ladder = ladder
        self.domain = domain
        self.d = len(domain.center)
        self._bad = {}
        self._seed_cache = {}

    # -- reach bookkeeping ------------------------------------------------

    def window_radius(self, k: int) -> int:
        return 10 * self.ladder.kappa * self.ladder.depth(k)

    def reach(self, k: int) -> int:
        """Badness at level k stays within this distance of some seed."""
        if k == 0:
            return self.window_radius(0) + 2 * self.ladder.depth(0)
        down = self.ladder.depth(k - 1) + self.reach(k - 1)
        return self.window_radius(k) + max(self.ladder.depth(k), down)

    def _seeds_upto(self, k: int) -> np.ndarray:
        if k not in self._seed_cache:
            parts = [self.oracle.f_bad_array()]
            for j in range(1, k + 1):
                parts.append(self.oracle.h_bad_array(j))
            self._seed_cache[k] = np.vstack([p for p in parts if len(p)]) \
                if any(len(p) for p in parts) else np.zeros((0, self.d), np.int64)
        return self._seed_cache[k]

    # -- bad sets ----------------------------------------------------------

    def _zone_candidates(self, k: int) -> np.ndarray:
        seeds = self._seeds_upto(k)
        if len(seeds) == 0:
            return np.zeros((0, self.d), dtype=np.int64)
        sp = self.ladder.spacing(k)
        r = self.reach(k)
        reach_idx = r // sp + 1
        rng = np.arange(-reach_idx, reach_idx + 1, dtype=np.int64) * sp
        offs = np.stack(np.meshgrid(*([rng] * self.d), indexing="ij"),
                        axis=-1).reshape(-1, self.d)
        cands = []
        for s in seeds:
            base = (np.round(s / sp).astype(np.int64)) * sp
            cands.append(base + offs)
        cands = np.unique(np.vstack(cands), axis=0)
        keep = np.abs(cands[:, None, :] - seeds[None, :, :]).max(axis=2).min(axis=1) <= r
        return cands[keep]

    def bad_anchors(self, k: int) -> np.ndarray:
        """All level-k bad anchors (sparse; exact)."""
        if k in self._bad:
            return self._bad[k]
        cands = self._zone_candidates(k)
        if len(cands) == 0:
            self._bad[k] = cands
            return cands
        W = self.window_radius(k)
        if k == 0:
            bad = _any_seed_hits(cands, W, self.oracle.f_bad_array(),
                                 self.ladder.depth(0), self.domain)
        else:
            bad = _any_seed_hits(cands, W, self.oracle.h_bad_array(k),
                                 self.ladder.depth(k), self.domain)
            members = self.bad_anchors(k - 1)
            if len(members):
                out = np.zeros(len(cands), dtype=np.bool_)
                _pair_spread_mask(
                    np.ascontiguousarray(cands), W,
                    np.ascontiguousarray(members), self.ladder.depth(k - 1),
                    np.asarray(self.domain.center, np.int64),
                    self.domain.outer, self.domain.inner,
                    22 * self.ladder.kappa * self.ladder.depth(k - 1), out)
                bad |= out
        self._bad[k] = cands[bad]
        return self._bad[k]

    # -- queries -----------------------------------------------------------

    def is_good(self, k: int, x, window_radius: int | None = None) -> bool:
        """Level-k goodness of anchor x w.r.t. the domain, with the window
        B_W(x) (default W = 10 kappa L_k)."""
        x = np.asarray(x, np.int64)
        W = self.window_radius(k) if window_radius is None else window_radius
        L = self.ladder.depth(k)
        seeds = self._seeds_upto(k)
        if len(seeds) == 0:
            return True
        # quick reject: nothing bad can reach this window
        margin = W + max(L, (self.ladder.depth(k - 1) + self.reach(k - 1))
                         if k else L)
        if np.abs(seeds - x).max(axis=1).min() > margin:
            return True
        hseeds = (self.oracle.h_bad_array(k) if k
                  else self.oracle.f_bad_array())
        if len(hseeds) and _any_seed_hits(x[None, :], W, hseeds, L, self.domain)[0]:
            return False
        if k == 0:
            return True
        members = self.bad_anchors(k - 1)
        if len(members) == 0:
            return True
        out = np.zeros(1, dtype=np.bool_)
        _pair_spread_mask(np.ascontiguousarray(x[None, :]), W,
                          np.ascontiguousarray(members),
                          self.ladder.depth(k - 1),
                          np.asarray(self.domain.center, np.int64),
                          self.domain.outer, self.domain.inner,
                          22 * self.ladder.kappa * self.ladder.depth(k - 1), out)
        return not bool(out[0])


def evaluate_goodness(oracle, ladder: ScaleLadder, n: int, x, domain: Region,
                      evaluator: GoodnessEvaluator | None = None) -> bool:
    """Level-n goodness of anchor x inside the given domain region."""
    ev = evaluator or GoodnessEvaluator(oracle, ladder, domain)
    return ev.is_good(n, x)


def brute_goodness(oracle, ladder: ScaleLadder, n: int, x, domain: Region) -> bool:
    """Direct enumeration of the goodness recursion (reference; tiny only)."""
    x = np.asarray(x, np.int64)
    W = 10 * ladder.kappa * ladder.depth(n)
    if n == 0:
        anchors = box_lattice(ladder, 0, domain, x, W)
        return all(oracle.f_good(a) for a in anchors)
    for z in box_lattice(ladder, n, domain, x, W):
        if not oracle.h_good(n, z):
            return False
    prev = box_lattice(ladder, n - 1, domain, x, W)
    bad = [a for a in prev if not brute_goodness(oracle, ladder, n - 1, a, domain)]
    t = 22 * ladder.kappa * ladder.depth(n - 1)
    for a, b in itertools.combinations(bad, 2):
        if np.abs(np.asarray(a) - np.asarray(b)).max() >= t:
            return False
    return True


@dataclass
class RecursionBoundReport:
    Gamma: float
    c1: float
    side_conditions_hold: bool
    log2_bounds: list
    inductive_step_holds: bool


def recursion_bound_check(Gamma: float, c1: float, n_max: int) -> RecursionBoundReport:
    """Arithmetic check of the double-exponential badness recursion.

    The inductive bound q_n <= c1 * Gamma * 2^(-2^n) survives
    q_n <= (1/4) Gamma^2 q_{n-1}^2 + (1/2) Gamma c1 2^(-2^n)
    when (1/4) c1 Gamma^3 <= 1/2 and c1 Gamma <= 1/2; computed in log2 to
    stay finite at any level.
    """
    side = (0.25 * c1 * Gamma ** 3 <= 0.5) and (c1 * Gamma <= 0.5)
    log2b = []
    ok = True
    if c1 > 0:
        lc = math.log2(c1) + math.log2(Gamma)
        for nn in range(n_max + 1):
            log2b.append(lc - 2.0 ** nn)
        for nn in range(1, n_max + 1):
            # rhs of the recursion with q_{n-1} at its bound, in log2
            a = math.log2(0.25) + 2 * math.log2(Gamma) + 2 * (lc - 2.0 ** (nn - 1))
            b = math.log2(0.5) + math.log2(Gamma) + math.log2(c1) - 2.0 ** nn
            rhs = max(a, b) + math.log2(1 + 2.0 ** (-abs(a - b)))
            if rhs > lc - 2.0 ** nn:
                ok = False
    else:
        log2b = [-math.inf] * (n_max + 1)
    return RecursionBoundReport(Gamma=Gamma, c1=c1, side_conditions_hold=side,
                                log2_bounds=log2b,
                                inductive_step_holds=ok and side)
