"""Deterministic construction of good bridges and arches.

The construction follows the three-case scheme: a direct path of scale-0
boxes at the bottom level; a descent to the next level down when the two
sets come close on the chosen deck sphere; and otherwise a deck of
(n-1)-boxes routed around a sphere inside the shell, finished by two
arches that step down through the scales to scale-0 boxes touching the
sets.  Shell radii and margins are derived from the ladder (they reduce
to fixed multiples of the deck scale), so desk-scale ladders work
whenever the shell is thick enough; when it is not, construction fails
with a concrete witness instead of returning out-of-spec geometry.
Every returned object is self-certified against the full clause list.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from ..lattice import sup_dist_box_set
from ..scales import ScaleLadder
from .geometry import Arch, BoxId, Bridge, DomainTriplet, Region, domain_triplet
from .goodness import GoodnessEvaluator
from .validate import validate_arch, validate_bridge


@dataclass
class FailureWitness:
    reason: str
    details: dict = field(default_factory=dict)

    def __bool__(self):  # failures are falsy so `if result:` reads naturally
        return False


def recommended_K(ladder: ScaleLadder, d: int = 3) -> int:
    """Complexity budget large enough for this construction's paths."""
    return max(100, 16 * d * ladder.kappa * ladder.ell0,
               32 * d * ladder.kappa ** 2)


# --- site-set helpers ---------------------------------------------------------


def site_components(sites: np.ndarray) -> list:
    """Nearest-neighbor connected components of an explicit site set."""
    sites = np.asarray(sites, np.int64).reshape(-1, sites.shape[-1] if sites.ndim > 1 else len(sites))
    if len(sites) == 0:
        return []
    index = {tuple(s): i for i, s in enumerate(sites)}
    parent = list(range(len(sites)))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    d = sites.shape[1]
    for i, s in enumerate(sites):
        for ax in range(d):
            for step in (-1, 1):
                t = list(s)
                t[ax] += step
                j = index.get(tuple(t))
                if j is not None:
                    ra, rb = find(i), find(j)
                    if ra != rb:
                        parent[ra] = rb
    groups = {}
    for i in range(len(sites)):
        groups.setdefault(find(i), []).append(i)
    return [sites[np.array(g)] for g in groups.values()]


def is_admissible(sites: np.ndarray, domain: DomainTriplet) -> bool:
    """Every component reaches the working-region boundary sphere and at
    least one component meets the inner target region."""
    comps = site_components(np.asarray(sites, np.int64))
    if not comps:
        return False
    c = np.asarray(domain.center, np.int64)
    outer = domain.working.outer
    meets_target = False
    for comp in comps:
        norms = np.abs(comp - c).max(axis=1)
        if not (norms == outer).any():
            return False
        if domain.target.contains_sites(comp).any():
            meets_target = True
    return meets_target


def _fill_holes_anchors(bad: np.ndarray, spacing: int) -> set:
    """Hole-filled bad set on the anchor grid, as a set of tuples.

    Fill(U) is the complement of the unbounded nearest-neighbor component
    of the complement, computed on the quotient grid over the bad set's
    bounding box plus a two-cell margin.
    """
    if len(bad) == 0:
        return set()
    idx = bad // spacing
    lo = idx.min(axis=0) - 2
    shape = tuple(idx.max(axis=0) - lo + 5)
    grid = np.zeros(shape, dtype=bool)
    for p in idx - lo:
        grid[tuple(p)] = True
    filled = ndi.binary_fill_holes(grid, structure=ndi.generate_binary_structure(grid.ndim, 1))
    out = set()
    for p in np.argwhere(filled):
        out.add(tuple((p + lo) * spacing))
    return out


# --- deterministic anchor search -----------------------------------------------

_SEARCH_BUDGET = 400_000


def _anchor_search(starts, is_target, passable, spacing: int, d: int,
                   heuristic=None, budget: int = _SEARCH_BUDGET):
    """Shortest anchor path (A* when a heuristic is given, else BFS).

    Deterministic: ties broken by anchor tuple order.  Returns the path
    list or None; passable() is consulted once per anchor (memoized here).
    """
    steps = []
    for ax in range(d):
        for sgn in (1, -1):
            e = [0] * d
            e[ax] = sgn * spacing
            steps.append(tuple(e))
    seen = {}
    heap = []
    for s in sorted(starts):
        if not passable(s):
            continue
        h0 = heuristic(s) if heuristic else 0
        heapq.heappush(heap, (h0, s, None))
    visits = 0
    passable_memo = {}

    def ok(a):
        if a not in passable_memo:
            passable_memo[a] = passable(a)
        return passable_memo[a]

    while heap:
        f, a, parent = heapq.heappop(heap)
        if a in seen:
            continue
        seen[a] = parent
        visits += 1
        if visits > budget:
            return None
        if is_target(a):
            path = [a]
            while seen[path[-1]] is not None:
                path.append(seen[path[-1]])
            path.reverse()
            return path
        g = f - (heuristic(a) if heuristic else 0)
        for e in steps:
            b = tuple(x + dx for x, dx in zip(a, e))
            if b not in seen and ok(b):
                hb = heuristic(b) if heuristic else 0
                heapq.heappush(heap, (g + 1 + hb, b, a))
    return None


def _dist_box_sites(anchor, L, sites):
    return sup_dist_box_set(anchor, L, sites)


# --- scale-0 paths --------------------------------------------------------------


def _zero_box_path(ladder, ev, shell: Region, s1, s2, avoid_sites,
                   source_sites=None, target_sites=None, budget=_SEARCH_BUDGET):
    """Path of scale-0 boxes inside the shell from a box meeting s1 to one
    meeting s2; interior boxes avoid avoid_sites; seed events checked."""
    d = s1.shape[1]
    sp = ladder.spacing(0)
    L0 = ladder.depth(0)
    src_sites = s1 if source_sites is None else source_sites
    tgt_sites = s2 if target_sites is None else target_sites

    def contains(a):
        return shell.contains_box(a, L0)

    def f_ok(a):
        return ev.is_good(0, a, window_radius=0) if False else ev.oracle.f_good(a)

    starts = set()
    for s in src_sites:
        base = tuple(int(v) for v in (np.round(s / sp)).astype(np.int64) * sp)
        for off in _local_offsets(d, sp, 1):
            a = tuple(b + o for b, o in zip(base, off))
            if contains(a) and _dist_box_sites(a, L0, src_sites) == 0:
                starts.add(a)
    starts = {a for a in starts if f_ok(a)}
    if not starts:
        return None, FailureWitness("no admissible start box",
                                    {"stage": "scale0-path"})

    def is_target(a):
        return _dist_box_sites(a, L0, tgt_sites) == 0

    def passable(a):
        if not contains(a):
            return False
        if not f_ok(a):
            return False
        touches_src = _dist_box_sites(a, L0, src_sites) == 0
        touches_tgt = _dist_box_sites(a, L0, tgt_sites) == 0
        if touches_src or touches_tgt:
            return True
        return _dist_box_sites(a, L0, avoid_sites) > 0

    def heuristic(a):
        dist = _dist_box_sites(a, L0, tgt_sites)
        return -(-dist // sp)

    path = _anchor_search(starts, is_target, passable, sp, d, heuristic, budget)
    if path is None:
        return None, FailureWitness("no scale-0 route",
                                    {"stage": "scale0-path"})
    # trim so only the endpoints touch the sets
    first = max(i for i, a in enumerate(path)
                if _dist_box_sites(a, L0, src_sites) == 0)
    path = path[first:]
    last = min(i for i, a in enumerate(path)
               if _dist_box_sites(a, L0, tgt_sites) == 0)
    path = path[:last + 1]
    return path, None


def _local_offsets(d, sp, reach):
    rng = range(-reach * sp, reach * sp + 1, sp)
    out = [()]
    for _ in range(d):
        out = [t + (v,) for t in out for v in rng]
    return out


# --- arches ----------------------------------------------------------------------


def construct_arch(u_sites, top: BoxId, oracle, ladder: ScaleLadder,
                   ev: GoodnessEvaluator | None = None,
                   certify: bool = True):
    """Good arch between the set U and the top box, inside B_{2 kappa L_k}.

    Preconditions: kappa L_k <= d(U, top) <= (kappa+3) L_k and every
    component of U reaches the boundary of B_{2 kappa L_k^+}(top anchor);
    components that do not are dropped.
    """
    u_sites = np.asarray(u_sites, np.int64)
    d = u_sites.shape[1]
    k, z = top.m, np.asarray(top.x, np.int64)
    kap = ladder.kappa
    Lk = ladder.depth(k)
    ev = ev or GoodnessEvaluator(oracle, ladder, Region(tuple(z), 10 * kap * Lk))
    Lk_plus = Lk + ladder.depth(max(k - 1, 0))
    sigma = Region(tuple(int(v) for v in z), 2 * kap * Lk)
    btilde = 2 * kap * Lk_plus
    # precondition: distance window
    dist = _dist_box_sites(z, Lk, u_sites)
    if not (kap * Lk <= dist <= (kap + 3) * Lk):
        return FailureWitness("set-to-box distance outside the admissible window",
                              {"distance": dist, "lo": kap * Lk,
                               "hi": (kap + 3) * Lk})
    # prune components of U that do not reach the enclosing sphere
    comps = site_components(u_sites)
    kept = [c for c in comps
            if (np.abs(c - z).max(axis=1) >= btilde).any()]
    if not kept:
        return FailureWitness("no component of the set reaches the arch horizon",
                              {"stage": f"arch-k{k}"})
    u = np.vstack(kept)
    u = u[np.abs(u - z).max(axis=1) <= btilde]

    if k == 0:
        starts_shell = sigma
        path, fw = _zero_box_path(ladder, ev, sigma, u, u, u,
                                  source_sites=u,
                                  target_sites=np.array([z]))
        if fw is not None:
            fw.details["stage"] = "arch-k0"
            return fw
        boxes = [BoxId(0, tuple(int(v) for v in a)) for a in path]
        if BoxId(0, tuple(int(v) for v in z)) not in boxes:
            boxes.append(BoxId(0, tuple(int(v) for v in z)))
        arch = Arch(ladder=ladder, k=0, domain=sigma, boxes=boxes,
                    top=BoxId(0, tuple(int(v) for v in z)), b1=boxes[0])
        return _certified_arch(arch, u_sites, oracle, certify)

    Lm = ladder.depth(k - 1)
    sp = ladder.spacing(k - 1)
    bbar = kap * (2 * Lk - 3 * Lm)
    # locally-bad lower anchors near the window, hole-filled
    near = ev.bad_anchors(k - 1)
    if len(near):
        inwin = np.abs(near - z).max(axis=1) <= bbar + Lm
        bad_local = [tuple(a) for a in near[inwin]
                     if not ev.is_good(k - 1, a, window_radius=3 * kap * Lm)]
        blocked = _fill_holes_anchors(np.array(bad_local, np.int64).reshape(-1, d), sp) \
            if bad_local else set()
    else:
        blocked = set()

    def passable(a):
        arr = np.asarray(a, np.int64)
        if np.abs(arr - z).max() > bbar + Lm:      # guide: stay near B-bar
            return False
        if not sigma.contains_box(arr, Lm):
            return False
        if a in blocked:
            return False
        if _dist_box_sites(arr, Lm, u) <= kap * Lm:
            return False
        return ev.is_good(k - 1, arr, window_radius=3 * kap * Lm)

    def is_target(a):
        dd = _dist_box_sites(np.asarray(a, np.int64), Lm, u)
        return kap * Lm < dd <= (kap + 3) * Lm

    def heuristic(a):
        dd = _dist_box_sites(np.asarray(a, np.int64), Lm, u)
        return max(0, -(-(dd - (kap + 3) * Lm) // sp))

    starts = set()
    base = tuple(int(v) for v in (np.round(z / sp)).astype(np.int64) * sp)
    reach = -(-(Lk + Lm + 1) // sp) + 1
    for off in _local_offsets(d, sp, reach):
        a = tuple(b + o for b, o in zip(base, off))
        gaps = np.maximum(np.abs(np.asarray(a) - z) - (Lk + Lm), 0).sum()
        if gaps <= 1:
            starts.add(a)
    path = _anchor_search(starts, is_target, passable, sp, d, heuristic)
    if path is None:
        return FailureWitness("no route to the set at the lower scale",
                              {"stage": f"arch-k{k}"})
    y0 = np.asarray(path[-1], np.int64)
    u_next = u[np.abs(u - y0).max(axis=1) <= 2 * kap * (Lm + ladder.depth(max(k - 2, 0)))]
    if len(u_next) == 0:
        return FailureWitness("set does not enter the next arch window",
                              {"stage": f"arch-k{k}"})
    sub = construct_arch(u_next, BoxId(k - 1, tuple(int(v) for v in y0)),
                         oracle, ladder, ev=ev, certify=False)
    if isinstance(sub, FailureWitness):
        return sub
    boxes = [top] + [BoxId(k - 1, tuple(int(v) for v in a)) for a in path]
    merged = {b: None for b in boxes}
    for b in sub.boxes:
        merged[b] = None
    arch = Arch(ladder=ladder, k=k, domain=sigma, boxes=list(merged),
                top=top, b1=sub.b1)
    return _certified_arch(arch, u_sites, oracle, certify)


def _certified_arch(arch, u_sites, oracle, certify):
    if not certify:
        return arch
    report = validate_arch(arch, u_sites, oracle=oracle, g2_mode="window")
    if not report.ok:
        return FailureWitness("constructed arch failed certification",
                              {"report": report.to_text(),
                               "internal": True})
    arch.meta["certification"] = report
    return arch


# --- bridges ---------------------------------------------------------------------


def construct_bridge(s1_sites, s2_sites, oracle, ladder: ScaleLadder, n: int,
                     center=(0, 0, 0), variant: str = "ball",
                     certify: bool = True):
    """Good bridge between two admissible sets, or a failure witness."""
    s1 = np.asarray(s1_sites, np.int64)
    s2 = np.asarray(s2_sites, np.int64)
    d = s1.shape[1]
    domain = domain_triplet(ladder, n, center, variant)
    for name, s in (("first", s1), ("second", s2)):
        if not is_admissible(s, domain):
            return FailureWitness(f"{name} set is not admissible",
                                  {"level": n})
    ev = GoodnessEvaluator(oracle, ladder, domain.working)
    result = _construct_bridge_inner(s1, s2, oracle, ladder, n, domain, ev)
    if isinstance(result, FailureWitness):
        return result
    if certify:
        report = validate_bridge(result, s1, s2, oracle=oracle, g2_mode="window")
        if not report.ok:
            return FailureWitness("constructed bridge failed certification",
                                  {"report": report.to_text(), "internal": True})
        result.meta["certification"] = report
    return result


def _construct_bridge_inner(s1, s2, oracle, ladder, n, domain, ev):
    d = s1.shape[1]
    kap = ladder.kappa
    c = np.asarray(domain.center, np.int64)
    avoid = np.vstack([s1, s2])

    if n == 0:
        path, fw = _zero_box_path(ladder, ev, domain.shell, s1, s2, avoid)
        if fw is not None:
            return fw
        boxes = [BoxId(0, a) for a in path]
        return Bridge(ladder=ladder, level=0, domain=domain, boxes=boxes,
                      b1=boxes[0], b2=boxes[-1], meta={"case": 1})

    L1 = ladder.depth(n - 1)
    Ln = ladder.depth(n)
    inner, outer = domain.shell.inner, domain.shell.outer
    if n == 1:
        w = (4 * kap + 3) * L1
    else:
        w = (2 * kap + 3) * L1 + 2 * kap * ladder.depth(n - 2)
    m_descend = (9 * kap + 2) * L1
    margin = max(w, m_descend)
    band_lo, band_hi = inner + 1 + margin, outer - margin
    if band_lo > band_hi:
        band_lo, band_hi = inner + 1 + w, outer - w
        if band_lo > band_hi:
            return FailureWitness("shell too thin for the deck geometry",
                                  {"level": n, "needed": 2 * w + 1,
                                   "available": outer - inner})
    d_sep = (22 * kap + 2) * L1 + 2 * (w + 2 * L1)
    radii = list(range(band_lo, band_hi + 1, d_sep)) or [band_lo]

    last_fail = None
    for rho in radii:
        res = _deck_attempt(s1, s2, oracle, ladder, n, domain, ev, rho, w)
        if not isinstance(res, FailureWitness):
            return res
        last_fail = res
    return last_fail


def _deck_attempt(s1, s2, oracle, ladder, n, domain, ev, rho, w):
    d = s1.shape[1]
    kap = ladder.kappa
    c = np.asarray(domain.center, np.int64)
    L1 = ladder.depth(n - 1)
    sp = ladder.spacing(n - 1)

    def in_V(sites):
        norms = np.abs(sites - c).max(axis=1)
        return sites[(norms >= rho - w) & (norms <= rho + w)]

    s1v, s2v = in_V(s1), in_V(s2)
    if len(s1v) == 0 or len(s2v) == 0:
        return FailureWitness("a set misses the deck shell",
                              {"rho": rho})
    gap = int(np.abs(s1v[:, None, :] - s2v[None, :, :]).max(axis=2).min())

    if gap < 15 * kap * L1:
        return _close_sets_case(s1, s2, s1v, s2v, oracle, ladder, n,
                                domain, ev, rho, w)

    avoid = np.vstack([s1, s2])
    shell_w = Region(tuple(int(v) for v in c), rho + L1, rho - L1 - 1)

    def passable(a):
        arr = np.asarray(a, np.int64)
        if not shell_w.meets_box(arr, L1):
            return False
        if _dist_box_sites(arr, L1, s1v) <= kap * L1:
            return False
        if _dist_box_sites(arr, L1, s2v) <= kap * L1:
            return False
        return ev.is_good(n - 1, arr, window_radius=3 * kap * L1)

    def near(a, sites):
        return _dist_box_sites(np.asarray(a, np.int64), L1, sites) <= (kap + 3) * L1

    starts = set()
    for s in s1v:
        base = (np.round(s / sp)).astype(np.int64) * sp
        for off in _local_offsets(d, sp, -(-((kap + 4) * L1) // sp)):
            a = tuple(int(v) for v in (base + np.asarray(off)))
            if passable(a) and near(a, s1v):
                starts.add(a)
    if not starts:
        return FailureWitness("no deck start next to the first set",
                              {"rho": rho})

    def heuristic(a):
        dist = _dist_box_sites(np.asarray(a, np.int64), L1, s2v)
        return max(0, -(-(dist - (kap + 3) * L1) // sp))

    path = _anchor_search(starts, lambda a: near(a, s2v), passable, sp, d,
                          heuristic)
    if path is None:
        return FailureWitness("no deck route on the shell", {"rho": rho})

    deck = [BoxId(n - 1, a) for a in path]
    g1, gN = np.asarray(path[0], np.int64), np.asarray(path[-1], np.int64)
    arches = []
    b_ends = []
    for sv, g in ((s1v, g1), (s2v, gN)):
        btilde = 2 * kap * (L1 + ladder.depth(max(n - 2, 0)))
        u = sv[np.abs(sv - g).max(axis=1) <= btilde]
        if len(u) == 0:
            return FailureWitness("deck end lost contact with its set",
                                  {"rho": rho})
        arch = construct_arch(u, BoxId(n - 1, tuple(int(v) for v in g)),
                              oracle, ladder, ev=ev, certify=False)
        if isinstance(arch, FailureWitness):
            return arch
        arches.append(arch)
        b_ends.append(arch.b1)
    merged = {}
    for b in deck:
        merged[b] = None
    for arch in arches:
        for b in arch.boxes:
            merged[b] = None
    return Bridge(ladder=ladder, level=n, domain=domain, boxes=list(merged),
                  b1=b_ends[0], b2=b_ends[1],
                  meta={"case": 3, "rho": rho})


def _close_sets_case(s1, s2, s1v, s2v, oracle, ladder, n, domain, ev, rho, w):
    """The two sets come close on the deck sphere: connect at finer scales."""
    d = s1.shape[1]
    kap = ladder.kappa
    c = np.asarray(domain.center, np.int64)
    L1 = ladder.depth(n - 1)
    avoid = np.vstack([s1, s2])
    if n == 1:
        # a direct scale-0 path; no separation constraints bind at scale 0
        path, fw = _zero_box_path(ladder, ev, domain.shell, s1, s2, avoid,
                                  source_sites=s1v, target_sites=s2v)
        if fw is not None:
            return fw
        boxes = [BoxId(0, a) for a in path]
        return Bridge(ladder=ladder, level=1, domain=domain, boxes=boxes,
                      b1=boxes[0], b2=boxes[-1], meta={"case": 2, "rho": rho})
    # descend: recreate the picture one level down around the closest pair
    i, j = np.unravel_index(
        np.argmin(np.abs(s1v[:, None, :] - s2v[None, :, :]).max(axis=2)),
        (len(s1v), len(s2v)))
    mid = (s1v[i] + s2v[j]) // 2
    sp = ladder.spacing(n - 1)
    xstar = (np.round(mid / sp)).astype(np.int64) * sp
    sub_outer = 10 * kap * L1
    norm = int(np.abs(xstar - c).max())
    if not (domain.shell.inner + 1 + 9 * kap * L1 + L1 <= norm
            and norm + 9 * kap * L1 + L1 <= domain.shell.outer):
        return FailureWitness("shell too thin to descend a level",
                              {"level": n, "anchor_norm": norm})
    sub_domain = domain_triplet(ladder, n - 1,
                               tuple(int(v) for v in xstar), "ball")
    s1t = s1[np.abs(s1 - xstar).max(axis=1) <= sub_outer]
    s2t = s2[np.abs(s2 - xstar).max(axis=1) <= sub_outer]
    for name, st in (("first", s1t), ("second", s2t)):
        if not is_admissible(st, sub_domain):
            return FailureWitness(
                f"{name} set not admissible after descending",
                {"level": n - 1, "anchor": tuple(int(v) for v in xstar)})
    sub_ev = GoodnessEvaluator(oracle, ladder, sub_domain.working)
    sub = _construct_bridge_inner(s1t, s2t, oracle, ladder, n - 1,
                                  sub_domain, sub_ev)
    if isinstance(sub, FailureWitness):
        return sub
    return Bridge(ladder=ladder, level=n, domain=domain, boxes=sub.boxes,
                  b1=sub.b1, b2=sub.b2,
                  meta={"case": 2, "rho": rho,
                        "descend_center": tuple(int(v) for v in xstar)})
