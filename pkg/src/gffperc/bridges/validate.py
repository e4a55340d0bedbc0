"""Independent clause-by-clause certification of bridges and arches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..lattice import sup_dist_box_set
from .geometry import (
    Arch,
    Bridge,
    Region,
    boxes_union_connected,
    n_max_of_region,
    tower_anchor,
)


@dataclass
class ClauseResult:
    clause: str
    passed: bool
    witness: str = ""


@dataclass
class CertificationReport:
    clauses: list = field(default_factory=list)

    def add(self, clause: str, passed: bool, witness: str = ""):
        self.clauses.append(ClauseResult(clause, passed, witness))

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.clauses)

    def failing(self):
        return [c for c in self.clauses if not c.passed]

    def to_text(self) -> str:
        lines = []
        for c in self.clauses:
            status = "PASS" if c.passed else "FAIL"
            tail = f" {c.witness}" if c.witness else ""
            lines.append(f"{c.clause} {status}{tail}")
        return "\n".join(lines) + "\n"


def _check_anchor_grid(ladder, box) -> bool:
    sp = ladder.spacing(box.m)
    return all(v % sp == 0 for v in box.x)


def _containment_clause(report, ladder, boxes, level, shell: Region):
    ok = True
    for b in boxes:
        if not (0 <= b.m <= level):
            report.add("B1", False, f"box {b} has scale outside 0..{level}")
            return
        if not _check_anchor_grid(ladder, b):
            report.add("B1", False, f"box {b} anchor off the scale-{b.m} lattice")
            return
        if not shell.contains_box(b.x, ladder.depth(b.m)):
            report.add("B1", False, f"box {b} not inside the shell")
            return
    if not boxes_union_connected(ladder, boxes):
        report.add("B1", False, "union of boxes is disconnected")
        return
    report.add("B1", ok)


def _endpoint_clause(report, ladder, boxes, endpoints, sets, clause="B2"):
    """endpoints: list of (BoxId, site-set) pairs; other boxes avoid all sets."""
    for b, sites in endpoints:
        if b.m != 0:
            report.add(clause, False, f"endpoint {b} is not a scale-0 box")
            return
        if b not in boxes:
            report.add(clause, False, f"endpoint {b} missing from the collection")
            return
        if sup_dist_box_set(b.x, ladder.depth(0), sites) > 0:
            report.add(clause, False, f"endpoint {b} does not meet its set")
            return
    endpoint_ids = {id_ for b, _ in endpoints for id_ in [b]}
    allsites = np.vstack([s for _, s in endpoints]) if endpoints else np.zeros((0, 1))
    union_sites = np.vstack(sets) if sets else allsites
    for b in boxes:
        if b in endpoint_ids:
            continue
        if sup_dist_box_set(b.x, ladder.depth(b.m), union_sites) == 0:
            report.add(clause, False, f"interior box {b} touches the sets")
            return
    report.add(clause, True)


def _separation_clause(report, ladder, boxes, sets, kappa):
    union_sites = np.vstack(sets)
    for b in boxes:
        if b.m == 0:
            continue
        need = kappa * ladder.depth(b.m)
        got = sup_dist_box_set(b.x, ladder.depth(b.m), union_sites)
        if got < need:
            report.add("B3", False,
                       f"box {b} at distance {got} < {need} from the sets")
            return
    report.add("B3", True)


def _complexity_clause(report, ladder, boxes, level, cap):
    counts = {}
    for b in boxes:
        counts[b.m] = counts.get(b.m, 0) + 1
    for m in range(level + 1):
        if counts.get(m, 0) >= cap:
            report.add("B4", False,
                       f"{counts[m]} scale-{m} boxes, allowed < {cap}")
            return
    report.add("B4", True)


def _seed_clause(report, oracle, boxes):
    for b in boxes:
        if b.m == 0 and not oracle.f_good(b.x):
            report.add("G1", False, f"seed event fails at {b.x}")
            return
    report.add("G1", True)


def _tower_clause(report, oracle, ladder, boxes, level, j_max):
    for b in boxes:
        for j in range(max(b.m, 1), j_max + 1):
            y = tower_anchor(ladder, j, b.x)
            try:
                ok = oracle.h_good(j, y)
            except KeyError:
                report.add("G2", False,
                           f"tower event level {j} at {y} unavailable")
                return
            if not ok:
                report.add("G2", False,
                           f"tower event level {j} fails at {y} (box {b})")
                return
    report.add("G2", True)


def validate_bridge(bridge: Bridge, s1_sites, s2_sites, oracle=None,
                    g2_mode: str = "window") -> CertificationReport:
    """Certify B1-B4 (and G1-G2 when an oracle is given), one clause per
    report line, each independently checkable with a concrete witness.

    g2_mode "window" requires towers up to the bridge level only (the
    weaker variant); "full" up to the largest scale fitting the working
    region.
    """
    ladder, level = bridge.ladder, bridge.level
    s1 = np.asarray(s1_sites, np.int64)
    s2 = np.asarray(s2_sites, np.int64)
    report = CertificationReport()
    _containment_clause(report, ladder, bridge.boxes, level, bridge.domain.shell)
    _endpoint_clause(report, ladder, bridge.boxes,
                     [(bridge.b1, s1), (bridge.b2, s2)], [s1, s2])
    _separation_clause(report, ladder, bridge.boxes, [s1, s2], ladder.kappa)
    _complexity_clause(report, ladder, bridge.boxes, level, 2 * ladder.K)
    if oracle is not None:
        _seed_clause(report, oracle, bridge.boxes)
        j_max = level if g2_mode == "window" else n_max_of_region(
            ladder, bridge.domain.working)
        _tower_clause(report, oracle, ladder, bridge.boxes, level, j_max)
    return report


def validate_arch(arch: Arch, u_sites, oracle=None,
                  g2_mode: str = "window") -> CertificationReport:
    """Arch variant: single top box, endpoint set U on both sides, and the
    complexity cap K instead of 2K."""
    ladder, k = arch.ladder, arch.k
    u = np.asarray(u_sites, np.int64)
    report = CertificationReport()
    _containment_clause(report, ladder, arch.boxes, k, arch.domain)
    tops = [b for b in arch.boxes if b.m == k]
    if arch.top.m != k or arch.top not in tops:
        report.add("TOP", False, f"top box {arch.top} missing or off-scale")
    elif k >= 1 and len(tops) != 1:
        # at k = 0 the whole path shares the top scale, so uniqueness
        # only binds at k >= 1
        report.add("TOP", False, f"{len(tops)} scale-{k} boxes, expected one")
    else:
        report.add("TOP", True)
    _endpoint_clause(report, ladder, arch.boxes, [(arch.b1, u)], [u])
    _separation_clause(report, ladder, arch.boxes, [u], ladder.kappa)
    _complexity_clause(report, ladder, arch.boxes, k, ladder.K)
    if oracle is not None:
        _seed_clause(report, oracle, arch.boxes)
        j_max = k if g2_mode == "window" else n_max_of_region(ladder, arch.domain)
        _tower_clause(report, oracle, ladder, arch.boxes, k, j_max)
    return report
