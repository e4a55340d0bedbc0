"""Thresholded site configurations, cluster labeling, and connection events.

Connectivity is nearest-neighbor on Z^d sites; diameters are sup-norm;
the boundary of B_R is the inner one (sites with a neighbor outside).
Configurations live on dense boxes; events on sub-boxes always refer to
boxes concentric with the configuration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.ndimage as ndi

from . import _clusterkernels
from .fields import FieldSample
from .lattice import inner_boundary_mask


class GeometryMismatch(ValueError):
    """Event geometry does not match the configuration's box."""


@dataclass
class SiteConfiguration:
    """Binary occupancy on a box with its sampling provenance."""

    center: np.ndarray
    radius: int
    occ: np.ndarray = field(repr=False)
    provenance: dict = field(default_factory=dict)

    @property
    def d(self) -> int:
        return self.occ.ndim

    def restricted(self, radius: int) -> "SiteConfiguration":
        if radius > self.radius:
            raise GeometryMismatch("cannot grow a configuration")
        k = self.radius - radius
        sl = tuple(slice(k, s - k) for s in self.occ.shape)
        return SiteConfiguration(self.center, radius, self.occ[sl],
                                 dict(self.provenance, restricted_from=self.radius))


def threshold(fieldsample: FieldSample, h: float) -> SiteConfiguration:
    """Level-set configuration {field >= h}; decreasing in h."""
    return SiteConfiguration(fieldsample.center, fieldsample.radius,
                             fieldsample.values >= h,
                             {"h": h, "kind": fieldsample.kind,
                              "params": dict(fieldsample.params), "delta": 0.0})


def apply_T_delta(fieldsample: FieldSample, h: float, delta: float,
                  uniforms: np.ndarray) -> SiteConfiguration:
    """Threshold with per-site resampling noise.

    A site is forced closed when its uniform is <= delta/2, forced open
    when >= 1 - delta/2, and thresholded otherwise; increasing jointly in
    (-h, uniforms), which preserves positive association.
    """
    if not 0.0 <= delta <= 1.0:
        raise ValueError("delta must lie in [0, 1]")
    occ = np.where(uniforms <= delta / 2.0, False,
                   np.where(uniforms >= 1.0 - delta / 2.0, True,
                            fieldsample.values >= h))
    return SiteConfiguration(fieldsample.center, fieldsample.radius, occ,
                             {"h": h, "kind": fieldsample.kind,
                              "params": dict(fieldsample.params), "delta": delta})


_STRUCTURES = {}


def _nn_structure(d: int):
    if d not in _STRUCTURES:
        _STRUCTURES[d] = ndi.generate_binary_structure(d, 1)
    return _STRUCTURES[d]


@dataclass
class ClusterLabeling:
    """Connected components of a configuration.

    labels holds -1 on empty sites and 0..n_clusters-1 otherwise; ids are
    ordered by each cluster's first site in lexicographic order, so they
    are deterministic for a given configuration.
    """

    center: np.ndarray
    radius: int
    labels: np.ndarray = field(repr=False)
    n_clusters: int = 0
    sizes: np.ndarray = field(default=None, repr=False)
    diameters: np.ndarray = field(default=None, repr=False)
    touches_boundary: np.ndarray = field(default=None, repr=False)

    def label_at(self, site) -> int:
        idx = tuple(np.asarray(site, np.int64) - self.center + self.radius)
        return int(self.labels[idx])

    def labels_in_central_box(self, r: int) -> np.ndarray:
        if r > self.radius:
            raise GeometryMismatch(f"B_{r} not inside the labeled B_{self.radius}")
        k = self.radius - r
        sl = tuple(slice(k, s - k) for s in self.labels.shape)
        inside = np.unique(self.labels[sl])
        return inside[inside >= 0]

    def labels_on_boundary(self) -> np.ndarray:
        on = np.unique(self.labels[inner_boundary_mask(self.labels.shape)])
        return on[on >= 0]


def label_clusters(config: SiteConfiguration) -> ClusterLabeling:
    raw, n = ndi.label(config.occ, structure=_nn_structure(config.d))
    labels = raw.astype(np.int32) - 1
    if n == 0:
        return ClusterLabeling(config.center, config.radius, labels, 0,
                               np.zeros(0, np.int64), np.zeros(0, np.int64),
                               np.zeros(0, bool))
    flat = labels.ravel()
    occo = flat >= 0
    # canonical ids: rank of first (lexicographically smallest) site
    first = np.full(n, flat.size, dtype=np.int64)
    np.minimum.at(first, flat[occo], np.nonzero(occo)[0])
    order = np.argsort(first, kind="stable")
    remap = np.empty(n, dtype=np.int32)
    remap[order] = np.arange(n, dtype=np.int32)
    labels = np.where(labels >= 0, remap[np.maximum(labels, 0)], -1).astype(np.int32)
    sizes = np.bincount(labels.ravel()[labels.ravel() >= 0], minlength=n).astype(np.int64)
    diameters = np.zeros(n, dtype=np.int64)
    slices = ndi.find_objects(np.where(labels >= 0, labels + 1, 0), max_label=n)
    for lab, sl in enumerate(slices):
        if sl is not None:
            diameters[lab] = max(s.stop - s.start - 1 for s in sl)
    touches = np.zeros(n, dtype=bool)
    bmask = inner_boundary_mask(labels.shape)
    on = labels[bmask]
    touches[np.unique(on[on >= 0])] = True
    return ClusterLabeling(config.center, config.radius, labels, int(n),
                           sizes, diameters, touches)


# --- events -------------------------------------------------------------------

def crossing_event(labeling: ClusterLabeling, r: int, R: int | None = None) -> bool:
    """Some cluster meets both B_r and the inner boundary of B_R."""
    R = labeling.radius if R is None else R
    if R != labeling.radius:
        raise GeometryMismatch("crossing event needs the labeling of B_R itself")
    if r > R:
        raise GeometryMismatch("need r <= R")
    inner = labeling.labels_in_central_box(r)
    if inner.size == 0:
        return False
    return bool(labeling.touches_boundary[inner].any())


def u_scale(R: float) -> float:
    """The sub-polynomial inner scale exp[(log R)^(1/3)] of the
    disconnection functional."""
    return math.exp(math.log(R) ** (1.0 / 3.0))


def disconnection_event(labeling: ClusterLabeling, u: float, R: int | None = None) -> bool:
    """No cluster joins B_ceil(u) to the inner boundary of B_R."""
    return not crossing_event(labeling, math.ceil(u), R)


def exist_event(labeling: ClusterLabeling, R: int | None = None) -> bool:
    """Some cluster in B_R has sup-norm diameter >= ceil(R/5)."""
    R = labeling.radius if R is None else R
    if R != labeling.radius:
        raise GeometryMismatch("exist event needs the labeling of B_R")
    need = math.ceil(R / 5.0)
    return bool((labeling.diameters >= need).any())


def unique_event(config_2R: SiteConfiguration, R: int) -> bool:
    """All large clusters of the restriction to B_R are joined in B_2R.

    Clusters are maximal in B_R (not traces of B_2R clusters); large means
    sup-norm diameter >= ceil(R/10).
    """
    if config_2R.radius != 2 * R:
        raise GeometryMismatch("uniqueness needs the configuration on B_2R")
    inner = label_clusters(config_2R.restricted(R))
    need = math.ceil(R / 10.0)
    big = np.nonzero(inner.diameters >= need)[0]
    if len(big) <= 1:
        return True
    outer = label_clusters(config_2R)
    reps = []
    flat = inner.labels.ravel()
    for lab in big:
        pos = np.unravel_index(np.nonzero(flat == lab)[0][0], inner.labels.shape)
        site = np.asarray(pos, np.int64) - R + np.asarray(inner.center)
        reps.append(outer.label_at(site))
    return len(set(reps)) == 1


def sprinkled_unique_event(config_alpha: SiteConfiguration,
                           config_beta: SiteConfiguration, N: int) -> bool:
    """Crossing of B_N to the boundary of B_6N at the higher level, plus
    mutual connection (at the sprinkled level, inside B_4N) of all
    higher-level clusters crossing the annulus B_4N minus B_2N."""
    if config_alpha.radius != 6 * N or config_beta.radius != 6 * N:
        raise GeometryMismatch("sprinkled uniqueness lives on B_6N")
    if np.any(config_alpha.occ & ~config_beta.occ):
        raise ValueError("the sprinkled configuration must contain the base one")
    lab6 = label_clusters(config_alpha)
    if not crossing_event(lab6, N):
        return False
    alpha4 = label_clusters(config_alpha.restricted(4 * N))
    inner = alpha4.labels_in_central_box(2 * N)
    crossing = [lab for lab in np.nonzero(alpha4.touches_boundary)[0]
                if lab in set(inner.tolist())]
    if len(crossing) <= 1:
        return True
    beta4 = label_clusters(config_beta.restricted(4 * N))
    reps = []
    flat = alpha4.labels.ravel()
    for lab in crossing:
        pos = np.unravel_index(np.nonzero(flat == lab)[0][0], alpha4.labels.shape)
        site = np.asarray(pos, np.int64) - 4 * N + np.asarray(alpha4.center)
        reps.append(beta4.label_at(site))
    return len(set(reps)) == 1


def truncated_two_point(labeling: ClusterLabeling, x, y) -> bool:
    """Same cluster, and that cluster stays clear of the box boundary
    (finite-volume stand-in for 'not connected to infinity')."""
    lx, ly = labeling.label_at(x), labeling.label_at(y)
    if lx < 0 or lx != ly:
        return False
    return not bool(labeling.touches_boundary[lx])


# --- pivotality ---------------------------------------------------------------

def _pivotal_bruteforce(occ: np.ndarray, r: int) -> np.ndarray:
    """Reference flood-fill implementation, any d, small boxes only."""
    out = np.zeros_like(occ, dtype=bool)
    for idx in np.ndindex(occ.shape):
        with_x = occ.copy()
        with_x[idx] = True
        without_x = occ.copy()
        without_x[idx] = False
        out[idx] = (_crossing_floodfill(with_x, r)
                    and not _crossing_floodfill(without_x, r))
    return out


def _crossing_floodfill(occ: np.ndarray, r: int) -> bool:
    lab, n = ndi.label(occ, structure=_nn_structure(occ.ndim))
    if n == 0:
        return False
    R = (occ.shape[0] - 1) // 2
    k = R - r
    sl = tuple(slice(k, s - k) for s in occ.shape)
    inner = np.unique(lab[sl])
    inner = set(inner[inner > 0].tolist())
    on = np.unique(lab[inner_boundary_mask(occ.shape)])
    return any(l in inner for l in on if l > 0)


def pivotal_sites(config: SiteConfiguration, r: int, R: int | None = None) -> np.ndarray:
    """Exact pivotal set for the B_r to boundary-of-B_R crossing.

    A site is pivotal when the crossing holds with the site forced open
    but fails with it forced closed (its own state is immaterial).
    Returns a boolean cube mask.
    """
    R = config.radius if R is None else R
    if R != config.radius:
        raise GeometryMismatch("pivotal sites need the configuration on B_R")
    if config.d == 3:
        occ = np.ascontiguousarray(config.occ, dtype=np.uint8)
        return np.asarray(_clusterkernels.pivotal_mask(occ, r), dtype=bool)
    return _pivotal_bruteforce(config.occ, r)


def coarse_pivotal(config: SiteConfiguration, x, N: int, r: int,
                   R: int | None = None) -> bool:
    """Crossing holds with B_N(x) forced open but not as is."""
    R = config.radius if R is None else R
    if R != config.radius:
        raise GeometryMismatch("coarse pivotality needs the configuration on B_R")
    occ = config.occ
    if config.d == 3:
        if _clusterkernels.crossing_indicator(np.ascontiguousarray(occ, np.uint8), r):
            return False
    elif _crossing_floodfill(occ, r):
        return False
    rel = np.asarray(x, np.int64) - config.center + config.radius
    lo = np.maximum(rel - N, 0)
    hi = np.minimum(rel + N + 1, occ.shape)
    patched = occ.copy()
    patched[tuple(slice(a, b) for a, b in zip(lo, hi))] = True
    if config.d == 3:
        return bool(_clusterkernels.crossing_indicator(
            np.ascontiguousarray(patched, np.uint8), r))
    return _crossing_floodfill(patched, r)
