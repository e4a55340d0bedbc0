"""Cluster labeling and connection events against hand-built fixtures."""

import math

import numpy as np
import pytest
from scipy.stats import norm

from gffperc.fields import BoxSampler, FieldSample, truncated_variance
from gffperc.noise import KIND_TDELTA, uniform_field
from gffperc.percolation import (
    GeometryMismatch,
    SiteConfiguration,
    _pivotal_bruteforce,
    apply_T_delta,
    coarse_pivotal,
    crossing_event,
    disconnection_event,
    exist_event,
    label_clusters,
    pivotal_sites,
    sprinkled_unique_event,
    threshold,
    truncated_two_point,
    u_scale,
    unique_event,
)


def config_from(occ_bool, radius):
    occ = np.asarray(occ_bool, dtype=bool)
    return SiteConfiguration(np.zeros(occ.ndim, np.int64), radius, occ)


def empty_config(R, d=3):
    return config_from(np.zeros((2 * R + 1,) * d, bool), R)


def full_config(R, d=3):
    return config_from(np.ones((2 * R + 1,) * d, bool), R)


def field_on_box(values, radius):
    return FieldSample("truncated", np.zeros(values.ndim, np.int64), radius,
                       np.asarray(values, float), {})


def test_threshold_extremes_and_monotonicity():
    rng = np.random.default_rng(0)
    f = field_on_box(rng.standard_normal((7, 7, 7)), 3)
    assert threshold(f, -np.inf).occ.all()
    assert not threshold(f, np.inf).occ.any()
    lo, hi = threshold(f, -0.3), threshold(f, 0.4)
    assert np.all(hi.occ <= lo.occ)


def test_threshold_marginal_matches_gaussian_cdf():
    bs = BoxSampler(3, (0, 0, 0), 2, L=2)
    h = 0.35
    n = 3000
    hits = sum(bs.sample(5, rep)[2, 2, 2] >= h for rep in range(n))
    p = 1.0 - norm.cdf(h / math.sqrt(truncated_variance(3, 2)))
    se = math.sqrt(p * (1 - p) / n)
    assert abs(hits / n - p) < 4 * se


def test_T_delta_identity_and_forcing():
    rng = np.random.default_rng(1)
    f = field_on_box(rng.standard_normal((5, 5, 5)), 2)
    U = uniform_field(9, 0, KIND_TDELTA, 3, 2)
    assert np.array_equal(apply_T_delta(f, 0.1, 0.0, U).occ, threshold(f, 0.1).occ)
    forced = apply_T_delta(f, 0.1, 1.0, U)
    assert np.array_equal(forced.occ, U >= 0.5)


def test_T_delta_finite_energy():
    # closed probability strictly inside (delta/2, 1 - delta/2) regardless
    # of the conditioning: check the forced mass at a fixed site
    delta = 0.4
    n = 4000
    closed = 0
    for rep in range(n):
        U = uniform_field(11, rep, KIND_TDELTA, 3, 1)
        f = field_on_box(np.full((3, 3, 3), 10.0), 1)  # field forces open
        closed += not apply_T_delta(f, 0.0, delta, U).occ[1, 1, 1]
    frac = closed / n
    assert delta / 2 - 0.03 < frac < delta / 2 + 0.03  # only the forced-closed mass


def test_label_clusters_basics():
    lab = label_clusters(empty_config(2))
    assert lab.n_clusters == 0
    lab = label_clusters(full_config(2))
    assert lab.n_clusters == 1
    assert lab.sizes[0] == 125
    assert lab.diameters[0] == 4
    assert lab.touches_boundary[0]


def test_label_clusters_two_components_vs_floodfill():
    occ = np.zeros((7, 7, 7), bool)
    occ[0, 0, 0:3] = True
    occ[4:7, 5, 2] = True
    lab = label_clusters(config_from(occ, 3))
    assert lab.n_clusters == 2
    # deterministic ids: cluster 0 contains the lexicographically first site
    assert lab.labels[0, 0, 0] == 0
    assert sorted(lab.sizes.tolist()) == [3, 3]
    assert set(lab.diameters.tolist()) == {2}
    # brute-force flood fill oracle
    import scipy.ndimage as ndi
    raw, n = ndi.label(occ, structure=ndi.generate_binary_structure(3, 1))
    assert n == 2
    assert np.array_equal(raw > 0, lab.labels >= 0)


def test_crossing_event_fixtures():
    assert crossing_event(label_clusters(full_config(3)), 1)
    assert not crossing_event(label_clusters(empty_config(3)), 1)
    occ = np.zeros((7, 7, 7), bool)
    occ[3, 3, 3:] = True  # straight path center -> face
    assert crossing_event(label_clusters(config_from(occ, 3)), 0)
    with pytest.raises(GeometryMismatch):
        crossing_event(label_clusters(full_config(3)), 1, R=2)


def test_disconnection_complement_and_scale():
    rng = np.random.default_rng(3)
    for _ in range(10):
        occ = rng.random((9, 9, 9)) < 0.4
        lab = label_clusters(config_from(occ, 4))
        assert disconnection_event(lab, 2.0) == (not crossing_event(lab, 2))
    assert disconnection_event(label_clusters(empty_config(3)), 1.0)
    # u(R) = exp((log R)^{1/3}): at R = e^8 it is e^2, radius 8 after ceil
    assert abs(u_scale(math.exp(8.0)) - math.exp(2.0)) < 1e-9
    assert math.ceil(u_scale(math.exp(8.0))) == 8


def test_exist_event_fixtures():
    assert exist_event(label_clusters(full_config(5)))
    assert not exist_event(label_clusters(empty_config(5)))
    occ = np.zeros((11, 11, 11), bool)
    occ[5, 5, 5:5 + math.ceil(5 / 5) + 1] = True  # diameter exactly ceil(R/5)
    assert exist_event(label_clusters(config_from(occ, 5)))
    occ = np.zeros((11, 11, 11), bool)
    occ[5, 5, 5] = True
    assert not exist_event(label_clusters(config_from(occ, 5)))


def _two_lines(R, joined):
    """Two long parallel lines in B_R, optionally joined outside B_R."""
    occ = np.zeros((4 * R + 1,) * 3, bool)
    c = 2 * R
    occ[c - R:c + R + 1, c - 2, c] = True
    occ[c - R:c + R + 1, c + 2, c] = True
    if joined:
        j = c + R + 2  # outside B_R, inside B_2R
        occ[j, c - 2:c + 3, c] = True
        occ[c + R:j + 1, c - 2, c] = True
        occ[c + R:j + 1, c + 2, c] = True
    return config_from(occ, 2 * R)


def test_unique_event_fixtures():
    assert unique_event(full_config(8), 4)
    assert unique_event(_two_lines(4, joined=True), 4)
    assert not unique_event(_two_lines(4, joined=False), 4)


def test_sprinkled_unique_event():
    N = 2
    assert sprinkled_unique_event(full_config(12), full_config(12), N)
    beta = full_config(12)
    assert not sprinkled_unique_event(empty_config(12), beta, N)
    # two crossing clusters at the higher level, merged only after sprinkling
    occ = np.zeros((25, 25, 25), bool)
    occ[12:, 12, 12] = True   # ray from center through +x face
    occ[12:, 16, 12] = True   # parallel ray crossing the annulus
    alpha = config_from(occ, 12)
    occ2 = occ.copy()
    occ2[18, 12:17, 12] = True  # connector inside B_4N = B_8: |18-12|=6 <= 8
    beta = config_from(occ2, 12)
    assert not sprinkled_unique_event(alpha, alpha, N)
    assert sprinkled_unique_event(alpha, beta, N)
    with pytest.raises(ValueError):
        sprinkled_unique_event(beta, alpha, N)


def test_truncated_two_point():
    occ = np.zeros((9, 9, 9), bool)
    occ[4, 4, 4] = True
    lab = label_clusters(config_from(occ, 4))
    assert truncated_two_point(lab, (0, 0, 0), (0, 0, 0))
    occ[4, 4, 4:] = True
    lab = label_clusters(config_from(occ, 4))
    assert not truncated_two_point(lab, (0, 0, 0), (0, 0, 1))
    # nested fixture: the pair sits on an interior loop, another cluster
    # touches the boundary
    occ = np.zeros((9, 9, 9), bool)
    occ[4, 3:6, 4] = True
    occ[0, 0, :] = True
    lab = label_clusters(config_from(occ, 4))
    assert truncated_two_point(lab, (0, -1, 0), (0, 1, 0))
    assert not truncated_two_point(lab, (-4, -4, 0), (-4, -4, 1))


def test_pivotal_fixtures():
    # all occupied: no single site decides
    piv = pivotal_sites(full_config(3), 1)
    assert not piv.any()
    # unique bottleneck: straight path with its midpoint the only cut
    occ = np.zeros((7, 7, 7), bool)
    occ[3, 3, 3:] = True
    cfg = config_from(occ, 3)
    piv = pivotal_sites(cfg, 0)
    # every path site except none... all sites of a single path are cuts
    assert piv[3, 3, 4] and piv[3, 3, 5]
    # a 2-thick closed barrier: nothing is pivotal
    occ = np.ones((7, 7, 7), bool)
    occ[:, :, 4:6] = False
    piv = pivotal_sites(config_from(occ, 3), 1)
    assert not piv.any()


@pytest.mark.parametrize("seed", range(6))
def test_pivotal_matches_bruteforce(seed):
    rng = np.random.default_rng(seed)
    occ = rng.random((5, 5, 5)) < 0.45
    cfg = config_from(occ, 2)
    fast = pivotal_sites(cfg, 1)
    brute = _pivotal_bruteforce(occ, 1)
    assert np.array_equal(fast, brute)


def test_coarse_pivotal():
    occ = np.zeros((9, 9, 9), bool)
    occ[4, 4, 4:6] = True   # stub from the center
    occ[4, 4, 8] = True     # boundary site, gap of width 2 at k = 6, 7
    cfg = config_from(occ, 4)
    assert not coarse_pivotal(cfg, (0, 0, 2), 0, 0)   # single site cannot bridge
    assert coarse_pivotal(cfg, (0, 0, 2), 1, 0)
    assert coarse_pivotal(cfg, (0, 0, 2), 3, 0)       # monotone in N
    # N = 0 reduces to pivotality of a closed site
    occ = np.zeros((7, 7, 7), bool)
    occ[3, 3, 4:] = False
    occ[3, 3, 5:] = True
    cfg = config_from(occ, 3)
    piv = pivotal_sites(cfg, 0)
    assert coarse_pivotal(cfg, (0, 0, 1), 0, 0) == bool(piv[3, 3, 4])


def test_monotone_coupling_in_h():
    # increasing events are monotone in -h sample-by-sample under shared noise
    bs = BoxSampler(3, (0, 0, 0), 3, L=4)
    for rep in range(15):
        f = field_on_box(bs.sample(17, rep), 3)
        labs = [label_clusters(threshold(f, h)) for h in (-0.5, 0.0, 0.5)]
        crosses = [crossing_event(lab, 1) for lab in labs]
        exists = [exist_event(lab) for lab in labs]
        assert crosses == sorted(crosses, reverse=True)
        assert exists == sorted(exists, reverse=True)


def test_fkg_smoke():
    # two increasing crossing-type events in disjoint directions
    bs = BoxSampler(3, (0, 0, 0), 3, L=2)
    n = 1200
    a = np.zeros(n, bool)
    b = np.zeros(n, bool)
    for rep in range(n):
        occ = bs.sample(23, rep) >= -0.5
        a[rep] = occ[3, 3, 2:5].all()   # short z-segment through the center
        b[rep] = occ[2:5, 3, 3].all()   # short x-segment
    pa, pb, pab = a.mean(), b.mean(), (a & b).mean()
    se = math.sqrt((pab * (1 - pab) + pa * pb * (pa + pb)) / n)
    assert pab >= pa * pb - 3 * se
