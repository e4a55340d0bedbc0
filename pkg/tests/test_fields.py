"""Field sampler: exactness against the kernel-table second moments."""

import itertools
import math

import numpy as np
import pytest

from gffperc.fields import (
    BoxSampler,
    PaddingError,
    SiteSampler,
    chi_density,
    chi_variance,
    sample_interpolated,
    sample_layer,
    sample_residual,
    sample_truncated,
    sample_truncated_fast,
    truncated_variance,
    truncation_gap_probability,
)
from gffperc.kernels import build_lazy_kernels, green_partial_sum, layer_variance
from gffperc.noise import make_noise_slab, make_noise_slabs
from gffperc.scales import ScaleLadder


@pytest.fixture(scope="module")
def table3():
    return build_lazy_kernels(3, 10)


def brute_layer(table, ell, slab, radius):
    """Independent per-site oracle: explicit kernel-weighted noise sums."""
    d = table.d
    k = ell // 2
    P = slab.box_radius + (ell + 1) // 2
    out = np.zeros((2 * radius + 1,) * d)
    eye = np.eye(d, dtype=np.int64)
    for x in itertools.product(range(-radius, radius + 1), repeat=d):
        x = np.array(x)
        acc = 0.0
        if ell % 2 == 0:
            for z in itertools.product(range(-k, k + 1), repeat=d):
                w = table.value(k, z)
                if w:
                    acc += w * slab.values[tuple(x + np.array(z) + P)]
            acc *= math.sqrt(0.5)
        else:
            for i in range(d):
                for z in itertools.product(range(-k - 1, k + 2), repeat=d):
                    z = np.array(z)
                    w = table.value(k, z) + table.value(k, z + eye[i])
                    if w:
                        acc += w * slab.values[(i,) + tuple(x + z + P)]
            acc *= math.sqrt(3.0 / 2.0) / 6.0  # sqrt(d/2)/(2d), d=3
        out[tuple(x + radius)] = acc
    return out


@pytest.mark.parametrize("ell", [0, 1, 2, 3, 4])
def test_layer_matches_brute_force(table3, ell):
    slab = make_noise_slab(7, 0, 3, ell, (0, 0, 0), 2)
    got = sample_layer(ell, slab).values
    want = brute_layer(table3, ell, slab, 2)
    assert np.abs(got - want).max() < 1e-12


def test_layer_zero_is_scaled_noise():
    slab = make_noise_slab(1, 5, 3, 0, (0, 0, 0), 3)
    out = sample_layer(0, slab).values
    assert np.array_equal(out, slab.values * math.sqrt(0.5))
    # same as dividing by sqrt(2) up to one rounding step
    assert np.abs(out - slab.values / np.sqrt(2.0)).max() <= 2.0 ** -50


def test_zero_noise_gives_zero_field():
    slab = make_noise_slab(1, 0, 3, 4, (0, 0, 0), 2)
    slab.values[...] = 0.0
    assert np.all(sample_layer(4, slab).values == 0.0)


def test_insufficient_padding_raises():
    slab = make_noise_slab(1, 0, 3, 4, (0, 0, 0), 2)
    with pytest.raises(PaddingError):
        sample_layer(4, slab, radius=3)
    with pytest.raises(PaddingError):
        sample_layer(3, slab)


def test_layer_empirical_variance(table3):
    n = 4000
    vals = np.array([sample_layer(2, make_noise_slab(3, r, 3, 2, (0,) * 3, 0)).values[0, 0, 0]
                     for r in range(n)])
    want = layer_variance(table3, 2)
    se = want * math.sqrt(2.0 / n)
    assert abs(vals.var() - want) < 4 * se


def test_layer_covariance_beyond_range_is_zero(table3):
    # analytic: weight vectors of sites with |x-y| > ell are disjoint
    ss = SiteSampler(table3, 4, (0, 0, 0), 4, [(-3, 0, 0), (2, 0, 0)])
    # distance 5 > ell = 4 for the top layer, and > ell for all lower ones
    assert ss.exact_covariance(0, 1) == 0.0
    # empirical check at modest n
    out = ss.sample_batch(11, range(3000))
    emp = np.mean(out[0] * out[1])
    se = math.sqrt(np.var(out[0] * out[1]) / 3000)
    assert abs(emp) < 4 * se


def test_truncated_L0_equals_layer0():
    slabs = make_noise_slabs(5, 2, 3, 0, (0, 0, 0), 2)
    a = sample_truncated(0, slabs).values
    b = sample_layer(0, slabs[0]).values
    assert np.array_equal(a, b)


def test_truncated_covariance_matches_green(table3):
    # noise-space inner products of the sampler weights must reproduce
    # the kernel partial sums (1/2) sum_{ell<=L} q_ell(x,y)
    ss = SiteSampler(table3, 8, (0, 0, 0), 2, [(0, 0, 0), (1, 0, 0), (2, -1, 0)])
    for i, j in [(0, 0), (0, 1), (0, 2), (1, 2)]:
        diff = np.array(ss.sites[j]) - np.array(ss.sites[i])
        want = 0.5 * sum(table3.value(ell, diff) for ell in range(9))
        assert abs(ss.exact_covariance(i, j) - want) < 1e-12


def test_layer_difference_variance(table3):
    # Var(phi^L - phi^L') = sum of layer variances strictly above L'
    slabs = make_noise_slabs(9, 0, 3, 6, (0, 0, 0), 0)
    want = sum(layer_variance(table3, ell) for ell in range(3, 7))
    n = 5000
    vals = np.empty(n)
    for r in range(n):
        slabs = make_noise_slabs(9, r, 3, 6, (0, 0, 0), 0)
        vals[r] = (sample_truncated(6, slabs).values
                   - sample_truncated(2, slabs, radius=0).values)[0, 0, 0]
    se = want * math.sqrt(2.0 / n)
    assert abs(vals.var() - want) < 4 * se


def test_fast_path_bitcompatible():
    slabs = make_noise_slabs(13, 4, 3, 7, (0, 0, 0), 3)
    a = sample_truncated(7, slabs).values
    b = sample_truncated_fast(7, slabs).values
    assert np.abs(a - b).max() < 1e-10


def test_site_path_matches_box_path(table3):
    sites = [(0, 0, 0), (1, -2, 3), (-3, 3, 0)]
    ss = SiteSampler(table3, 6, (0, 0, 0), 3, sites)
    got = ss.sample_batch(21, [0, 1])
    slabs = make_noise_slabs(21, 0, 3, 6, (0, 0, 0), 3)
    box = sample_truncated(6, slabs).values
    for i, s in enumerate(sites):
        assert abs(got[i, 0] - box[tuple(np.array(s) + 3)]) < 1e-10


LADDER = ScaleLadder(L0=2, ell0=2, kappa=2, K=10)


def test_interpolated_integer_t_equals_truncated():
    slabs = make_noise_slabs(3, 1, 3, LADDER.depth(1), (0, 0, 0), 2)
    chi = sample_interpolated(1.0, LADDER, slabs)
    phi = sample_truncated(LADDER.depth(1), slabs)
    assert np.array_equal(chi.values, phi.values)


def test_interpolated_midpoint_and_residual_identity():
    slabs = make_noise_slabs(3, 6, 3, LADDER.depth(2), (0, 0, 0), 2)
    chi = sample_interpolated(1.5, LADDER, slabs)
    phi1 = sample_truncated(LADDER.depth(1), slabs)
    phi2 = sample_truncated(LADDER.depth(2), slabs)
    mid = phi1.values + 0.5 * (phi2.values - phi1.values)
    assert np.array_equal(chi.values, mid)
    psi = sample_residual(1.5, LADDER, slabs)
    assert np.array_equal(psi.values, phi2.values - phi1.values)


def test_chi_variance_closed_form(table3):
    # ladder depths: L_1 = 4, L_2 = 8
    assert abs(chi_variance(3, 1.0, LADDER)
               - green_partial_sum(table3, (0, 0, 0), 4)) < 1e-12
    v1 = truncated_variance(3, 4)
    v2 = truncated_variance(3, 8)
    assert abs(chi_variance(3, 1.5, LADDER) - (v1 + 0.25 * (v2 - v1))) < 1e-14
    # continuity at the right endpoint
    assert abs(chi_variance(3, 2.0 - 1e-9, LADDER) - v2) < 1e-6
    # density at the origin
    var = chi_variance(3, 1.5, LADDER)
    assert abs(chi_density(3, 1.5, LADDER, 0.0) - 1 / math.sqrt(2 * math.pi * var)) < 1e-14


def test_chi_empirical_variance():
    n = 4000
    vals = np.empty(n)
    for r in range(n):
        slabs = make_noise_slabs(17, r, 3, LADDER.depth(2), (0, 0, 0), 0)
        vals[r] = sample_interpolated(1.5, LADDER, slabs).values[0, 0, 0]
    want = chi_variance(3, 1.5, LADDER)
    se = want * math.sqrt(2.0 / n)
    assert abs(vals.var() - want) < 4 * se


def test_translation_covariance():
    # shifted box center: same law; check mean/variance at the new center
    n = 4000
    vals = np.empty(n)
    for r in range(n):
        slab = make_noise_slab(23, r, 3, 2, (5, -7, 2), 0)
        vals[r] = sample_layer(2, slab).values[0, 0, 0]
    want = 7.0 / 48.0
    se = want * math.sqrt(2.0 / n)
    assert abs(vals.mean()) < 4 * math.sqrt(want / n)
    assert abs(vals.var() - want) < 4 * se


def test_box_sampler_matches_direct():
    bs = BoxSampler(3, (0, 0, 0), 3, L=5)
    got = bs.sample(31, 7)
    slabs = make_noise_slabs(31, 7, 3, 5, (0, 0, 0), 3)
    want = sample_truncated(5, slabs).values
    assert np.abs(got - want).max() < 1e-10


def test_truncation_gap_record():
    rec = truncation_gap_probability(3, 4, 2, epsilon=1e9, L_ref=8,
                                     n_replicas=20, master_seed=5)
    assert rec.frequency == 1.0
    rec = truncation_gap_probability(3, 4, 0, epsilon=1e-12, L_ref=8,
                                     n_replicas=20, master_seed=5)
    assert rec.frequency <= 0.1
    # single site at eps = 3 sigma: >= 0.99 by the gaussian tail
    import gffperc.fields as F
    sigma = math.sqrt(F._gps(3, 8, 0.0)[8] - F._gps(3, 8, 0.0)[4])
    rec = truncation_gap_probability(3, 4, 0, epsilon=3 * sigma, L_ref=8,
                                     n_replicas=300, master_seed=5)
    assert rec.frequency >= 0.99
    assert not rec.violates_bound
    # monotone in L at fixed eps under coupled noise
    rec8 = truncation_gap_probability(3, 6, 1, epsilon=0.5, L_ref=10,
                                      n_replicas=100, master_seed=5)
    rec4 = truncation_gap_probability(3, 3, 1, epsilon=0.5, L_ref=10,
                                      n_replicas=100, master_seed=5)
    assert rec8.frequency >= rec4.frequency
