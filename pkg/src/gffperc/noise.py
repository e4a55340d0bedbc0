"""Reproducible noise streams for field sampling.

Every random input is derived from (master_seed, replica, kind, layer)
through numpy SeedSequence, one SFC64 stream per tuple, so replicas and
layers are independent and any value can be regenerated from its seed
coordinates alone.  Within a stream, draws fill arrays in C order with a
fixed layout (odd layers: axis-major midpoint channels), which gives the
prefix property needed for shared-noise couplings.

Stream kinds: 0 layer gaussians, 1 resampling uniforms for the occupancy
noise, 2 Bernoulli-overlay uniforms, 3 resampling streams, 4 auxiliary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

KIND_LAYER = 0
KIND_TDELTA = 1
KIND_ETA = 2
KIND_RESAMPLE = 3
KIND_AUX = 4


def stream(master_seed: int, replica: int, kind: int, layer: int = 0) -> np.random.Generator:
    """The canonical generator for one (replica, kind, layer) cell."""
    seq = np.random.SeedSequence((int(master_seed), int(replica), int(kind), int(layer)))
    return np.random.Generator(np.random.SFC64(seq))


def layer_pad(ell: int) -> int:
    """Padding radius ceil(ell/2) needed for exact depth-ell sampling."""
    return (ell + 1) // 2


@dataclass
class NoiseSlab:
    """Standard gaussians feeding one layer of one replica on a padded box.

    For even ell the values sit on lattice sites of the padded box
    (shape (2P+1,)*d); for odd ell there is one channel per axis, channel
    i holding the gaussians of the midpoints z + e_i/2 (shape (d, ...)).
    The slab covers every noise coordinate with nonzero kernel weight on
    the target box, so box marginals are exact.
    """

    d: int
    ell: int
    center: np.ndarray
    box_radius: int
    master_seed: int
    replica: int
    values: np.ndarray

    @property
    def pad_radius(self) -> int:
        return self.box_radius + layer_pad(self.ell)


def slab_shape(d: int, ell: int, box_radius: int) -> tuple:
    side = 2 * (box_radius + layer_pad(ell)) + 1
    cube = (side,) * d
    return cube if ell % 2 == 0 else (d,) + cube


def make_noise_slab(master_seed: int, replica: int, d: int, ell: int,
                    center, box_radius: int) -> NoiseSlab:
    g = stream(master_seed, replica, KIND_LAYER, ell)
    values = g.standard_normal(slab_shape(d, ell, box_radius))
    return NoiseSlab(d=d, ell=ell, center=np.asarray(center, dtype=np.int64),
                     box_radius=box_radius, master_seed=master_seed,
                     replica=replica, values=values)


def make_noise_slabs(master_seed: int, replica: int, d: int, L: int,
                     center, box_radius: int) -> list:
    """Independent slabs for layers 0..L on one box."""
    return [make_noise_slab(master_seed, replica, d, ell, center, box_radius)
            for ell in range(L + 1)]


def uniform_field(master_seed: int, replica: int, kind: int, d: int,
                  box_radius: int) -> np.ndarray:
    """Per-site uniforms on a box for the occupancy/overlay noise."""
    g = stream(master_seed, replica, kind)
    return g.random((2 * box_radius + 1,) * d)
