"""Lazy random-walk transition kernels and Green-function partial sums.

The walk on Z^d stays put with probability 1/2 and otherwise jumps to one
of the 2d nearest neighbors uniformly; with a killing rate theta it is
additionally killed with probability theta at every step.  Depth-ell
kernels q_ell(0, .) are stored as dense arrays over the sup-norm ball of
radius ell (the support is the smaller l^1 ball).  Midpoint kernels live
on the edge-midpoint lattice and carry a sqrt(1-theta) factor per
half-step so that two half-steps compose to one lazy step.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln


class KernelMemoryError(MemoryError):
    """Requested kernel table exceeds the configured memory budget."""


class ParityError(ValueError):
    """Midpoint kernels exist at odd depths only."""


def lazy_step(q: np.ndarray, d: int, theta_kill: float = 0.0) -> np.ndarray:
    """One lazy-walk convolution step, growing the cube by one site per side.

    q is a dense array over the radius-ell sup-norm ball; the result covers
    radius ell+1 and is scaled by the per-step survival factor.
    """
    out = np.zeros(tuple(s + 2 for s in q.shape), dtype=q.dtype)
    core = tuple(slice(1, -1) for _ in range(d))
    out[core] = 0.5 * q
    move = 1.0 / (4.0 * d)
    for ax in range(d):
        for lo in (0, 2):
            sl = list(core)
            sl[ax] = slice(lo, out.shape[ax] - 2 + lo)
            out[tuple(sl)] += move * q
    if theta_kill != 0.0:
        out *= 1.0 - theta_kill
    return out


@dataclass
class KernelTable:
    """Kernels q_0 .. q_ell_max for one (dimension, killing rate) pair."""

    d: int
    ell_max: int
    theta_kill: float
    kernels: list = field(repr=False)

    def value(self, ell: int, x) -> float:
        """q_ell(0, x); zero outside the radius-ell cube."""
        if ell > self.ell_max:
            raise IndexError(f"depth {ell} beyond table ell_max={self.ell_max}")
        x = np.asarray(x, dtype=np.int64)
        if np.abs(x).max(initial=0) > ell:
            return 0.0
        return float(self.kernels[ell][tuple(x + ell)])

    def mass(self, ell: int) -> float:
        return float(self.kernels[ell].sum())

    def __eq__(self, other):
        return (isinstance(other, KernelTable)
                and (self.d, self.ell_max, self.theta_kill)
                == (other.d, other.ell_max, other.theta_kill)
                and all(np.array_equal(a, b) for a, b in zip(self.kernels, other.kernels)))


def _table_bytes(d: int, ell_max: int) -> int:
    return sum((2 * ell + 1) ** d * 8 for ell in range(ell_max + 1))


def build_lazy_kernels(d: int, ell_max: int, theta_kill: float = 0.0,
                       memory_budget: int = 2 << 30) -> KernelTable:
    """Build the dense kernel table by repeated lazy convolution.

    Raises KernelMemoryError if the dense storage would exceed
    memory_budget bytes.
    """
    if d < 1 or ell_max < 0 or not (0.0 <= theta_kill < 1.0):
        raise ValueError("need d >= 1, ell_max >= 0, 0 <= theta_kill < 1")
    need = _table_bytes(d, ell_max)
    if need > memory_budget:
        raise KernelMemoryError(
            f"kernel table d={d}, ell_max={ell_max} needs {need} bytes "
            f"(budget {memory_budget})")
    q = np.ones((1,) * d, dtype=np.float64)
    kernels = [q]
    for _ in range(ell_max):
        q = lazy_step(q, d, theta_kill)
        kernels.append(q)
    return KernelTable(d=d, ell_max=ell_max, theta_kill=theta_kill, kernels=kernels)


def mass_audit(d: int, max_depth: int, theta_kill: float = 0.0) -> np.ndarray:
    """Total mass of q_ell for every ell <= max_depth, streaming.

    Runs the same convolution step as build_lazy_kernels but keeps only a
    rolling buffer, so deep audits stay within memory.  In exact arithmetic
    the masses are (1-theta)^ell; the audit surfaces accumulated rounding.
    """
    q = np.ones((1,) * d, dtype=np.float64)
    masses = np.empty(max_depth + 1)
    masses[0] = q.sum()
    for ell in range(1, max_depth + 1):
        q = lazy_step(q, d, theta_kill)
        masses[ell] = q.sum()
    return masses


@dataclass
class MidpointKernel:
    """Odd-depth kernel on edge midpoints, stored per axis.

    axis_tables[i][z] is the weight of the midpoint z + e_i/2 on a dense
    cube of radius (ell-1)//2 + 1 around the origin.
    """

    d: int
    ell: int
    theta_kill: float
    axis_tables: np.ndarray = field(repr=False)

    @property
    def pad(self) -> int:
        return (self.ell - 1) // 2 + 1

    def value(self, z, axis: int) -> float:
        z = np.asarray(z, dtype=np.int64)
        if np.abs(z).max(initial=0) > self.pad:
            return 0.0
        return float(self.axis_tables[axis][tuple(z + self.pad)])

    def mass(self) -> float:
        return float(self.axis_tables.sum())


def midpoint_kernel(table: KernelTable, ell: int) -> MidpointKernel:
    """Kernel q~_ell(0, .) over midpoints, from the table at depth (ell-1)/2.

    q~_ell(0, z + e_i/2) = [q_k(z) + q_k(z + e_i)] / (2d) with k = (ell-1)/2,
    times sqrt(1-theta) for the extra half-step.
    """
    if ell % 2 == 0:
        raise ParityError(f"midpoint kernels need odd depth, got {ell}")
    k = (ell - 1) // 2
    if k > table.ell_max:
        raise IndexError(f"midpoint depth {ell} needs site kernels to {k}")
    d = table.d
    qk = table.kernels[k]
    pad = k + 1
    axis_tables = np.zeros((d,) + (2 * pad + 1,) * d)
    core = tuple(slice(1, -1) for _ in range(d))
    scale = np.sqrt(1.0 - table.theta_kill) / (2.0 * d)
    for i in range(d):
        axis_tables[i][core] += qk
        shifted = list(core)
        shifted[i] = slice(0, 2 * pad - 1)
        axis_tables[i][tuple(shifted)] += qk
        axis_tables[i] *= scale
    return MidpointKernel(d=d, ell=ell, theta_kill=table.theta_kill,
                          axis_tables=axis_tables)


def green_partial_sum(table: KernelTable, x, L: int) -> float:
    """(1/2) * sum_{ell <= L} q_ell(0, x).

    Monotone nondecreasing in L; for theta_kill = 0 and d >= 3 it converges
    to the simple-random-walk Green function g(0, x).
    """
    if L > table.ell_max:
        raise IndexError(f"partial sum to {L} beyond table ell_max={table.ell_max}")
    return 0.5 * sum(table.value(ell, x) for ell in range(L + 1))


def layer_variance(table: KernelTable, ell: int) -> float:
    """Variance (1/2) q_ell(0,0) of one decomposition layer."""
    return 0.5 * table.value(ell, np.zeros(table.d, dtype=np.int64))


def return_probabilities(d: int, max_depth: int, theta_kill: float = 0.0) -> np.ndarray:
    """q_ell(0,0) for all ell <= max_depth, without dense tables.

    Uses the exact composition over coordinates: the d-dimensional lazy
    symbol is the average of d one-dimensional ones, so

        q_ell(0,0) = d^(-ell) * sum_{k_1+..+k_d=ell} multinomial(ell; k)
                     * prod_i C(2 k_i, k_i) 4^(-k_i),

    evaluated by d-1 binomial convolutions with probability-sized terms
    (numerically stable at any depth).
    """
    L = max_depth
    r = np.empty(L + 1)
    r[0] = 1.0
    for k in range(1, L + 1):
        r[k] = r[k - 1] * (2 * k - 1) / (2 * k)
    f = r.copy()
    lg = gammaln(np.arange(L + 2, dtype=np.float64))
    for j in range(2, d + 1):
        prev, f = f, np.empty(L + 1)
        f[0] = 1.0
        logp, logq = np.log(1.0 / j), np.log((j - 1) / j)
        for ell in range(1, L + 1):
            k = np.arange(ell + 1)
            logw = lg[ell + 1] - lg[k + 1] - lg[ell - k + 1] + k * logp + (ell - k) * logq
            f[ell] = float(np.exp(logw) @ (r[k] * prev[ell - k]))
    if theta_kill != 0.0:
        f *= (1.0 - theta_kill) ** np.arange(L + 1)
    return f


def green_diagonal_partial_sums(d: int, max_depth: int, theta_kill: float = 0.0) -> np.ndarray:
    """(1/2) sum_{ell <= L} q_ell(0,0) for all L <= max_depth."""
    return 0.5 * np.cumsum(return_probabilities(d, max_depth, theta_kill))


def fit_return_constant(d: int, lo: int = 64, hi: int = 4096, theta_kill: float = 0.0) -> float:
    """Empirical C with q_ell(0,0) <= C ell^(-d/2) over [lo, hi].

    The local-CLT constant is not pinned analytically here; it is fitted
    from computed return probabilities and used for tail bounds.
    """
    q = return_probabilities(d, hi, theta_kill)
    ells = np.arange(lo, hi + 1)
    return float(np.max(q[lo:] * ells ** (d / 2.0)))


def variance_gap(d: int, L: int, depth: int = 4096, theta_kill: float = 0.0) -> float:
    """Upper bound on Var(phi - phi^L) per site, d >= 3.

    Sums (1/2) q_ell(0,0) for L < ell <= depth exactly and bounds the
    remainder with the fitted power-law constant.
    """
    if d < 3 and theta_kill == 0.0:
        raise ValueError("massless variance gap only converges for d >= 3")
    q = return_probabilities(d, depth, theta_kill)
    exact = 0.5 * q[L + 1:].sum()
    C = float(np.max(q[depth // 2:] * np.arange(depth // 2, depth + 1) ** (d / 2.0)))
    if theta_kill == 0.0:
        tail = 0.5 * C * depth ** (1 - d / 2.0) / (d / 2.0 - 1.0)
    else:
        tail = 0.5 * q[depth] * (1 - theta_kill) / theta_kill
    return float(exact + tail)


def smallest_depth_for_gap(d: int, gap: float, theta_kill: float = 0.0,
                           depth: int = 4096) -> int:
    """Smallest L with Var(phi - phi^L) below gap (searched up to depth)."""
    q = return_probabilities(d, depth, theta_kill)
    tails = 0.5 * (q.sum() - np.cumsum(q))
    ok = np.nonzero(tails < gap)[0]
    if len(ok) == 0:
        raise ValueError(f"no L <= {depth} reaches variance gap {gap}")
    return int(ok[0])


# --- binary cache -----------------------------------------------------------

_MAGIC = b"GFFK"
_VERSION = 1


def save_kernel_cache(table: KernelTable, path) -> None:
    """Little-endian binary cache: header, dense row-major blocks, crc32."""
    payload = bytearray()
    payload += _MAGIC
    payload += struct.pack("<II I d", _VERSION, table.d, table.ell_max, table.theta_kill)
    for q in table.kernels:
        payload += q.astype("<f8").tobytes()
    crc = zlib.crc32(bytes(payload))
    with open(path, "wb") as fh:
        fh.write(bytes(payload))
        fh.write(struct.pack("<I", crc))


class CacheFormatError(ValueError):
    """Cache file is malformed, corrupted, or version-incompatible."""


def load_kernel_cache(path) -> KernelTable:
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 24 + 4 or blob[:4] != _MAGIC:
        raise CacheFormatError("not a kernel cache file")
    body, (crc,) = blob[:-4], struct.unpack("<I", blob[-4:])
    if zlib.crc32(body) != crc:
        raise CacheFormatError("kernel cache checksum mismatch")
    version, d, ell_max, theta = struct.unpack("<II I d", body[4:24])
    if version != _VERSION:
        raise CacheFormatError(f"unsupported cache version {version}")
    kernels = []
    off = 24
    for ell in range(ell_max + 1):
        n = (2 * ell + 1) ** d
        q = np.frombuffer(body, dtype="<f8", count=n, offset=off).reshape((2 * ell + 1,) * d)
        kernels.append(q.copy())
        off += n * 8
    if off != len(body):
        raise CacheFormatError("kernel cache has trailing bytes")
    return KernelTable(d=d, ell_max=ell_max, theta_kill=theta, kernels=kernels)
