"""Deterministic counter-based Gaussian fields over truncated lattices.

A field assigns an independent standard Gaussian to every lattice point, and
must do so reproducibly: Monte Carlo workers evaluate sites in whatever order
scheduling happens to produce, so the value at a site has to be a pure
function of (master seed, stream index, site).  Stateful generators cannot
give that, so sampling here is a keyed integer hash.

Construction:

* a lattice point is packed into one 64-bit word (dimension in the low byte,
  then 16 bits per zig-zag-coded coordinate, d <= 3, |coord| <= 16383), which
  makes the encoding injective across dimensions;
* the packed word, the stream index, and a counter are absorbed into a
  splitmix64-style avalanche chain keyed by the master seed;
* two hashed words feed a polar Box-Muller transform.

Complex fields use g = sqrt(-ln u1) * exp(2*pi*i*u2), so E[|g|^2] = 1 and
|g|^2 is Exp(1) distributed.  Real fields use the cosine branch of the
classic Box-Muller transform, giving a standard real normal.

Streams with distinct indices are independent copies of the field; stream
pairs (2i, 2i+1) conventionally hold the i-th sample's (g, g~) pair.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .tensor_core import LatticePoint

MAX_DIM = 3
MAX_COORD = 16383

TRANSFORM_NAME = "polar-box-muller"
ENCODING_NAME = "packed-zigzag-16bit"

_MUL1 = np.uint64(0xBF58476D1CE4E5B9)
_MUL2 = np.uint64(0x94D049BB133111EB)
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_OFFSET = np.uint64(0x632BE59BD9B4E019)
_U64 = 0xFFFFFFFFFFFFFFFF


class EncodingRangeError(ValueError):
    """Lattice point outside the packable coordinate range."""


def _mix64(z: np.ndarray) -> np.ndarray:
    """splitmix64 finalizer; full-avalanche 64-bit permutation (arrays only).

    Kept array-valued on purpose: numpy warns on uint64 scalar overflow but
    wraps array arithmetic silently.
    """
    z = (z ^ (z >> np.uint64(30))) * _MUL1
    z = (z ^ (z >> np.uint64(27))) * _MUL2
    return z ^ (z >> np.uint64(31))


def _absorb(state: np.ndarray, word) -> np.ndarray:
    return _mix64((state ^ word) * _GOLDEN + _OFFSET)


def _absorb_int(state: int, word: int) -> int:
    """Same chain step as :func:`_absorb` on plain Python ints (key setup)."""
    z = (((state ^ word) & _U64) * 0x9E3779B97F4A7C15 + 0x632BE59BD9B4E019) & _U64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _U64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _U64
    return z ^ (z >> 31)


def encode_points(coords: np.ndarray) -> np.ndarray:
    """Pack an (m, d) array of lattice coordinates into m uint64 codes."""
    coords = np.asarray(coords, dtype=np.int64)
    if coords.ndim != 2:
        raise ValueError("expected a 2-d array of shape (m, d)")
    m, d = coords.shape
    if d < 1 or d > MAX_DIM:
        raise EncodingRangeError(f"dimension {d} outside 1..{MAX_DIM}")
    if m and int(np.abs(coords).max(initial=0)) > MAX_COORD:
        raise EncodingRangeError(f"coordinate magnitude exceeds {MAX_COORD}")
    zigzag = ((coords << 1) ^ (coords >> 63)).astype(np.uint64)
    code = np.full(m, d, dtype=np.uint64)
    for axis in range(d):
        code |= zigzag[:, axis] << np.uint64(8 + 16 * axis)
    return code


def _as_coord_array(points, d: int) -> np.ndarray:
    if isinstance(points, np.ndarray) and points.ndim == 2:
        return points.astype(np.int64, copy=False)
    rows = []
    for p in points:
        if isinstance(p, (int, np.integer)):
            rows.append((int(p),))
        else:
            rows.append(tuple(int(c) for c in p))
    arr = np.asarray(rows, dtype=np.int64) if rows else np.zeros((0, d), dtype=np.int64)
    if arr.shape[1:] != (d,):
        raise ValueError(f"points do not have dimension d={d}")
    return arr


@dataclass(frozen=True)
class GaussianField:
    """Immutable descriptor of a seeded Gaussian field.

    ``sample`` and ``sample_many`` are pure; instances are safe to share
    across processes.  The scalar path delegates to the vectorized one so
    there is exactly one code path producing values.
    """

    master_seed: int
    stream: int = 0
    kind: str = "complex"
    d: int = 1

    def __post_init__(self) -> None:
        if self.kind not in ("complex", "real"):
            raise ValueError("kind must be 'complex' or 'real'")
        if not 1 <= self.d <= MAX_DIM:
            raise EncodingRangeError(f"dimension {self.d} outside 1..{MAX_DIM}")
        if self.stream < 0:
            raise ValueError("stream index must be >= 0")

    def with_stream(self, stream: int) -> "GaussianField":
        return GaussianField(self.master_seed, stream, self.kind, self.d)

    def sample_many(self, points) -> np.ndarray:
        """Gaussian values at an iterable (or (m, d) array) of lattice points."""
        coords = _as_coord_array(points, self.d)
        code = encode_points(coords)
        stream_key = _absorb_int(self.master_seed & _U64, self.stream & _U64)
        site_state = _absorb(code, np.uint64(stream_key))
        w1 = _absorb(site_state, np.uint64(1))
        w2 = _absorb(site_state, np.uint64(2))
        # 53-bit mantissas; u1 in (0, 1] so the log is finite, u2 in [0, 1)
        u1 = ((w1 >> np.uint64(11)) + np.uint64(1)).astype(np.float64) * 2.0 ** -53
        u2 = (w2 >> np.uint64(11)).astype(np.float64) * 2.0 ** -53
        if self.kind == "complex":
            return np.sqrt(-np.log(u1)) * np.exp(2j * np.pi * u2)
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)

    def sample(self, n):
        value = self.sample_many([n])[0]
        return complex(value) if self.kind == "complex" else float(value)

    def metadata(self) -> dict:
        return {
            "master_seed": self.master_seed & _U64,
            "stream": self.stream,
            "kind": self.kind,
            "d": self.d,
            "transform": TRANSFORM_NAME,
            "encoding": ENCODING_NAME,
        }


@dataclass(frozen=True)
class BlendedField:
    """Fixed linear combination of two fields, sampled sitewise.

    Covers both the interpolation sin(phi) g + cos(phi) g~ and its derivative
    in phi; immutable and pure like the fields it wraps.
    """

    coeff_first: float
    first: GaussianField
    coeff_second: float
    second: GaussianField

    @property
    def kind(self) -> str:
        return self.first.kind

    @property
    def d(self) -> int:
        return self.first.d

    def sample_many(self, points) -> np.ndarray:
        return (self.coeff_first * self.first.sample_many(points)
                + self.coeff_second * self.second.sample_many(points))

    def sample(self, n):
        value = self.sample_many([n])[0]
        return complex(value) if self.kind == "complex" else float(value)


def _check_pair(g: GaussianField, g_tilde: GaussianField) -> None:
    if (g.kind, g.d, g.master_seed) != (g_tilde.kind, g_tilde.d, g_tilde.master_seed):
        raise ValueError("interpolation requires fields from the same seeded family")
    if g.stream == g_tilde.stream:
        raise ValueError("interpolation requires distinct streams")


def interpolate(g: GaussianField, g_tilde: GaussianField, phi: float) -> BlendedField:
    """The field phi |-> sin(phi) g + cos(phi) g~ (g~ at phi=0, g at phi=pi/2)."""
    _check_pair(g, g_tilde)
    return BlendedField(math.sin(phi), g, math.cos(phi), g_tilde)


def phi_derivative_field(g: GaussianField, g_tilde: GaussianField, phi: float) -> BlendedField:
    """The derivative of :func:`interpolate` in phi: cos(phi) g - sin(phi) g~."""
    _check_pair(g, g_tilde)
    return BlendedField(math.cos(phi), g, -math.sin(phi), g_tilde)


def sample_streams(master_seed: int, sample_index: int, kind: str = "complex",
                   d: int = 1) -> tuple[GaussianField, GaussianField]:
    """The (g, g~) field pair for one Monte Carlo sample: streams (2i, 2i+1)."""
    if sample_index < 0:
        raise ValueError("sample index must be >= 0")
    return (GaussianField(master_seed, 2 * sample_index, kind, d),
            GaussianField(master_seed, 2 * sample_index + 1, kind, d))
