"""Deterministic coefficient-tensor families for the experiment sweeps.

Five families stress different regimes of the moment bound:

* ``dense-gaussian``   -- complex Gaussian values across the index box;
* ``sparse-gaussian``  -- the same values on a low-density random support;
* ``diagonal-pairing`` -- unit values on the full diagonal (all chaos sites
  and the input/output indices equal), the maximal-pairing stress case; at
  order one this is the matrix series sum_n g_n e_n e_n^T;
* ``rank-one``         -- an outer product of unit vectors, so every
  flattening norm equals 1;
* ``random-sign``      -- +-1 values on a random support.

Tensors are pure functions of (family, shape, seed).  Index boxes grow like
(2N+1)^(k+2), so supports above ``support_budget`` nonzeros are deterministic
uniform subsamples; this also keeps every matricization side within the dense
cap of the norm engine.
"""

from __future__ import annotations

import hashlib
import itertools
import math
from typing import Sequence

import numpy as np

from .tensor_core import (
    LatticePoint,
    Tensor,
    a_labels,
    b_labels,
    j_labels,
    make_tensor,
)

FAMILY_NAMES = (
    "dense-gaussian",
    "sparse-gaussian",
    "diagonal-pairing",
    "rank-one",
    "random-sign",
)

DEFAULT_SUPPORT_BUDGET = 2000
DEFAULT_DENSITY = 0.05

_U64 = 0xFFFFFFFFFFFFFFFF


class UnknownFamilyError(ValueError):
    pass


def default_signs(k: int) -> tuple[int, ...]:
    """Alternating sign pattern (+1, -1, +1, ...): pairing-capable for k >= 2."""
    return tuple(1 if i % 2 == 0 else -1 for i in range(k))


def lattice_ball(d: int, N: int) -> list[LatticePoint]:
    """All points of Z^d with l1 norm <= N, sorted."""
    if d < 1:
        raise ValueError("d must be >= 1")

    def rec(remaining: int, left: int) -> list[tuple[int, ...]]:
        if remaining == 1:
            return [(c,) for c in range(-left, left + 1)]
        out = []
        for c in range(-left, left + 1):
            for tail in rec(remaining - 1, left - abs(c)):
                out.append((c,) + tail)
        return out

    return sorted(rec(d, N))


def _family_rng(name: str, seed: int, salt: int = 0) -> np.random.Generator:
    digest = hashlib.sha256(name.encode()).digest()
    return np.random.default_rng([seed & _U64, int.from_bytes(digest[:8], "big"), salt])


def _complex_gaussians(rng: np.random.Generator, count: int) -> np.ndarray:
    return (rng.standard_normal(count) + 1j * rng.standard_normal(count)) / math.sqrt(2.0)


def _support_indices(rng: np.random.Generator, total: int, count: int) -> np.ndarray:
    """``count`` distinct indices in [0, total), deterministic in the rng state."""
    if count >= total:
        return np.arange(total, dtype=np.int64)
    if total <= 4 * count:
        return np.sort(rng.permutation(total)[:count].astype(np.int64))
    chosen = np.unique(rng.integers(0, total, size=2 * count + 16, dtype=np.int64))
    while len(chosen) < count:
        more = rng.integers(0, total, size=2 * count, dtype=np.int64)
        chosen = np.unique(np.concatenate([chosen, more]))
    return np.sort(rng.permutation(chosen)[:count])


def _decode(flat: int, ball: Sequence[LatticePoint], axes: int) -> tuple[LatticePoint, ...]:
    base = len(ball)
    digits = []
    for _ in range(axes):
        flat, digit = divmod(flat, base)
        digits.append(ball[digit])
    return tuple(reversed(digits))


def generate_family(
    name: str,
    k: int,
    d: int,
    N: int,
    seed: int,
    na: int = 1,
    nb: int = 1,
    density: float = DEFAULT_DENSITY,
    support_budget: int = DEFAULT_SUPPORT_BUDGET,
) -> Tensor:
    """Deterministic tensor for one sweep cell."""
    if name not in FAMILY_NAMES:
        raise UnknownFamilyError(f"unknown family {name!r}; choose from {FAMILY_NAMES}")
    if k < 1 or na < 0 or nb < 0:
        raise ValueError("need k >= 1 and nonnegative na, nb")
    if support_budget < 1:
        raise ValueError("support budget must be >= 1")

    labels = j_labels(k) + a_labels(na) + b_labels(nb)
    axes = len(labels)
    ball = lattice_ball(d, N)
    rng = _family_rng(name, seed)

    if name == "diagonal-pairing":
        # one unit entry per site, all axes tied to that site
        count = min(len(ball), support_budget)
        picked = _support_indices(rng, len(ball), count)
        entries = {tuple(ball[i] for _ in range(axes)): 1.0 + 0.0j for i in picked}
        return make_tensor(labels, d, N, entries)

    if name == "rank-one":
        side = max(2, int(support_budget ** (1.0 / axes)))
        side = min(side, len(ball))
        factors = []
        for _ in range(axes):
            picked = np.sort(rng.choice(len(ball), size=side, replace=False))
            values = _complex_gaussians(rng, side)
            values /= np.linalg.norm(values)
            factors.append([(ball[i], v) for i, v in zip(picked, values)])
        entries = {}
        for combo in itertools.product(*factors):
            key = tuple(point for point, _ in combo)
            value = complex(1)
            for _, v in combo:
                value *= v
            entries[key] = value
        return make_tensor(labels, d, N, entries)

    total = len(ball) ** axes
    if name == "dense-gaussian":
        count = min(total, support_budget)
    elif name == "sparse-gaussian":
        count = min(total, support_budget, max(1, round(density * total)))
    elif name == "random-sign":
        count = min(total, support_budget, max(1, round(density * total)))
    picked = _support_indices(rng, total, count)

    if name == "random-sign":
        values = rng.integers(0, 2, size=len(picked)) * 2.0 - 1.0
    else:
        values = _complex_gaussians(rng, len(picked))
    entries = {_decode(int(flat), ball, axes): complex(v)
               for flat, v in zip(picked, values)}
    return make_tensor(labels, d, N, entries)
