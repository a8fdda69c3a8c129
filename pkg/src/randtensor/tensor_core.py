"""Sparse complex tensors indexed by labeled lattice multi-indices.

A tensor here is a finitely supported map from tuples of integer lattice
points to complex values.  Each axis carries an :class:`IndexLabel` that
belongs to one of three groups:

* ``J`` -- axes that will be summed against a Gaussian product,
* ``A`` -- input axes of the operator view,
* ``B`` -- output axes of the operator view.

Every lattice point on the support must satisfy an l1 truncation bound,
``sum(|c| for c in coords) <= N``; the bound is enforced at construction so
that it holds as a data invariant.  Tensors are immutable after construction
and safe to share across workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Iterable, Mapping

LatticePoint = tuple[int, ...]
TensorKey = tuple[LatticePoint, ...]

GROUPS = ("J", "A", "B")

DEFAULT_PARTITION_CAP = 12


class SupportBoundError(ValueError):
    """A lattice point violates the l1 truncation bound."""


class LabelConflictError(ValueError):
    """Duplicate or inconsistent index labels."""


class PartitionCapError(ValueError):
    """Too many labels to enumerate all two-sided partitions."""


@dataclass(frozen=True, order=True)
class IndexLabel:
    """A named tensor axis; ``group`` is one of ``"J"``, ``"A"``, ``"B"``."""

    name: str
    group: str

    def __post_init__(self) -> None:
        if self.group not in GROUPS:
            raise LabelConflictError(f"unknown label group {self.group!r}")


def j_labels(k: int) -> tuple[IndexLabel, ...]:
    """Labels j1..jk for the Gaussian-summation axes of a chaos of order k."""
    return tuple(IndexLabel(f"j{i + 1}", "J") for i in range(k))


def a_labels(n: int) -> tuple[IndexLabel, ...]:
    return tuple(IndexLabel(f"a{i + 1}", "A") for i in range(n))


def b_labels(n: int) -> tuple[IndexLabel, ...]:
    return tuple(IndexLabel(f"b{i + 1}", "B") for i in range(n))


def l1_norm(point: LatticePoint) -> int:
    return sum(abs(c) for c in point)


def _canonical_point(point, d: int) -> LatticePoint:
    """Normalize a coordinate spec to a length-d integer tuple.

    Bare ints are accepted as sugar for d=1.
    """
    if isinstance(point, int):
        point = (point,)
    pt = tuple(int(c) for c in point)
    if len(pt) != d:
        raise ValueError(f"lattice point {pt} has {len(pt)} coords, expected d={d}")
    return pt


def sort_labels(labels: Iterable[IndexLabel]) -> tuple[IndexLabel, ...]:
    """Canonical label order: by group (J, A, B), then name length, then name.

    Length-before-name keeps numeric suffixes in natural order (j2 < j10).
    """
    return tuple(sorted(labels, key=lambda l: (GROUPS.index(l.group), len(l.name), l.name)))


@dataclass(frozen=True)
class Tensor:
    """Sparse tensor over a truncated lattice box.

    ``entries`` maps a key -- one lattice point per label, in ``labels``
    order -- to a nonzero complex value.  Keys are stored in sorted order so
    that iteration, contraction, and serialization are deterministic.
    Treat instances as immutable; ``entries`` must not be mutated.
    """

    labels: tuple[IndexLabel, ...]
    dim: int
    truncation: int
    entries: dict[TensorKey, complex]

    @property
    def n_axes(self) -> int:
        return len(self.labels)

    @property
    def nnz(self) -> int:
        return len(self.entries)

    def label_positions(self, subset: Iterable[IndexLabel]) -> tuple[int, ...]:
        """Axis positions of ``subset`` labels, in this tensor's label order."""
        wanted = set(subset)
        missing = wanted - set(self.labels)
        if missing:
            raise LabelConflictError(f"labels not in tensor: {sorted(l.name for l in missing)}")
        return tuple(i for i, l in enumerate(self.labels) if l in wanted)

    def labels_in_group(self, group: str) -> tuple[IndexLabel, ...]:
        return tuple(l for l in self.labels if l.group == group)

    def scale(self, factor: complex) -> "Tensor":
        return make_tensor(self.labels, self.dim, self.truncation,
                           {k: factor * v for k, v in self.entries.items()})


def make_tensor(
    labels: Iterable[IndexLabel],
    d: int,
    N: int,
    entries: Mapping[TensorKey, complex],
) -> Tensor:
    """Build a canonical sparse tensor.

    Entries with value exactly zero are dropped.  Every lattice point must
    satisfy the l1 bound ``<= N``; violations raise :class:`SupportBoundError`.
    Duplicate labels raise :class:`LabelConflictError`.
    """
    labels = tuple(labels)
    if len({l.name for l in labels}) != len(labels):
        raise LabelConflictError(f"duplicate label names in {[l.name for l in labels]}")
    if d < 1:
        raise ValueError("dimension d must be >= 1")
    if N < 0:
        raise ValueError("truncation N must be >= 0")

    canonical: dict[TensorKey, complex] = {}
    for key, value in entries.items():
        if len(labels) == 0:
            key = ()
        elif len(labels) == 1 and (isinstance(key, int) or (key and isinstance(key[0], int))):
            # sugar: a single point given without the outer tuple
            key = (key,)
        if len(key) != len(labels):
            raise ValueError(f"key {key!r} has {len(key)} points, expected {len(labels)}")
        pts = tuple(_canonical_point(p, d) for p in key)
        for pt in pts:
            if l1_norm(pt) > N:
                raise SupportBoundError(f"point {pt} outside l1 ball of radius {N}")
        value = complex(value)
        if value == 0:
            continue
        canonical[pts] = value

    ordered = dict(sorted(canonical.items()))
    return Tensor(labels=labels, dim=d, truncation=N, entries=ordered)


def conjugate(h: Tensor) -> Tensor:
    """Entrywise complex conjugate; support is unchanged."""
    return Tensor(h.labels, h.dim, h.truncation,
                  {k: v.conjugate() for k, v in h.entries.items()})


@dataclass(frozen=True)
class Partition:
    """An ordered split of a label set into an X side and a Y side."""

    x_side: frozenset[IndexLabel]
    y_side: frozenset[IndexLabel]

    def __post_init__(self) -> None:
        if self.x_side & self.y_side:
            raise LabelConflictError("partition sides overlap")

    @property
    def labels(self) -> frozenset[IndexLabel]:
        return self.x_side | self.y_side

    def describe(self) -> str:
        """Compact ``x1+x2|y1`` rendering (empty side renders as nothing)."""
        x = "+".join(l.name for l in sort_labels(self.x_side))
        y = "+".join(l.name for l in sort_labels(self.y_side))
        return f"{x}|{y}"


def partition(x_side: Iterable[IndexLabel], y_side: Iterable[IndexLabel]) -> Partition:
    return Partition(frozenset(x_side), frozenset(y_side))


def enumerate_partitions(
    labels: Iterable[IndexLabel],
    cap: int = DEFAULT_PARTITION_CAP,
) -> list[Partition]:
    """All 2^n ordered two-sided partitions of ``labels``, deterministic order.

    The first partition puts everything on the X side, the last everything on
    the Y side.  Raises :class:`PartitionCapError` above ``cap`` labels.
    """
    ordered = sort_labels(set(labels))
    n = len(ordered)
    if n > cap:
        raise PartitionCapError(f"{n} labels exceeds partition cap {cap}")
    out = []
    for mask in range(1 << n):
        x = frozenset(ordered[i] for i in range(n) if not mask >> i & 1)
        y = frozenset(ordered[i] for i in range(n) if mask >> i & 1)
        out.append(Partition(x, y))
    return out


# --- JSON serialization ----------------------------------------------------
#
# Schema: {"labels": [[name, group], ...], "d": int, "N": int,
#          "entries": [[flat coords..., re, im], ...]}
# with coords flattened in label order and entries sorted, so files are
# byte-reproducible.


def tensor_to_json(h: Tensor) -> str:
    rows = []
    for key, value in h.entries.items():
        coords: list[int] = []
        for pt in key:
            coords.extend(pt)
        rows.append([coords, value.real, value.imag])
    doc = {
        "labels": [[l.name, l.group] for l in h.labels],
        "d": h.dim,
        "N": h.truncation,
        "entries": rows,
    }
    return json.dumps(doc, separators=(",", ":"))


def tensor_from_json(text: str) -> Tensor:
    doc = json.loads(text)
    labels = tuple(IndexLabel(name, group) for name, group in doc["labels"])
    d = int(doc["d"])
    entries: dict[TensorKey, complex] = {}
    for coords, re, im in doc["entries"]:
        if len(coords) != len(labels) * d:
            raise ValueError("entry coordinate count does not match labels * d")
        key = tuple(tuple(coords[i * d:(i + 1) * d]) for i in range(len(labels)))
        entries[key] = complex(re, im)
    return make_tensor(labels, d, int(doc["N"]), entries)
