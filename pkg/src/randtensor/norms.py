"""Matricization, flattening norms, and the merging contraction.

A two-sided partition of a tensor's labels turns it into a linear operator:
X-side labels index columns (inputs), Y-side labels index rows (outputs), and
the flattening norm is the operator norm of that matrix.  Only index values
actually touched by the support are enumerated; absent rows and columns are
zero and cannot change the largest singular value.

Norms come from an exact dense decomposition when the smaller matrix side is
at most 512, and otherwise from power iteration on the Gram operator with a
relative-residual stop.  Non-convergence raises; it is never silently
truncated.

``merge`` contracts two tensors over a shared label set, the operation whose
flattening norms obey the product estimate

    |merge(h1, h2, C)|_{A1 A2 -> B1 B2}  <=  |h1|_{A1 -> B1 C} * |h2|_{A2 C -> B2}.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .tensor_core import (
    IndexLabel,
    LabelConflictError,
    Partition,
    Tensor,
    TensorKey,
    make_tensor,
    sort_labels,
)

DEFAULT_DENSE_CAP = 4096
EXACT_SVD_MAX_SIDE = 512
DEFAULT_TOL = 1e-10
MAX_POWER_ITERATIONS = 10_000

_POWER_SEED = 0x9E3779B9


class DenseCapError(ValueError):
    """A matricization side exceeds the configured dense cap."""


class PowerIterationError(RuntimeError):
    """Power iteration failed to converge; carries the last estimate."""

    def __init__(self, message: str, last_value: float, iterations: int, residual: float):
        super().__init__(message)
        self.last_value = last_value
        self.iterations = iterations
        self.residual = residual


@dataclass(frozen=True)
class Matricization:
    """Dense matrix view of a tensor under a partition.

    ``row_keys`` / ``col_keys`` enumerate the support projections of the
    Y side / X side in sorted order; ``matrix[r, c]`` is the tensor value at
    the merged multi-index.
    """

    row_keys: tuple[TensorKey, ...]
    col_keys: tuple[TensorKey, ...]
    matrix: np.ndarray
    partition: Partition


@dataclass(frozen=True)
class NormResult:
    value: float
    method: str
    iterations: int = 0
    residual: float = 0.0


def matricize(h: Tensor, p: Partition, dense_cap: int = DEFAULT_DENSE_CAP) -> Matricization:
    """Arrange ``h`` as a matrix: X-side labels as columns, Y-side as rows."""
    if p.labels != set(h.labels):
        raise LabelConflictError("partition must cover exactly the tensor's labels")
    x_order = sort_labels(p.x_side)
    y_order = sort_labels(p.y_side)
    x_pos = tuple(h.labels.index(l) for l in x_order)
    y_pos = tuple(h.labels.index(l) for l in y_order)

    col_keys = sorted({tuple(key[i] for i in x_pos) for key in h.entries})
    row_keys = sorted({tuple(key[i] for i in y_pos) for key in h.entries})
    if len(col_keys) > dense_cap or len(row_keys) > dense_cap:
        raise DenseCapError(
            f"matricization {len(row_keys)}x{len(col_keys)} exceeds dense cap {dense_cap}")

    col_index = {key: i for i, key in enumerate(col_keys)}
    row_index = {key: i for i, key in enumerate(row_keys)}
    matrix = np.zeros((len(row_keys), len(col_keys)), dtype=np.complex128)
    for key, value in h.entries.items():
        r = row_index[tuple(key[i] for i in y_pos)]
        c = col_index[tuple(key[i] for i in x_pos)]
        matrix[r, c] = value
    return Matricization(tuple(row_keys), tuple(col_keys), matrix, p)


def _power_iteration(a: np.ndarray, tol: float, max_iterations: int) -> tuple[float, int, float]:
    """Largest singular value of ``a`` by power iteration on the Gram operator.

    The start vector comes from a fixed-seed generator so results are
    reproducible regardless of caller or worker identity.
    """
    if a.shape[0] < a.shape[1]:
        a = a.conj().T
    adjoint = np.ascontiguousarray(a.conj().T)
    n = a.shape[1]
    rng = np.random.default_rng(_POWER_SEED)
    v = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    v /= np.linalg.norm(v)
    previous = 0.0
    residual = float("inf")
    for iteration in range(1, max_iterations + 1):
        w = a @ v
        estimate = float(np.linalg.norm(w))
        if estimate == 0.0:
            # v landed exactly in the kernel; only possible when a is zero
            # up to rounding, in which case 0 is the answer.
            return 0.0, iteration, 0.0
        v = adjoint @ w
        v /= np.linalg.norm(v)
        residual = abs(estimate - previous) / estimate
        if residual <= tol:
            return estimate, iteration, residual
        previous = estimate
    raise PowerIterationError(
        f"power iteration did not reach tol={tol} in {max_iterations} iterations",
        last_value=previous, iterations=max_iterations, residual=residual)


def operator_norm(m, tol: float = DEFAULT_TOL,
                  max_iterations: int = MAX_POWER_ITERATIONS) -> NormResult:
    """Largest singular value of a matricization (or a raw matrix).

    Exact dense decomposition when min(rows, cols) <= 512; power iteration on
    the Gram operator beyond that.
    """
    if tol <= 0:
        raise ValueError("tolerance must be positive")
    matrix = m.matrix if isinstance(m, Matricization) else np.asarray(m)
    if matrix.ndim != 2:
        raise ValueError("operator norm needs a 2-d matrix")
    if matrix.size == 0:
        return NormResult(0.0, "exact_svd")
    if min(matrix.shape) <= EXACT_SVD_MAX_SIDE:
        value = float(np.linalg.svd(matrix, compute_uv=False)[0])
        return NormResult(value, "exact_svd")
    value, iterations, residual = _power_iteration(matrix, tol, max_iterations)
    return NormResult(value, "power_iteration", iterations, residual)


def tensor_norm(h: Tensor, p: Partition, tol: float = DEFAULT_TOL,
                dense_cap: int = DEFAULT_DENSE_CAP) -> NormResult:
    """The flattening norm of ``h`` under partition ``p``."""
    if p.labels != set(h.labels):
        raise LabelConflictError("partition must cover exactly the tensor's labels")
    if not h.entries:
        return NormResult(0.0, "exact_svd")
    return operator_norm(matricize(h, p, dense_cap), tol)


def merge(h1: Tensor, h2: Tensor, shared: Iterable[IndexLabel]) -> Tensor:
    """Contract ``h1`` and ``h2`` over the shared labels.

    The output carries the non-shared labels of both inputs (canonical
    order), dimension d of the inputs, and truncation max(N1, N2).
    """
    shared = frozenset(shared)
    for label in shared:
        if label not in h1.labels or label not in h2.labels:
            raise LabelConflictError(f"shared label {label.name} missing from an input")
    keep1 = [l for l in h1.labels if l not in shared]
    keep2 = [l for l in h2.labels if l not in shared]
    overlap = set(keep1) & set(keep2)
    if overlap:
        raise LabelConflictError(
            f"non-shared labels appear in both inputs: {sorted(l.name for l in overlap)}")
    if h1.dim != h2.dim:
        raise ValueError("inputs must share the lattice dimension d")

    shared_order = sort_labels(shared)
    pos1_shared = tuple(h1.labels.index(l) for l in shared_order)
    pos2_shared = tuple(h2.labels.index(l) for l in shared_order)

    out_labels = sort_labels(keep1 + keep2)
    source = []
    for label in out_labels:
        if label in h1.labels:
            source.append((0, h1.labels.index(label)))
        else:
            source.append((1, h2.labels.index(label)))

    by_shared: dict[TensorKey, list[tuple[TensorKey, complex]]] = {}
    for key2, v2 in h2.entries.items():
        by_shared.setdefault(tuple(key2[i] for i in pos2_shared), []).append((key2, v2))

    out_n = max(h1.truncation, h2.truncation)
    acc: dict[TensorKey, complex] = {}
    for key1, v1 in h1.entries.items():
        probe = tuple(key1[i] for i in pos1_shared)
        for key2, v2 in by_shared.get(probe, ()):
            out_key = tuple(key1[i] if side == 0 else key2[i] for side, i in source)
            acc[out_key] = acc.get(out_key, complex(0)) + v1 * v2
    return make_tensor(out_labels, h1.dim, out_n, acc)
