"""Monte Carlo moment estimation for renormalized Gaussian tensor series.

Given a coefficient tensor h with labels J (chaos slots), A (inputs), and B
(outputs) plus a sign per chaos slot, the random tensor is

    G[a, b] = sum over J-assignments of h[j, a, b] * (renormalized product of
              the Gaussian factors at the assigned sites),

and the quantity of interest is the p-th moment of its flattening norm,
E[|G|_{A->B}^p]^(1/p).  Sampling reuses one precomputed plan per coefficient
tensor: entries are grouped by the collision pattern of their J-assignment,
each pattern evaluates its per-site renormalization monomials vectorized over
entries, and contributions accumulate into the dense A x B matrix.

Reduction order is canonical (sample index, exact fsum), the bootstrap is
seeded, and the Gaussian fields are counter-based, so every estimate replays
bit-identically regardless of worker count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .norms import (
    DEFAULT_DENSE_CAP,
    DEFAULT_TOL,
    PowerIterationError,
    operator_norm,
    tensor_norm,
)
from .sampler import GaussianField, sample_streams
from .tensor_core import (
    IndexLabel,
    Partition,
    Tensor,
    TensorKey,
    enumerate_partitions,
    make_tensor,
    sort_labels,
)
from .wick import renorm_terms

PER_SAMPLE_NORM_TOL = 1e-8
BOOTSTRAP_RESAMPLES = 1000
_BOOTSTRAP_SALT = 0xB0075EED


@dataclass(frozen=True)
class RandomTensorSpec:
    """Coefficient tensor plus the sign (+1 plain, -1 conjugated) per chaos slot.

    ``signs[i]`` belongs to the i-th J-group label in canonical label order.
    """

    h: Tensor
    signs: tuple[int, ...]

    def __post_init__(self) -> None:
        k = len(self.h.labels_in_group("J"))
        if k == 0:
            raise ValueError("spec needs at least one J-group label")
        if len(self.signs) != k:
            raise ValueError(f"{len(self.signs)} signs for {k} chaos slots")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")

    @property
    def k(self) -> int:
        return len(self.h.labels_in_group("J"))

    @property
    def d(self) -> int:
        return self.h.dim

    @property
    def truncation(self) -> int:
        return self.h.truncation


@dataclass(frozen=True)
class MomentEstimate:
    p: float
    mean_p_norm: float
    stderr: float
    samples: int
    seed: int
    flagged: int = 0


@dataclass(frozen=True)
class BoundReport:
    """Moment estimate against the deterministic flattening-norm bound.

    ``ratio`` is lhs / (p^(k/2) (log N)^(k/2) rhs_max): the empirical
    stand-in for the bound's constant.
    """

    lhs: MomentEstimate
    rhs_max: float
    best_partition: Partition
    ratio: float
    denominator: float


@dataclass(frozen=True)
class DecouplingReport:
    lhs: MomentEstimate
    rhs_terms: tuple[MomentEstimate, ...]
    rhs: float
    slack: float
    combined_stderr: float
    ratio: float
    ratio_stderr: float


# --- realize plans -----------------------------------------------------------


@dataclass(frozen=True)
class _PatternGroup:
    """One collision block of a pattern: chaos slots sharing a site."""

    positions: tuple[int, ...]
    sigma: int
    mu: int
    terms: tuple[tuple[int, int, int], ...]
    # reduced profile after removing one slot of a given sign (decoupling)
    reduced_terms: dict
    coords: np.ndarray


@dataclass(frozen=True)
class _Pattern:
    groups: tuple[_PatternGroup, ...]
    flat_index: np.ndarray
    values: np.ndarray


@dataclass(frozen=True)
class RealizePlan:
    spec: RandomTensorSpec
    out_labels: tuple[IndexLabel, ...]
    col_keys: tuple[TensorKey, ...]
    row_keys: tuple[TensorKey, ...]
    patterns: tuple[_Pattern, ...]


def _j_order(h: Tensor) -> tuple[IndexLabel, ...]:
    return sort_labels(h.labels_in_group("J"))


def build_realize_plan(spec: RandomTensorSpec) -> RealizePlan:
    """Group the coefficient entries by J-collision pattern, once per spec."""
    h = spec.h
    j_order = _j_order(h)
    a_order = sort_labels(h.labels_in_group("A"))
    b_order = sort_labels(h.labels_in_group("B"))
    j_pos = tuple(h.labels.index(l) for l in j_order)
    a_pos = tuple(h.labels.index(l) for l in a_order)
    b_pos = tuple(h.labels.index(l) for l in b_order)

    col_keys = sorted({tuple(key[i] for i in a_pos) for key in h.entries})
    row_keys = sorted({tuple(key[i] for i in b_pos) for key in h.entries})
    col_index = {key: i for i, key in enumerate(col_keys)}
    row_index = {key: i for i, key in enumerate(row_keys)}
    n_cols = len(col_keys)

    buckets: dict[tuple, list] = {}
    for key, value in h.entries.items():
        j_key = tuple(key[i] for i in j_pos)
        by_site: dict[tuple, list[int]] = {}
        for slot, point in enumerate(j_key):
            by_site.setdefault(point, []).append(slot)
        blocks = tuple(sorted(tuple(slots) for slots in by_site.values()))
        flat = row_index[tuple(key[i] for i in b_pos)] * n_cols \
            + col_index[tuple(key[i] for i in a_pos)]
        sites = tuple(j_key[block[0]] for block in blocks)
        buckets.setdefault(blocks, []).append((flat, value, sites))

    patterns = []
    for blocks in sorted(buckets):
        rows = buckets[blocks]
        flat_index = np.array([r[0] for r in rows], dtype=np.intp)
        values = np.array([r[1] for r in rows], dtype=np.complex128)
        groups = []
        for gi, block in enumerate(blocks):
            sigma = len(block)
            mu = sum(spec.signs[slot] for slot in block)
            reduced = {}
            for sign in (1, -1):
                if abs(mu - sign) <= sigma - 1:
                    reduced[sign] = renorm_terms(sigma - 1, mu - sign)
            coords = np.array([r[2][gi] for r in rows], dtype=np.int64)
            groups.append(_PatternGroup(block, sigma, mu, renorm_terms(sigma, mu),
                                        reduced, coords))
        patterns.append(_Pattern(tuple(groups), flat_index, values))

    return RealizePlan(spec, a_order + b_order, tuple(col_keys), tuple(row_keys),
                       tuple(patterns))


def _poly_eval(terms, z: np.ndarray) -> np.ndarray:
    zc = np.conj(z)
    out = np.zeros(z.shape, dtype=np.complex128)
    for a, b, c in terms:
        out += c * z ** a * zc ** b
    return out


def realize_matrix(plan: RealizePlan, field: GaussianField) -> np.ndarray:
    """Dense (B-support x A-support) matrix of the random tensor at one field."""
    n_rows, n_cols = len(plan.row_keys), len(plan.col_keys)
    out = np.zeros(n_rows * n_cols, dtype=np.complex128)
    for pattern in plan.patterns:
        chaos = np.ones(len(pattern.values), dtype=np.complex128)
        for group in pattern.groups:
            chaos *= _poly_eval(group.terms, field.sample_many(group.coords))
        np.add.at(out, pattern.flat_index, pattern.values * chaos)
    return out.reshape(n_rows, n_cols)


def realize_matrix_decoupled(plan: RealizePlan, g: GaussianField,
                             g_tilde: GaussianField, slot: int) -> np.ndarray:
    """One term of the decoupled series: slot's factor from the independent copy.

    The chosen chaos slot contributes g~ (conjugated when its sign is -1)
    while the remaining slots contribute the renormalized product under g,
    with the slot removed from its collision block.
    """
    signs = plan.spec.signs
    if not 0 <= slot < len(signs):
        raise ValueError(f"slot {slot} outside 0..{len(signs) - 1}")
    n_rows, n_cols = len(plan.row_keys), len(plan.col_keys)
    out = np.zeros(n_rows * n_cols, dtype=np.complex128)
    for pattern in plan.patterns:
        chaos = np.ones(len(pattern.values), dtype=np.complex128)
        for group in pattern.groups:
            z = g.sample_many(group.coords)
            if slot in group.positions:
                zt = g_tilde.sample_many(group.coords)
                tilde = zt if signs[slot] > 0 else np.conj(zt)
                chaos *= tilde * _poly_eval(group.reduced_terms[signs[slot]], z)
            else:
                chaos *= _poly_eval(group.terms, z)
        np.add.at(out, pattern.flat_index, pattern.values * chaos)
    return out.reshape(n_rows, n_cols)


def realize(spec: RandomTensorSpec, field: GaussianField,
            plan: Optional[RealizePlan] = None) -> Tensor:
    """The random tensor (labels A and B) at one sampled field."""
    if plan is None:
        plan = build_realize_plan(spec)
    matrix = realize_matrix(plan, field)
    entries: dict[TensorKey, complex] = {}
    for r, row_key in enumerate(plan.row_keys):
        for c, col_key in enumerate(plan.col_keys):
            value = matrix[r, c]
            if value != 0:
                entries[col_key + row_key] = complex(value)
    return make_tensor(plan.out_labels, spec.d, spec.truncation, entries)


def decoupled_inner_spec(spec: RandomTensorSpec, slot: int) -> RandomTensorSpec:
    """Spec realizing the inner tensor of the decoupling sum for one slot.

    The slot's J label is regrouped as an input axis, so realization sums
    over the remaining k-1 chaos slots only; the slot's site index stays
    free.  Used to cross-check the decoupled sampler and to chain the order-1
    bound onto the decoupled factor.
    """
    j_order = _j_order(spec.h)
    target = j_order[slot]
    labels = tuple(IndexLabel(l.name, "A") if l == target else l for l in spec.h.labels)
    relabeled = Tensor(labels, spec.h.dim, spec.h.truncation, spec.h.entries)
    signs = spec.signs[:slot] + spec.signs[slot + 1:]
    return RandomTensorSpec(relabeled, signs)


# --- moment estimation ---------------------------------------------------------


def _bootstrap_indices(n: int, seed: int, resamples: int = BOOTSTRAP_RESAMPLES) -> np.ndarray:
    rng = np.random.default_rng([seed & 0xFFFFFFFFFFFFFFFF, _BOOTSTRAP_SALT])
    return rng.integers(0, n, size=(resamples, n))


def _estimate(norm_values: np.ndarray, p: float, seed: int, flagged: int,
              idx: Optional[np.ndarray] = None) -> MomentEstimate:
    n = len(norm_values)
    powered = [float(v) ** p for v in norm_values]
    mean_p = math.fsum(powered) / n
    lhs = mean_p ** (1.0 / p)
    if idx is None:
        idx = _bootstrap_indices(n, seed)
    resampled = np.asarray(powered)[idx].mean(axis=1) ** (1.0 / p)
    stderr = float(resampled.std(ddof=1))
    return MomentEstimate(p, lhs, stderr, n, seed, flagged)


def _norm_of(matrix: np.ndarray, tol: float) -> tuple[float, int]:
    try:
        return operator_norm(matrix, tol).value, 0
    except PowerIterationError as err:
        return err.last_value, 1


def moment_norm(spec: RandomTensorSpec, p: float, n_samples: int, seed: int,
                tol: float = PER_SAMPLE_NORM_TOL,
                plan: Optional[RealizePlan] = None) -> MomentEstimate:
    """Estimate E[|G|_{A->B}^p]^(1/p) over ``n_samples`` independent fields.

    Sample i uses field stream 2i.  Non-converged per-sample norms keep their
    last iterate and are counted in ``flagged`` rather than dropped.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    if p < 1:
        raise ValueError("moment order p must be >= 1")
    if plan is None:
        plan = build_realize_plan(spec)
    values = np.empty(n_samples, dtype=np.float64)
    flagged = 0
    for i in range(n_samples):
        g = GaussianField(seed, 2 * i, "complex", spec.d)
        value, bad = _norm_of(realize_matrix(plan, g), tol)
        values[i] = value
        flagged += bad
    return _estimate(values, p, seed, flagged)


def rhs_bound(spec: RandomTensorSpec, tol: float = DEFAULT_TOL,
              dense_cap: int = DEFAULT_DENSE_CAP) -> tuple[float, Partition]:
    """Deterministic side of the chaos moment bound.

    Maximizes the flattening norm of h over all two-sided splits of the J
    labels, with A joining the input side and B the output side.  Ties keep
    the first partition in enumeration order.
    """
    a_side = set(spec.h.labels_in_group("A"))
    b_side = set(spec.h.labels_in_group("B"))
    best_value = -1.0
    best_partition: Optional[Partition] = None
    for j_part in enumerate_partitions(_j_order(spec.h)):
        full = Partition(j_part.x_side | frozenset(a_side),
                         j_part.y_side | frozenset(b_side))
        value = tensor_norm(spec.h, full, tol, dense_cap).value
        if value > best_value:
            best_value, best_partition = value, full
    assert best_partition is not None
    return best_value, best_partition


def bound_experiment(spec: RandomTensorSpec, p: float, n_samples: int, seed: int,
                     tol: float = PER_SAMPLE_NORM_TOL,
                     norm_tol: float = DEFAULT_TOL,
                     dense_cap: int = DEFAULT_DENSE_CAP) -> BoundReport:
    """Monte Carlo lhs against the deterministic rhs; ratio stands in for C."""
    lhs = moment_norm(spec, p, n_samples, seed, tol)
    rhs_max, best = rhs_bound(spec, norm_tol, dense_cap)
    log_n = math.log(spec.truncation)
    denominator = (p * log_n) ** (spec.k / 2.0) * rhs_max
    if denominator > 0:
        ratio = lhs.mean_p_norm / denominator
    else:
        ratio = 0.0 if lhs.mean_p_norm == 0 else math.inf
    return BoundReport(lhs, rhs_max, best, ratio, denominator)


def khintchine_experiment(spec: RandomTensorSpec, p: float, n_samples: int, seed: int,
                          tol: float = PER_SAMPLE_NORM_TOL,
                          norm_tol: float = DEFAULT_TOL,
                          dense_cap: int = DEFAULT_DENSE_CAP) -> BoundReport:
    """Order-1 case: the rhs maximum runs over exactly the two flattenings

    |h|_{(j,A) -> B} and |h|_{A -> (j,B)}, and the prefactor reduces to
    sqrt(p log N).
    """
    if spec.k != 1:
        raise ValueError("khintchine experiment requires exactly one chaos slot")
    return bound_experiment(spec, p, n_samples, seed, tol, norm_tol, dense_cap)


def decoupling_experiment(spec: RandomTensorSpec, p: float, n_samples: int, seed: int,
                          tol: float = PER_SAMPLE_NORM_TOL) -> DecouplingReport:
    """Compare E[|G|^p]^(1/p) with the decoupled majorant.

    rhs = (pi/2) * sum over slots j of E[|sum_J h g~_(n_j) L(g at J minus j)|^p]^(1/p),
    sample i drawing (g, g~) from streams (2i, 2i+1).  The slack bootstrap is
    joint, so correlations between the two sides are respected.
    """
    if n_samples < 2:
        raise ValueError("need at least 2 samples")
    plan = build_realize_plan(spec)
    k = spec.k
    lhs_norms = np.empty(n_samples, dtype=np.float64)
    term_norms = np.empty((k, n_samples), dtype=np.float64)
    flagged = 0
    for i in range(n_samples):
        g, g_tilde = sample_streams(seed, i, "complex", spec.d)
        value, bad = _norm_of(realize_matrix(plan, g), tol)
        lhs_norms[i] = value
        flagged += bad
        for slot in range(k):
            value, bad = _norm_of(realize_matrix_decoupled(plan, g, g_tilde, slot), tol)
            term_norms[slot, i] = value
            flagged += bad

    idx = _bootstrap_indices(n_samples, seed)
    lhs = _estimate(lhs_norms, p, seed, flagged, idx=idx)
    terms = tuple(_estimate(term_norms[slot], p, seed, 0, idx=idx) for slot in range(k))
    rhs = (math.pi / 2.0) * math.fsum(t.mean_p_norm for t in terms)
    slack = rhs - lhs.mean_p_norm

    # joint bootstrap of slack and of the rhs/lhs ratio over shared resamples
    lhs_res = np.asarray([float(v) ** p for v in lhs_norms])[idx].mean(axis=1) ** (1.0 / p)
    rhs_res = np.zeros_like(lhs_res)
    for slot in range(k):
        powered = np.asarray([float(v) ** p for v in term_norms[slot]])
        rhs_res += powered[idx].mean(axis=1) ** (1.0 / p)
    rhs_res *= math.pi / 2.0
    combined_stderr = float((rhs_res - lhs_res).std(ddof=1))
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(lhs_res > 0, rhs_res / np.where(lhs_res > 0, lhs_res, 1.0), np.inf)
    finite = ratios[np.isfinite(ratios)]
    ratio = rhs / lhs.mean_p_norm if lhs.mean_p_norm > 0 else math.inf
    ratio_stderr = float(finite.std(ddof=1)) if len(finite) > 1 else 0.0
    return DecouplingReport(lhs, terms, rhs, slack, combined_stderr, ratio, ratio_stderr)
