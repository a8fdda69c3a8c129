"""Verification gates behind the verify-wick and verify-merging commands.

Every gate returns a :class:`GateResult`; the CLI exits nonzero unless all
gates pass.  The wick gates are exact (integer and rational arithmetic, no
tolerances) except for the finite-difference derivative check, which is
numeric by nature.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np

from .norms import merge, tensor_norm
from .sampler import GaussianField
from .tensor_core import IndexLabel, Partition, make_tensor
from .wick import (
    chaos_spec,
    hermite,
    laguerre,
    laguerre_coefficients,
    phi_derivative_check,
    renorm_terms,
    renormalize,
    wick_expectation,
)


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    cases: int
    detail: str


def set_partitions(k: int, max_blocks: int) -> Iterator[tuple[tuple[int, ...], ...]]:
    """All ways to split slots 0..k-1 into at most ``max_blocks`` blocks."""

    def rec(i: int, blocks: list[list[int]]) -> Iterator[tuple[tuple[int, ...], ...]]:
        if i == k:
            yield tuple(tuple(b) for b in blocks)
            return
        for b in blocks:
            b.append(i)
            yield from rec(i + 1, blocks)
            b.pop()
        if len(blocks) < max_blocks:
            blocks.append([i])
            yield from rec(i + 1, blocks)
            blocks.pop()

    yield from rec(0, [])


def _poly_at(coeffs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + Fraction(c)
    return acc


# pinned classical lists, lowest degree first
_LAGUERRE_LIST = (
    (Fraction(1),),
    (Fraction(1), Fraction(-1)),
    (Fraction(1), Fraction(-2), Fraction(1, 2)),
    (Fraction(1), Fraction(-3), Fraction(3, 2), Fraction(-1, 6)),
    (Fraction(1), Fraction(-4), Fraction(3), Fraction(-2, 3), Fraction(1, 24)),
)
_HERMITE_LIST = (
    (Fraction(1),),
    (Fraction(0), Fraction(1)),
    (Fraction(-1), Fraction(0), Fraction(1)),
    (Fraction(0), Fraction(-3), Fraction(0), Fraction(1)),
    (Fraction(3), Fraction(0), Fraction(-6), Fraction(0), Fraction(1)),
)

_RENORM_TABLE = {
    (4, 4): ((4, 0, 1),),
    (4, 2): ((2, 0, -3), (3, 1, 1)),
    (4, 0): ((0, 0, 2), (1, 1, -4), (2, 2, 1)),
    (2, 0): ((0, 0, -1), (1, 1, 1)),
}


def gate_renorm_table() -> GateResult:
    bad = [key for key, want in _RENORM_TABLE.items() if renorm_terms(*key) != want]
    return GateResult(
        "renormalization-table", not bad, len(_RENORM_TABLE),
        "exact match" if not bad else f"mismatch at {bad}")


def gate_zero_mean(max_k: int = 6, max_sites: int = 3) -> GateResult:
    cases = 0
    for k in range(1, max_k + 1):
        for blocks in set_partitions(k, max_sites):
            sites = [None] * k
            for site_index, block in enumerate(blocks):
                for slot in block:
                    sites[slot] = (site_index,)
            for signs in itertools.product((1, -1), repeat=k):
                spec = chaos_spec(sites, signs)
                cases += 1
                if wick_expectation(renormalize(spec)) != 0:
                    return GateResult("zero-mean", False, cases,
                                      f"nonzero mean for sites={sites} signs={signs}")
    return GateResult("zero-mean", True, cases, "all expectations exactly 0")


def gate_polynomial_lists() -> GateResult:
    points = [Fraction(i, 3) for i in range(-6, 7)]
    cases = 0
    for q, coeffs in enumerate(_LAGUERRE_LIST):
        for x in points:
            cases += 1
            if laguerre(q, 0, x) != _poly_at(coeffs, x):
                return GateResult("polynomial-lists", False, cases,
                                  f"Laguerre recurrence disagrees at q={q}, x={x}")
            if _poly_at(laguerre_coefficients(q, 0), x) != _poly_at(coeffs, x):
                return GateResult("polynomial-lists", False, cases,
                                  f"Laguerre closed form disagrees at q={q}, x={x}")
    for n, coeffs in enumerate(_HERMITE_LIST):
        for x in points:
            cases += 1
            if hermite(n, x) != _poly_at(coeffs, x):
                return GateResult("polynomial-lists", False, cases,
                                  f"Hermite recurrence disagrees at n={n}, x={x}")
    return GateResult("polynomial-lists", True, cases, "classical lists reproduced")


def gate_laguerre_derivatives(max_m: int = 5, max_alpha: int = 5) -> GateResult:
    """d/dx L_m^a = -L_{m-1}^{a+1} and d/dx [x^a L_m^a] = (m+a) x^{a-1} L_m^{a-1}."""
    cases = 0
    for alpha in range(0, max_alpha + 1):
        for m in range(1, max_m + 1):
            cases += 1
            c = laguerre_coefficients(m, alpha)
            deriv = tuple((i + 1) * c[i + 1] for i in range(m))
            want = tuple(-v for v in laguerre_coefficients(m - 1, alpha + 1))
            if deriv != want:
                return GateResult("laguerre-derivatives", False, cases,
                                  f"first identity fails at m={m}, alpha={alpha}")
    for alpha in range(1, max_alpha + 1):
        for m in range(0, max_m + 1):
            cases += 1
            c = laguerre_coefficients(m, alpha)
            # coefficient of x^(i+alpha-1) in d/dx [x^alpha L_m^alpha] is (i+alpha) c_i
            lhs = tuple((i + alpha) * c[i] for i in range(m + 1))
            rhs = tuple((m + alpha) * v for v in laguerre_coefficients(m, alpha - 1))
            if lhs != rhs:
                return GateResult("laguerre-derivatives", False, cases,
                                  f"second identity fails at m={m}, alpha={alpha}")
    return GateResult("laguerre-derivatives", True, cases, "exact polynomial identities")


def gate_hermite_properties(max_n: int = 8) -> GateResult:
    cases = 0
    for n in range(1, max_n + 1):
        # coefficient route must agree with the recurrence route
        coeffs_n = _hermite_coeffs(n)
        for x in (Fraction(-2), Fraction(1, 3), Fraction(5, 2)):
            cases += 1
            if hermite(n, x) != _poly_at(coeffs_n, x):
                return GateResult("hermite-properties", False, cases,
                                  f"coefficient route disagrees at n={n}, x={x}")
        deriv = tuple((i + 1) * coeffs_n[i + 1] for i in range(n))
        want = tuple(n * v for v in _hermite_coeffs(n - 1))
        cases += 1
        if deriv != want:
            return GateResult("hermite-properties", False, cases,
                              f"derivative identity fails at n={n}")
        # zero mean against standard normal moments: E[x^j] = (j-1)!! for even j
        mean = Fraction(0)
        for j, c in enumerate(coeffs_n):
            if j % 2 == 0:
                mean += c * _double_factorial(j - 1)
        cases += 1
        if mean != 0:
            return GateResult("hermite-properties", False, cases,
                              f"nonzero Gaussian mean at n={n}")
    return GateResult("hermite-properties", True, cases, "derivative and mean identities hold")


def _hermite_coeffs(n: int) -> tuple[Fraction, ...]:
    prev = (Fraction(1),)
    if n == 0:
        return prev
    cur = (Fraction(0), Fraction(1))
    for k in range(1, n):
        shifted = (Fraction(0),) + cur
        scaled = tuple(k * v for v in prev) + (Fraction(0), Fraction(0))
        cur, prev = tuple(a - b for a, b in zip(shifted, scaled[: len(shifted)])), cur
    return cur


def _double_factorial(j: int) -> int:
    out = 1
    while j > 1:
        out *= j
        j -= 2
    return out


def gate_monic_and_conjugation(max_k: int = 4, max_sites: int = 3) -> GateResult:
    cases = 0
    for k in range(1, max_k + 1):
        for blocks in set_partitions(k, max_sites):
            sites = [None] * k
            for site_index, block in enumerate(blocks):
                for slot in block:
                    sites[slot] = (site_index,)
            for signs in itertools.product((1, -1), repeat=k):
                spec = chaos_spec(sites, signs)
                poly = renormalize(spec)
                cases += 1
                for factor in poly.factors:
                    sigma = max(a + b for a, b, _ in factor.terms)
                    top = [c for a, b, c in factor.terms if a + b == sigma]
                    if top != [1]:
                        return GateResult("monic-and-conjugation", False, cases,
                                          f"non-monic factor for sites={sites} signs={signs}")
                flipped = chaos_spec(sites, [-s for s in signs])
                if renormalize(flipped) != poly.conjugated():
                    return GateResult("monic-and-conjugation", False, cases,
                                      f"conjugation symmetry fails for sites={sites}")
    return GateResult("monic-and-conjugation", True, cases, "monic; conjugation symmetric")


def gate_phi_derivative(trials: int = 120, seed: int = 2026_08_25, tol: float = 1e-6) -> GateResult:
    """Finite-difference check of the interpolation derivative identity."""
    rng = np.random.default_rng(seed)
    worst = 0.0
    for trial in range(trials):
        k = int(rng.integers(1, 5))
        n_sites = int(rng.integers(1, min(3, k) + 1))
        sites = [(int(rng.integers(0, n_sites)),) for _ in range(k)]
        signs = [int(s) for s in rng.choice([1, -1], size=k)]
        phi = float(rng.uniform(0.05, math.pi / 2 - 0.05))
        g = GaussianField(int(rng.integers(0, 2 ** 63)), 0)
        g_tilde = g.with_stream(1)
        _, _, rel = phi_derivative_check(chaos_spec(sites, signs), g, g_tilde, phi)
        worst = max(worst, rel)
        if rel > tol:
            return GateResult("phi-derivative", False, trial + 1,
                              f"relative error {rel:.3e} > {tol:g}")
    return GateResult("phi-derivative", True, trials, f"worst relative error {worst:.3e}")


def run_verify_wick() -> list[GateResult]:
    return [
        gate_renorm_table(),
        gate_zero_mean(),
        gate_polynomial_lists(),
        gate_laguerre_derivatives(),
        gate_hermite_properties(),
        gate_monic_and_conjugation(),
        gate_phi_derivative(),
    ]


# --- merging estimate -----------------------------------------------------------


def _random_sparse(rng: np.random.Generator, labels, N: int, nnz: int):
    points = list(range(-N, N + 1))
    entries = {}
    for _ in range(nnz):
        key = tuple((int(rng.choice(points)),) for _ in labels)
        entries[key] = complex(rng.standard_normal(), rng.standard_normal())
    return make_tensor(labels, 1, N, entries)


def gate_merging(trials: int = 1000, seed: int = 777, rel_slack: float = 1e-8) -> GateResult:
    """Randomized check of the contraction norm estimate."""
    rng = np.random.default_rng(seed)
    a1 = IndexLabel("a1", "A")
    b1 = IndexLabel("b1", "B")
    a2 = IndexLabel("a2", "A")
    b2 = IndexLabel("b2", "B")
    worst = -math.inf
    for trial in range(trials):
        n_shared = int(rng.integers(1, 3))
        shared = tuple(IndexLabel(f"c{i + 1}", "J") for i in range(n_shared))
        N = int(rng.integers(2, 5))
        h1 = _random_sparse(rng, (a1, b1) + shared, N, int(rng.integers(1, 25)))
        h2 = _random_sparse(rng, (a2, b2) + shared, N, int(rng.integers(1, 25)))
        merged = merge(h1, h2, shared)
        lhs = tensor_norm(merged, Partition(frozenset({a1, a2}), frozenset({b1, b2}))).value
        r1 = tensor_norm(h1, Partition(frozenset({a1}), frozenset({b1, *shared}))).value
        r2 = tensor_norm(h2, Partition(frozenset({a2, *shared}), frozenset({b2}))).value
        bound = r1 * r2
        violation = (lhs - bound) / max(bound, 1e-300)
        worst = max(worst, violation)
        if violation > rel_slack:
            return GateResult("merging-estimate", False, trial + 1,
                              f"violation {violation:.3e} > {rel_slack:g}")
    return GateResult("merging-estimate", True, trials,
                      f"max relative slack used {worst:.3e}")


def run_verify_merging(trials: int = 1000, seed: int = 777) -> list[GateResult]:
    return [gate_merging(trials=trials, seed=seed)]
