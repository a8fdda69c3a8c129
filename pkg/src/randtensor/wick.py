"""Wick renormalization of products of complex Gaussians.

A product of standard complex Gaussian factors g_{n1}^{s1} * ... * g_{nk}^{sk}
(sign +1 for a plain factor, -1 for a conjugated one) stops being centered as
soon as two factors at the same site carry opposite signs.  The renormalized
product subtracts all lower-order correlation terms so the result has mean
zero for every collision pattern.

The correction is local to each lattice site.  Write sigma for the number of
factors landing on the site and mu for the signed count (plain minus
conjugated); the renormalized single-site factor is

    (-1)^m * m! * L_m^{|mu|}(|g|^2) * g^mu,      m = (sigma - |mu|) / 2,

where L_m^alpha is the generalized Laguerre polynomial and g^mu means
conj(g)^|mu| when mu is negative.  The factorial prefactor clears every
Laguerre denominator, so the expansion over monomials g^a conj(g)^b has exact
integer coefficients and is monic in the original product monomial.  The
real-Gaussian analogue multiplies probabilists' Hermite polynomials per site.

Expectations are available exactly: with the normalization E[|g|^2] = 1 the
modulus squared is Exp(1) distributed, hence E[g^a conj(g)^b] = delta_ab * a!
per site, and distinct sites are independent.  That rule gives a
zero-tolerance oracle for the centering property.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

from .tensor_core import LatticePoint

Sign = int


def laguerre(q: int, alpha, x):
    """Generalized Laguerre polynomial L_q^alpha(x) via the three-term recurrence.

    Duck-typed in x and alpha: floats, Fractions, numpy arrays, and symbolic
    objects all work.  Exact evaluation requires exact inputs, since the
    recurrence divides by q at each step.
    """
    if q < 0:
        raise ValueError("Laguerre degree must be >= 0")
    one = x * 0 + 1
    prev = one
    if q == 0:
        return prev
    cur = (1 + alpha) * one - x
    for k in range(1, q):
        prev, cur = cur, ((2 * k + 1 + alpha - x) * cur - (k + alpha) * prev) / (k + 1)
    return cur


def laguerre_coefficients(q: int, alpha: int) -> tuple[Fraction, ...]:
    """Exact coefficients (c_0, ..., c_q) with c_i = [x^i] L_q^alpha(x).

    Uses the closed form c_i = (-1)^i * binom(q + alpha, q - i) / i!, which is
    independent of the recurrence in :func:`laguerre`; the two routes
    cross-check each other.
    """
    if q < 0 or alpha < 0:
        raise ValueError("degree and parameter must be >= 0")
    return tuple(
        Fraction((-1) ** i * math.comb(q + alpha, q - i), math.factorial(i))
        for i in range(q + 1)
    )


def hermite(n: int, x):
    """Probabilists' Hermite polynomial, He_{n+1} = x * He_n - n * He_{n-1}.

    Normalized so that d/dx He_n = n He_{n-1} and E[He_n(X)] = 0 for a
    standard real Gaussian X.
    """
    if n < 0:
        raise ValueError("Hermite degree must be >= 0")
    one = x * 0 + 1
    prev = one
    if n == 0:
        return prev
    cur = x * one
    for k in range(1, n):
        prev, cur = cur, x * cur - k * prev
    return cur


# --- chaos specifications and site bookkeeping ------------------------------


@dataclass(frozen=True)
class ChaosSpec:
    """One Gaussian product: lattice sites n_1..n_k with signs s_1..s_k."""

    points: tuple[LatticePoint, ...]
    signs: tuple[Sign, ...]

    def __post_init__(self) -> None:
        if len(self.points) != len(self.signs):
            raise ValueError("points and signs must have equal length")
        if not self.points:
            raise ValueError("chaos order k must be >= 1")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError("signs must be +1 or -1")

    @property
    def k(self) -> int:
        return len(self.points)


def chaos_spec(points: Sequence, signs: Sequence[int]) -> ChaosSpec:
    """Build a ChaosSpec, accepting bare ints as d=1 lattice points."""
    pts = tuple(
        (int(p),) if isinstance(p, int) else tuple(int(c) for c in p) for p in points
    )
    return ChaosSpec(pts, tuple(int(s) for s in signs))


@dataclass(frozen=True)
class SiteProfile:
    """Collision data at one site: sigma factors, signed count mu."""

    site: LatticePoint
    sigma: int
    mu: int

    def __post_init__(self) -> None:
        if abs(self.mu) > self.sigma or (self.sigma - abs(self.mu)) % 2:
            raise ValueError(f"invalid profile sigma={self.sigma}, mu={self.mu}")


def site_profiles(spec: ChaosSpec) -> tuple[SiteProfile, ...]:
    """Per-site (sigma, mu) for the distinct sites of a chaos spec, sorted by site."""
    sigma: Counter = Counter()
    mu: Counter = Counter()
    for point, sign in zip(spec.points, spec.signs):
        sigma[point] += 1
        mu[point] += sign
    return tuple(SiteProfile(site, sigma[site], mu[site]) for site in sorted(sigma))


# --- symbolic renormalization ------------------------------------------------


def renorm_terms(sigma: int, mu: int) -> tuple[tuple[int, int, int], ...]:
    """Expanded monomials of the single-site renormalization.

    Returns (a, b, coeff) triples meaning coeff * g^a * conj(g)^b, sorted by
    (a, b).  Coefficients are exact integers; the triple with the top degree
    a + b = sigma always has coefficient 1.
    """
    if sigma < 0 or abs(mu) > sigma or (sigma - abs(mu)) % 2:
        raise ValueError(f"invalid site profile sigma={sigma}, mu={mu}")
    m = (sigma - abs(mu)) // 2
    prefactor = Fraction((-1) ** m * math.factorial(m))
    terms = []
    for i, c in enumerate(laguerre_coefficients(m, abs(mu))):
        full = prefactor * c
        if full == 0:
            continue
        if full.denominator != 1:
            raise ArithmeticError("factorial prefactor failed to clear denominators")
        if mu >= 0:
            terms.append((i + mu, i, int(full)))
        else:
            terms.append((i, i - mu, int(full)))
    return tuple(sorted(terms))


@dataclass(frozen=True)
class SitePolynomial:
    """Integer-coefficient polynomial in (g, conj g) attached to one site."""

    site: LatticePoint
    terms: tuple[tuple[int, int, int], ...]

    def evaluate(self, g: complex) -> complex:
        g = complex(g)
        gc = g.conjugate()
        return sum((c * g ** a * gc ** b for a, b, c in self.terms), complex(0))

    def conjugated(self) -> "SitePolynomial":
        return SitePolynomial(self.site, tuple(sorted((b, a, c) for a, b, c in self.terms)))


@dataclass(frozen=True)
class WickPolynomial:
    """Product over distinct sites of single-site polynomials in (g, conj g)."""

    factors: tuple[SitePolynomial, ...]

    def __post_init__(self) -> None:
        sites = [f.site for f in self.factors]
        if sites != sorted(sites) or len(set(sites)) != len(sites):
            raise ValueError("factors must be sorted by distinct site")

    def evaluate(self, field) -> complex:
        value = complex(1)
        for factor in self.factors:
            value *= factor.evaluate(field_value(field, factor.site))
        return value

    def conjugated(self) -> "WickPolynomial":
        return WickPolynomial(tuple(f.conjugated() for f in self.factors))


def renorm_factor_symbolic(sigma: int, mu: int, site: LatticePoint = (0,)) -> WickPolynomial:
    """Single-site renormalization as a WickPolynomial at ``site``."""
    return WickPolynomial((SitePolynomial(tuple(site), renorm_terms(sigma, mu)),))


def renormalize(spec: ChaosSpec) -> WickPolynomial:
    """Symbolic renormalized product for the whole spec."""
    return WickPolynomial(tuple(
        SitePolynomial(p.site, renorm_terms(p.sigma, p.mu)) for p in site_profiles(spec)
    ))


def wick_expectation(poly: WickPolynomial) -> Fraction:
    """Exact expectation under independent standard complex Gaussians.

    Applies E[g^a conj(g)^b] = delta_ab * a! at each site and multiplies
    across sites.  Pure integer/rational arithmetic, no tolerance anywhere.
    """
    total = Fraction(1)
    for factor in poly.factors:
        site_mean = Fraction(0)
        for a, b, c in factor.terms:
            if a == b:
                site_mean += Fraction(c * math.factorial(a))
        total *= site_mean
    return total


def multiply(p1: WickPolynomial, p2: WickPolynomial) -> WickPolynomial:
    """Product of two site-indexed polynomials (per-site convolution).

    Lets the expectation oracle handle covariances such as E[P * conj(Q)].
    """
    by_site: dict[LatticePoint, dict[tuple[int, int], int]] = {}
    for poly in (p1, p2):
        for factor in poly.factors:
            by_site.setdefault(factor.site, {})
    for site in by_site:
        f1 = _site_terms(p1, site)
        f2 = _site_terms(p2, site)
        acc: dict[tuple[int, int], int] = {}
        for a1, b1, c1 in f1:
            for a2, b2, c2 in f2:
                key = (a1 + a2, b1 + b2)
                acc[key] = acc.get(key, 0) + c1 * c2
        by_site[site] = {k: v for k, v in acc.items() if v != 0}
    factors = tuple(
        SitePolynomial(site, tuple(sorted((a, b, c) for (a, b), c in terms.items())))
        for site, terms in sorted(by_site.items())
    )
    return WickPolynomial(factors)


def _site_terms(poly: WickPolynomial, site: LatticePoint):
    for factor in poly.factors:
        if factor.site == site:
            return factor.terms
    return ((0, 0, 1),)


# --- numeric evaluation -------------------------------------------------------


def field_value(field, site: LatticePoint) -> complex:
    """Fetch the Gaussian value at a site from a mapping, field, or callable."""
    if isinstance(field, Mapping):
        return field[site]
    sample = getattr(field, "sample", None)
    if sample is not None:
        return sample(site)
    return field(site)


def renormalized_product(points: Sequence[LatticePoint], signs: Sequence[Sign], field) -> complex:
    """Numeric value of the renormalized product; the empty product is 1.

    Evaluates each site factor through the Laguerre recurrence at |g|^2, a
    route independent of the expanded integer-coefficient polynomial.
    """
    value = complex(1)
    sigma: Counter = Counter()
    mu: Counter = Counter()
    for point, sign in zip(points, signs):
        sigma[point] += 1
        mu[point] += sign
    for site in sorted(sigma):
        g = complex(field_value(field, site))
        s, m_signed = sigma[site], mu[site]
        m = (s - abs(m_signed)) // 2
        lag = laguerre(m, abs(m_signed), (g * g.conjugate()).real)
        power = g ** m_signed if m_signed >= 0 else g.conjugate() ** (-m_signed)
        value *= (-1) ** m * math.factorial(m) * lag * power
    return value


def renorm_evaluate(spec: ChaosSpec, field) -> complex:
    """Numeric renormalized product for a full spec at a sampled field."""
    return renormalized_product(spec.points, spec.signs, field)


def hermite_renorm_evaluate(points: Sequence[LatticePoint], field) -> float:
    """Real-Gaussian renormalization: product of He_sigma(g_n) over sites."""
    counts = Counter(tuple(p) for p in points)
    value = 1.0
    for site in sorted(counts):
        value *= hermite(counts[site], float(field_value(field, site)))
    return value


def phi_derivative_check(
    spec: ChaosSpec,
    g_field,
    g_tilde_field,
    phi: float,
    step: float = 1e-5,
) -> tuple[complex, complex, float]:
    """Check the derivative identity for the interpolated renormalized product.

    With g(phi) = sin(phi) g + cos(phi) g~ sitewise, the derivative of the
    renormalized product along phi equals the sum over factors j of

        d/dphi [g_{n_j}^{s_j}(phi)] * (renormalized product over the other factors at g(phi)),

    where the sign acts on the interpolated variable as conjugation.  Returns
    (finite-difference lhs, exact-sum rhs, relative error).
    """
    sites = sorted(set(spec.points))
    gv = {p: complex(field_value(g_field, p)) for p in sites}
    tv = {p: complex(field_value(g_tilde_field, p)) for p in sites}

    def at(angle: float) -> dict[LatticePoint, complex]:
        s, c = math.sin(angle), math.cos(angle)
        return {p: s * gv[p] + c * tv[p] for p in sites}

    f_plus = renormalized_product(spec.points, spec.signs, at(phi + step))
    f_minus = renormalized_product(spec.points, spec.signs, at(phi - step))
    lhs = (f_plus - f_minus) / (2 * step)

    mid = at(phi)
    s, c = math.sin(phi), math.cos(phi)
    rhs = complex(0)
    for j in range(spec.k):
        dj = c * gv[spec.points[j]] - s * tv[spec.points[j]]
        if spec.signs[j] < 0:
            dj = dj.conjugate()
        rest_points = spec.points[:j] + spec.points[j + 1:]
        rest_signs = spec.signs[:j] + spec.signs[j + 1:]
        rhs += dj * renormalized_product(rest_points, rest_signs, mid)

    scale = max(abs(lhs), abs(rhs))
    rel = abs(lhs - rhs) / scale if scale > 0 else abs(lhs - rhs)
    return lhs, rhs, rel


# --- serialization -------------------------------------------------------------
#
# Schema: JSON list of {"site": [coords...], "terms": [[a, b, coeff], ...]},
# sites and terms in sorted order for byte-stable golden files.


def wick_to_json(poly: WickPolynomial) -> str:
    doc = [
        {"site": list(f.site), "terms": [list(t) for t in f.terms]}
        for f in poly.factors
    ]
    return json.dumps(doc, separators=(",", ":"))


def wick_from_json(text: str) -> WickPolynomial:
    doc = json.loads(text)
    factors = tuple(
        SitePolynomial(
            tuple(int(c) for c in item["site"]),
            tuple(sorted((int(a), int(b), int(c)) for a, b, c in item["terms"])),
        )
        for item in doc
    )
    return WickPolynomial(tuple(sorted(factors, key=lambda f: f.site)))
