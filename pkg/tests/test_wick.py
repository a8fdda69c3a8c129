import json
import math
from fractions import Fraction

import numpy as np
import pytest
import sympy
from hypothesis import given, settings
from hypothesis import strategies as st

from randtensor.wick import (
    ChaosSpec,
    chaos_spec,
    hermite,
    hermite_renorm_evaluate,
    laguerre,
    laguerre_coefficients,
    multiply,
    phi_derivative_check,
    renorm_evaluate,
    renorm_factor_symbolic,
    renorm_terms,
    renormalize,
    renormalized_product,
    site_profiles,
    wick_expectation,
    wick_from_json,
    wick_to_json,
)


def _single_term_poly(a: int, b: int):
    """The bare monomial g^a gbar^b at site (0,) as a WickPolynomial."""
    from randtensor.wick import SitePolynomial, WickPolynomial

    return WickPolynomial((SitePolynomial((0,), ((a, b, 1),)),))


def test_laguerre_recurrence_matches_scipy():
    from scipy.special import eval_genlaguerre

    for q in range(6):
        for alpha in range(4):
            for x in (0.0, 0.5, 1.7, 3.25):
                assert laguerre(q, alpha, x) == pytest.approx(
                    eval_genlaguerre(q, alpha, x), rel=1e-12, abs=1e-12)


def test_laguerre_coefficients_match_sympy():
    x = sympy.symbols("x")
    for q in range(6):
        for alpha in range(4):
            poly = sympy.Poly(sympy.assoc_laguerre(q, alpha, x), x)
            want = [Fraction(str(c)) for c in reversed(poly.all_coeffs())]
            got = list(laguerre_coefficients(q, alpha))
            assert got == want


def test_laguerre_coefficients_are_exact_fractions():
    coeffs = laguerre_coefficients(4, 2)
    assert all(isinstance(c, Fraction) for c in coeffs)
    # recurrence route at a rational point agrees exactly
    xq = Fraction(3, 7)
    direct = sum(c * xq ** i for i, c in enumerate(coeffs))
    assert laguerre(4, 2, xq) == direct


def test_hermite_matches_sympy_probabilists():
    x = sympy.symbols("x")
    for n in range(7):
        expr = sympy.hermite_prob(n, x)
        for point in (Fraction(0), Fraction(1, 2), Fraction(-3, 4)):
            want = Fraction(str(expr.subs(x, sympy.Rational(point.numerator,
                                                            point.denominator))))
            assert hermite(n, point) == want


def test_renorm_terms_pinned_values():
    assert renorm_terms(4, 4) == ((4, 0, 1),)
    assert renorm_terms(4, 2) == ((2, 0, -3), (3, 1, 1))
    assert renorm_terms(4, 0) == ((0, 0, 2), (1, 1, -4), (2, 2, 1))
    assert renorm_terms(2, 0) == ((0, 0, -1), (1, 1, 1))
    assert renorm_terms(3, -1) == ((0, 1, -2), (1, 2, 1))


def test_renorm_terms_monic_and_integer():
    for sigma in range(7):
        for mu in range(-sigma, sigma + 1):
            if (sigma - abs(mu)) % 2:
                continue
            terms = renorm_terms(sigma, mu)
            assert all(isinstance(c, int) for _, _, c in terms)
            top = max(terms, key=lambda t: t[0] + t[1])
            assert top[0] + top[1] == sigma and top[2] == 1
            # signed degree matches mu on every term
            assert all(a - b == mu for a, b, _ in terms)


def test_renorm_terms_rejects_bad_profiles():
    with pytest.raises(ValueError):
        renorm_terms(3, 0)  # parity mismatch
    with pytest.raises(ValueError):
        renorm_terms(2, 4)  # |mu| > sigma
    with pytest.raises(ValueError):
        renorm_terms(-1, 1)


def test_symbolic_factor_equals_laguerre_formula():
    rng = np.random.default_rng(2)
    for sigma, mu in ((2, 0), (4, 2), (5, 3), (4, 0), (3, -1), (6, -2)):
        m = (sigma - abs(mu)) // 2
        poly = renorm_factor_symbolic(sigma, mu)
        for _ in range(5):
            g = complex(rng.standard_normal(), rng.standard_normal())
            gm = g ** mu if mu >= 0 else np.conj(g) ** (-mu)
            direct = (-1) ** m * math.factorial(m) * laguerre(m, abs(mu), abs(g) ** 2) * gm
            assert poly.evaluate({(0,): g}) == pytest.approx(direct, rel=1e-12)


def test_wick_expectation_monomials():
    for a in range(5):
        for b in range(5):
            got = wick_expectation(_single_term_poly(a, b))
            want = Fraction(math.factorial(a)) if a == b else Fraction(0)
            assert got == want


def test_zero_mean_examples_exact():
    cases = [
        chaos_spec([(0,), (0,)], [1, -1]),               # pairing
        chaos_spec([(0,), (0,), (0,), (0,)], [1, 1, -1, -1]),
        chaos_spec([(0,), (1,), (0,)], [1, 1, -1]),       # collision + free site
        chaos_spec([(2,), (5,)], [1, 1]),                 # distinct sites
    ]
    for spec in cases:
        assert wick_expectation(renormalize(spec)) == Fraction(0)


def test_multiply_expectation_pairing_variance():
    spec = chaos_spec([(0,), (0,)], [1, -1])
    poly = renormalize(spec)  # g gbar - 1
    sq = multiply(poly, poly)
    # E[(|g|^2 - 1)^2] = Var(Exp(1)) = 1
    assert wick_expectation(sq) == Fraction(1)


def test_multiply_cross_site_independence():
    p1 = renormalize(chaos_spec([(0,), (0,)], [1, -1]))
    p2 = renormalize(chaos_spec([(3,), (3,)], [1, -1]))
    both = multiply(p1, p2)
    assert wick_expectation(both) == Fraction(0)
    assert wick_expectation(multiply(both, both)) == Fraction(1)


def test_conjugated_evaluation():
    rng = np.random.default_rng(9)
    poly = renormalize(chaos_spec([(0,), (0,), (1,)], [1, 1, -1]))
    for _ in range(5):
        field = {(0,): complex(*rng.standard_normal(2)),
                 (1,): complex(*rng.standard_normal(2))}
        value = poly.evaluate(field)
        conj_value = poly.conjugated().evaluate(field)
        assert conj_value == pytest.approx(np.conj(value), rel=1e-12)


def test_numeric_route_equals_symbolic_route():
    rng = np.random.default_rng(4)
    specs = [
        ([(0,), (0,)], [1, -1]),
        ([(0,), (1,), (2,)], [1, -1, 1]),
        ([(0,), (0,), (0,)], [1, 1, 1]),
        ([(1,), (1,), (2,), (2,)], [1, -1, -1, 1]),
    ]
    for points, signs in specs:
        spec = chaos_spec(points, signs)
        for _ in range(5):
            field = {pt: complex(*rng.standard_normal(2)) for pt in set(points)}
            numeric = renormalized_product(points, signs, field)
            symbolic = renorm_evaluate(spec, field)
            assert numeric == pytest.approx(symbolic, rel=1e-10)


def test_empty_product_is_one():
    assert renormalized_product([], [], {}) == 1


def test_hermite_route_real_case():
    field = {(0,): 1.3, (1,): -0.7}
    # distinct sites: product of the values themselves
    assert hermite_renorm_evaluate([(0,), (1,)], field) == pytest.approx(1.3 * -0.7)
    # triple collision: probabilists' Hermite H_3(x) = x^3 - 3x
    x = 1.3
    assert hermite_renorm_evaluate([(0,), (0,), (0,)], field) == pytest.approx(
        x ** 3 - 3 * x)


def test_site_profiles_from_spec():
    spec = chaos_spec([(0,), (5,), (0,), (0,)], [1, -1, -1, -1])
    profiles = site_profiles(spec)
    by_site = {p.site: (p.sigma, p.mu) for p in profiles}
    assert by_site == {(0,): (3, -1), (5,): (1, -1)}


def test_chaos_spec_validation():
    with pytest.raises(ValueError):
        ChaosSpec(points=(), signs=())
    with pytest.raises(ValueError):
        chaos_spec([(0,)], [2])
    with pytest.raises(ValueError):
        chaos_spec([(0,), (1,)], [1])


def test_phi_derivative_single_case():
    rng = np.random.default_rng(101)
    g = {(0,): complex(*rng.standard_normal(2)),
         (1,): complex(*rng.standard_normal(2))}
    gt = {(0,): complex(*rng.standard_normal(2)),
          (1,): complex(*rng.standard_normal(2))}
    lhs, rhs, rel = phi_derivative_check(
        chaos_spec([(0,), (0,), (1,)], [1, -1, 1]), g, gt, phi=0.37)
    assert rel <= 1e-6


def test_wick_json_round_trip():
    poly = renormalize(chaos_spec([(0,), (0,), (4,)], [1, -1, -1]))
    text = wick_to_json(poly)
    doc = json.loads(text)
    assert isinstance(doc, list)
    assert set(doc[0]) == {"site", "terms"}
    back = wick_from_json(text)
    assert back == poly


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 4), st.data())
def test_zero_mean_property(k, data):
    sites = data.draw(st.lists(st.integers(0, 2), min_size=k, max_size=k))
    signs = data.draw(st.lists(st.sampled_from((1, -1)), min_size=k, max_size=k))
    spec = chaos_spec([(s,) for s in sites], signs)
    assert wick_expectation(renormalize(spec)) == Fraction(0)
