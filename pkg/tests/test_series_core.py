import math
from fractions import Fraction

import pytest
import sympy as sp
from hypothesis import given
from hypothesis import strategies as st

from pertlab.series_core import (
    EXACT,
    FLOAT,
    ModeMismatchError,
    TermGenerator,
    TruncatedSeries,
    abel_sum,
    binomial_series,
    exp_series,
    geometric_series,
    log1p_series,
    radius_estimate,
    series_compose,
    series_derivative,
    series_product,
    sin_series,
)

small_fracs = st.fractions(min_value=-5, max_value=5, max_denominator=7)


def exact_series(order):
    return st.lists(small_fracs, min_size=order + 1, max_size=order + 1).map(TruncatedSeries.exact)


def float_series(order):
    return st.lists(
        st.floats(min_value=-3, max_value=3, allow_nan=False), min_size=order + 1, max_size=order + 1
    ).map(TruncatedSeries.floating)


def sympy_coeffs(expr, x, K):
    ser = sp.series(expr, x, 0, K + 1).removeO()
    return [Fraction(str(sp.nsimplify(ser.coeff(x, k)))) for k in range(K + 1)]


# product ----------------------------------------------------------------------


def test_product_difference_of_squares():
    a = TruncatedSeries.exact([1, 1, 0])
    b = TruncatedSeries.exact([1, -1, 0])
    assert series_product(a, b).coefficients == (1, 0, -1)


def test_product_telescopes():
    out = series_product(geometric_series(3), TruncatedSeries.exact([1, -1, 0, 0]))
    assert out.coefficients == (1, 0, 0, 0)


def test_sin_squared_matches_symbolic():
    x = sp.symbols("x")
    s = sin_series(5)
    assert (s * s).coefficients == tuple(sympy_coeffs(sp.sin(x) ** 2, x, 5))
    assert (s * s).coefficients[:5] == (0, 0, 1, 0, Fraction(-1, 3))


def test_product_truncates_to_shorter_order():
    a = TruncatedSeries.exact([1, 2, 3, 4])
    b = TruncatedSeries.exact([1, 1])
    assert series_product(a, b).order == 1


def test_mode_mismatch_raises():
    with pytest.raises(ModeMismatchError):
        series_product(TruncatedSeries.exact([1, 1]), TruncatedSeries.floating([1.0, 1.0]))


def test_exact_rejects_floats_without_cast():
    with pytest.raises(TypeError):
        TruncatedSeries.exact([0.5, 1])
    assert TruncatedSeries.floating([0.5, 1.0]).to_exact().coefficients == (Fraction(1, 2), 1)


@given(exact_series(6), exact_series(6), exact_series(6))
def test_product_commutative_associative_exact(a, b, c):
    assert series_product(a, b) == series_product(b, a)
    assert series_product(series_product(a, b), c) == series_product(a, series_product(b, c))


@given(float_series(6), float_series(6), float_series(6))
def test_product_commutative_associative_float(a, b, c):
    ab, ba = series_product(a, b), series_product(b, a)
    left = series_product(ab, c)
    right = series_product(a, series_product(b, c))
    scale = max(1.0, max(abs(v) for v in left.coefficients))
    assert all(math.isclose(x, y, rel_tol=1e-12, abs_tol=1e-12 * scale) for x, y in zip(ab.coefficients, ba.coefficients))
    assert all(abs(x - y) <= 1e-12 * scale for x, y in zip(left.coefficients, right.coefficients))


# composition ------------------------------------------------------------------------


def test_compose_identity_outer():
    s = TruncatedSeries.exact([0, 2, 3, 5])
    assert series_compose(TruncatedSeries.variable(3), s) == s


def test_compose_square():
    outer = TruncatedSeries.exact([0, 0, 1, 0])
    inner = TruncatedSeries.exact([0, 1, 1, 0])
    assert series_compose(outer, inner).coefficients == (0, 0, 1, 2)


def test_exp_of_log1p():
    out = series_compose(exp_series(6), log1p_series(6))
    assert out.coefficients == (1, 1, 0, 0, 0, 0, 0)


def test_compose_rejects_constant_inner():
    with pytest.raises(ValueError):
        series_compose(exp_series(3), TruncatedSeries.exact([1, 1, 0, 0]))


@given(exact_series(5), exact_series(5))
def test_compose_with_variable_is_identity(outer, inner):
    inner = TruncatedSeries.exact((0,) + inner.coefficients[1:])
    x = TruncatedSeries.variable(5)
    assert series_compose(outer, x) == outer
    assert series_compose(x, inner) == inner


@given(exact_series(4), exact_series(4))
def test_compose_matches_symbolic(outer, inner):
    inner = TruncatedSeries.exact((0,) + inner.coefficients[1:])
    x = sp.symbols("x")
    po = sum(sp.Rational(c.numerator, c.denominator) * x**k for k, c in enumerate(outer.coefficients))
    pi = sum(sp.Rational(c.numerator, c.denominator) * x**k for k, c in enumerate(inner.coefficients))
    expect = sp.Poly(sp.expand(po.subs(x, pi)), x)
    got = series_compose(outer, inner)
    for k in range(5):
        assert got[k] == Fraction(str(expect.coeff_monomial(x**k)))


# derivative --------------------------------------------------------------------------


def test_derivative_examples():
    assert series_derivative(TruncatedSeries.exact([5, 0])).coefficients == (0,)
    assert series_derivative(TruncatedSeries.exact([0, 0, 0, 1])).coefficients == (0, 0, 3)
    with pytest.raises(ValueError):
        series_derivative(TruncatedSeries.exact([1]))


def test_catalan_generating_function_derivative():
    # C(x) = (1 - sqrt(1 - 4x)) / (2x); compare with finite differences of the closed form
    cat = TruncatedSeries.exact([math.comb(2 * n, n) // (n + 1) for n in range(6)])
    d = series_derivative(cat)
    x = sp.symbols("x")
    closed = (1 - sp.sqrt(1 - 4 * x)) / (2 * x)
    expect = sympy_coeffs(sp.diff(closed, x), x, 4)
    assert d.coefficients == tuple(expect)
    h = 1e-5
    C = lambda t: (1 - math.sqrt(1 - 4 * t)) / (2 * t)
    fd = (C(0.01 + h) - C(0.01 - h)) / (2 * h)
    assert abs(d.to_float()(0.01) - fd) < 1e-4


def test_standard_series_match_sympy():
    x = sp.symbols("x")
    assert exp_series(8).coefficients == tuple(sympy_coeffs(sp.exp(x), x, 8))
    assert log1p_series(8).coefficients == tuple(sympy_coeffs(sp.log(1 + x), x, 8))
    assert binomial_series(Fraction(1, 2), 8).coefficients == tuple(sympy_coeffs(sp.sqrt(1 + x), x, 8))


@given(exact_series(5))
def test_reciprocal_inverts(a):
    if a[0] == 0:
        a = TruncatedSeries.exact((1,) + a.coefficients[1:])
    one = a * a.reciprocal()
    assert one == TruncatedSeries.constant(1, 5)


def test_json_round_trip():
    s = TruncatedSeries.exact([Fraction(1, 3), -2, 0])
    data = s.to_json()
    assert data == {"mode": EXACT, "order": 2, "coefficients": ["1/3", "-2/1", "0/1"]}
    assert TruncatedSeries.from_json(data) == s
    f = TruncatedSeries.floating([0.5, 1.5])
    assert TruncatedSeries.from_json(f.to_json()) == f
    assert f.mode == FLOAT


# Abel summation -------------------------------------------------------------------------


@pytest.mark.parametrize("x", [math.pi / 3, math.pi / 2, 2 * math.pi / 3])
def test_abel_cosine_sum(x):
    r = abel_sum(TermGenerator(lambda n: math.cos(n * x), start=1))
    assert abs(r.value + 0.5) < 1e-3
    assert r.extrapolated


def test_abel_grandi():
    r = abel_sum(lambda n: (-1.0) ** n)
    assert abs(r.value - 0.5) < 1e-6
    assert abs(r.cesaro_mean - 0.5) < 1e-3


def test_abel_convergent_geometric():
    r = abel_sum(lambda n: 2.0**-n)
    assert abs(r.value - 2.0) < 1e-9


def test_abel_divergence_flagged_not_raised():
    # 1.05 r > 1 for r >= 0.98; those radii are flagged and left out
    r = abel_sum(lambda n: 1.05**n)
    assert 0.9 not in r.divergent_at
    assert {0.98, 0.99, 0.995} <= set(r.divergent_at)
    assert math.isfinite(r.sums[0])


def test_abel_grid_validation():
    with pytest.raises(ValueError):
        abel_sum(lambda n: 1.0, r_grid=(0.99, 0.9))
    with pytest.raises(ValueError):
        abel_sum(lambda n: 1.0, r_grid=(0.5, 1.0))


def test_term_generator_deterministic():
    g = TermGenerator(lambda n: math.sin(n) ** 2)
    assert [g(n) for n in range(20)] == [g(n) for n in range(20)]


@given(st.floats(min_value=-0.9, max_value=0.9), st.floats(min_value=-2, max_value=2))
def test_abel_of_convergent_series_is_direct_sum(q, a):
    r = abel_sum(lambda n: a * q**n)
    assert abs(r.value - a / (1 - q)) <= 1e-9 * max(1.0, abs(a / (1 - q)))


# radius --------------------------------------------------------------------------------


def test_radius_geometric():
    assert abs(radius_estimate(geometric_series(30, mode=FLOAT)).radius - 1.0) < 1e-9
    assert abs(radius_estimate(geometric_series(30, 2, FLOAT)).radius - 0.5) < 1e-9


def test_radius_needs_order_eight():
    with pytest.raises(ValueError):
        radius_estimate(geometric_series(5, mode=FLOAT))


def test_radius_interleaved_zeros_and_irregular():
    # sum x^{2k} / 3^k has radius sqrt(3) and every odd coefficient zero
    s = TruncatedSeries.floating([3.0 ** (-(k // 2)) if k % 2 == 0 else 0.0 for k in range(31)])
    est = radius_estimate(s)
    assert est.stride == 2
    assert abs(est.radius - math.sqrt(3)) < 1e-6
    irregular = TruncatedSeries.floating([0.0 if k in (17, 20, 21, 26) else 0.5**k for k in range(31)])
    est = radius_estimate(irregular)
    assert "irregular-zeros-root-test-only" in est.flags
    assert abs(est.radius - 2.0) < 0.05


@given(st.floats(min_value=0.2, max_value=5.0), st.integers(min_value=20, max_value=40))
def test_radius_recovers_inverse_ratio(c, K):
    s = TruncatedSeries.floating([c**k for k in range(K + 1)])
    assert abs(radius_estimate(s).radius * c - 1) < 0.02


@given(st.floats(min_value=0.3, max_value=3.0), st.integers(min_value=-3, max_value=3))
def test_radius_with_algebraic_prefactor(c, g):
    s = TruncatedSeries.floating([(k + 1.0) ** g * c**k for k in range(41)])
    assert abs(radius_estimate(s).radius * c - 1) < 0.02
