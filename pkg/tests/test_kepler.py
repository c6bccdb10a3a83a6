import math
from fractions import Fraction

import mpmath
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pertlab import kepler
from pertlab.series_core import TruncatedSeries, radius_estimate

R_STAR = 0.66274341934918158


def frac(s):
    return Fraction(s)


# Newton oracle -------------------------------------------------------------------------------


def test_newton_examples():
    assert kepler.newton_solve(0.0, 1.3) == 1.3
    assert kepler.newton_solve(0.7, 0.0) == 0.0
    xi = kepler.newton_solve(0.5, 1.0)
    assert abs(kepler.kepler_residual(0.5, 1.0, xi)) <= 1e-14
    # bisection cross-check
    lo, hi = 0.5, 1.5
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if mid - 0.5 * math.sin(mid) < 1.0 else (lo, mid)
    assert abs(xi - lo) < 1e-14


def test_newton_against_frozen_points(oracles):
    for row in oracles["kepler_points"]:
        e, l = float(row["e"]), float(row["l"])
        assert abs(kepler.newton_solve(e, l) - float(row["xi"])) < 1e-13


def test_newton_high_precision(oracles):
    with mpmath.workdps(40):
        for row in oracles["kepler_points"][::5]:
            xi = kepler.newton_solve(mpmath.mpf(row["e"]), mpmath.mpf(row["l"]), tol=mpmath.mpf("1e-35"))
            assert abs(xi - mpmath.mpf(row["xi"])) < mpmath.mpf("1e-28")


def test_newton_rejects_bad_eccentricity():
    for e in (-0.1, 1.0, 1.5):
        with pytest.raises(ValueError):
            kepler.newton_solve(e, 1.0)


@given(st.floats(0, 0.99), st.floats(0, 2 * math.pi))
def test_newton_residual_property(e, l):
    xi = kepler.newton_solve(e, l)
    assert abs(kepler.kepler_residual(e, l, xi)) <= 1e-14


# exact coefficients ---------------------------------------------------------------------------


def test_coefficient_examples():
    c = kepler.series_coefficients(3)
    assert c[0] == kepler.TrigPolynomial.sine(1)
    assert c[1] == kepler.TrigPolynomial.sine(2, Fraction(1, 2))
    assert c[2] == kepler.TrigPolynomial(sin={3: Fraction(3, 8), 1: Fraction(-1, 8)})


def test_coefficients_match_symbolic(oracles):
    ref = oracles["kepler_sine_coefficients"]
    for k, poly in enumerate(kepler.series_coefficients(8), start=1):
        assert not poly.cos
        assert poly.sin == {int(n): frac(v) for n, v in ref[str(k)].items()}


@given(st.integers(1, 30))
def test_coefficient_parity(k):
    poly = kepler.series_coefficients(k)[-1]
    assert not poly.cos
    assert poly.harmonics() and all(n % 2 == k % 2 and 1 <= n <= k for n in poly.harmonics())
    assert max(poly.harmonics()) == k


def test_series_coefficients_guard():
    assert kepler.series_coefficients(0) == []
    with pytest.raises(ValueError):
        kepler.series_coefficients(-1)


# Lagrange series --------------------------------------------------------------------------------


def test_lagrange_examples():
    assert kepler.lagrange_series(0.0, 2.0, 15).value == 2.0
    l = math.pi / 2
    r = kepler.lagrange_series(0.3, l, 20)
    assert abs(r.value - kepler.newton_solve(0.3, l)) <= 10 * (0.3 / 0.6627) ** 21
    assert not r.divergent and len(r.terms) == 20
    bad = kepler.lagrange_series(0.9, l, 20)
    assert bad.divergent


@pytest.mark.parametrize("e", [0.2, 0.4, 0.6])
def test_lagrange_error_decreases_with_order(e):
    ls = np.linspace(0, 2 * math.pi, 64, endpoint=False)
    ref = [kepler.newton_solve(e, l) for l in ls]
    errs = [max(abs(kepler.lagrange_series(e, l, K).value - x) for l, x in zip(ls, ref)) for K in range(2, 18, 3)]
    assert all(b < a for a, b in zip(errs, errs[1:]))


@pytest.mark.parametrize("l", [math.pi / 2, 3 * math.pi / 2])
def test_radius_of_coefficients_is_laplace_limit(l):
    # the nearest singularity in e reaches the Laplace limit only at these two angles
    coeffs = [0.0] + kepler.coefficient_values(l, 40)
    est = radius_estimate(TruncatedSeries.floating(coeffs))
    assert abs(est.radius / R_STAR - 1) < 0.02


# Bessel -------------------------------------------------------------------------------------------


def test_bessel_against_scipy(oracles):
    for row in oracles["bessel"]:
        ref = float(row["J"])
        got = kepler.bessel_j(row["n"], row["x"])
        assert abs(got - ref) <= 1e-12 * abs(ref) + 1e-300, row


def test_bessel_guards():
    assert kepler.bessel_j(0, 0.0) == 1.0 and kepler.bessel_j(3, 0.0) == 0.0
    with pytest.raises(ValueError):
        kepler.bessel_j(-1, 1.0)


def test_bessel_series_examples():
    assert kepler.bessel_series(0.0, 1.2, 10) == 1.2
    assert abs(kepler.bessel_series(0.5, 1.0, 50) - kepler.newton_solve(0.5, 1.0)) <= 1e-8
    assert abs(kepler.bessel_series(0.9, 2.0, 200) - kepler.newton_solve(0.9, 2.0)) <= 1e-4


def block_maxima(errors, width):
    return [max(errors[i:i + width]) for i in range(0, len(errors) - width + 1, width)]


def decreasing_above_floor(blocks, floor=1e-13):
    """Successive block maxima decrease until round-off is reached; the first block is burn-in."""
    live = blocks[1:]
    cut = next((i for i, b in enumerate(live) if b < floor), len(live))
    return all(b < a for a, b in zip(live[:cut], live[1:cut + 1])) and all(b < floor for b in live[cut:])


@pytest.mark.parametrize("e", [0.3, 0.6, 0.8, 0.9])
def test_bessel_converges_after_burn_in(e):
    l = 1.0
    ref = kepler.newton_solve(e, l)
    terms = [2.0 / n * kepler.bessel_j(n, n * e) * math.sin(n * l) for n in range(1, 201)]
    errs = [abs(l + math.fsum(terms[:N]) - ref) for N in range(1, 201)]
    assert decreasing_above_floor(block_maxima(errs, 20))


# Laplace limit and eta ----------------------------------------------------------------------------


def test_laplace_limit(oracles):
    assert kepler.laplace_function(0.5) < 1 < kepler.laplace_function(1.0)
    r = kepler.laplace_limit(1e-7)
    assert abs(r - 0.6627434) < 1e-6
    assert abs(r - float(oracles["laplace_limit"])) < 1e-15
    assert abs(kepler.eta_modulus_imaginary(r) - 1) < 1e-12
    with pytest.raises(ValueError):
        kepler.laplace_limit(0)


def test_eta_map_examples():
    assert kepler.eta_map(0.0) == 0.0
    assert abs(kepler.eta_map(0.5) - 0.6370) < 1e-4
    assert abs(kepler.eta_map(1 - 1e-12) - 1) < 1e-5
    with pytest.raises(ValueError):
        kepler.eta_map(1.0)


def test_eta_map_monotone_and_bounded():
    grid = np.linspace(0, 1, 1024, endpoint=False)
    vals = np.array([kepler.eta_map(e) for e in grid])
    assert np.all(np.diff(vals) > 0) and np.all(vals < 1)


def test_eta_taylor_series(oracles):
    s = kepler.eta_series(12)
    ref = [float(v) for v in oracles["eta_taylor"]]
    assert all(abs(a - b) < 1e-14 * max(1, abs(b)) for a, b in zip(s.coefficients, ref))


def test_inverse_eta_composes_to_identity():
    inv = kepler.inverse_eta_series(15)
    comp = kepler.eta_series(15).compose(inv)
    assert abs(comp[1] - 1) < 1e-13
    assert max(abs(c) for c in comp.coefficients[2:]) < 1e-10


def test_eta_resummation_examples():
    assert kepler.eta_resummed_series(0.0, 0.7, 20).value == 0.7
    e, l = 0.8, 1.0
    ref = kepler.newton_solve(e, l)
    eta = abs(kepler.eta_resummed_series(e, l, 40).value - ref)
    raw = abs(kepler.lagrange_series(e, l, 40).value - ref)
    assert eta < raw
    a = kepler.eta_resummed_series(0.3, 2.0, 30).value
    b = kepler.lagrange_series(0.3, 2.0, 30).value
    assert abs(a - b) < 1e-10


@pytest.mark.parametrize("e", [0.3, 0.6, 0.8, 0.9])
def test_eta_converges_after_burn_in(e):
    # the error oscillates under a decaying envelope: compare maxima over successive windows
    l = 1.0
    ref = kepler.newton_solve(e, l)
    terms = kepler.eta_resummed_series(e, l, 80).terms
    errs = [abs(l + math.fsum(terms[:K]) - ref) for K in range(1, 81)]
    assert decreasing_above_floor(block_maxima(errs, 10))


# true anomaly -------------------------------------------------------------------------------------


def test_true_anomaly_examples():
    assert kepler.true_anomaly_series(0.0, 1.1, 10) == 1.1
    u = kepler.true_anomaly_series(0.2, 1.0, 12)
    assert abs(u - kepler.true_anomaly_exact(0.2, 1.0)) < 1e-8
    for e in (0.1, 0.5):
        assert abs(kepler.true_anomaly_series(e, math.pi, 12) - math.pi) < 1e-12


def test_true_anomaly_exact_against_frozen(oracles):
    for row in oracles["kepler_points"]:
        e, l = float(row["e"]), float(row["l"])
        assert abs(kepler.true_anomaly_exact(e, l) - float(row["u"])) < 1e-11


def test_true_anomaly_exact_is_continuous_and_increasing():
    ls = np.linspace(0, 2 * math.pi, 513)[:-1]
    for e in (0.3, 0.9):
        u = np.array([kepler.true_anomaly_exact(e, l) for l in ls])
        assert np.all(np.diff(u) > 0)
        assert u[0] == 0 and u[-1] < 2 * math.pi


def test_true_anomaly_first_orders():
    # u = l + 2e sin l + (5/4) e^2 sin 2l + ...
    c = kepler.true_anomaly_coefficients(2)
    assert c[0] == kepler.TrigPolynomial.sine(1, Fraction(2))
    assert c[1] == kepler.TrigPolynomial.sine(2, Fraction(5, 4))


# comparison table ------------------------------------------------------------------------------


def test_compare_methods_rows():
    rows = kepler.compare_methods(0.5, 1.0, K=20, N=100, K_eta=40)
    assert [r["method"] for r in rows] == ["newton", "lagrange", "bessel", "eta"]
    err = {r["method"]: r["abs_error_vs_newton"] for r in rows}
    assert err["newton"] == 0 and err["bessel"] < 1e-12 and err["eta"] < 1e-9
    assert err["lagrange"] <= 10 * (0.5 / 0.6627) ** 21
    assert all(set(r) == {"method", "order", "value", "abs_error_vs_newton", "flag"} for r in rows)
