"""Kepler's equation ``l = xi - e sin(xi)`` and its series solutions.

Eccentric anomaly ``xi`` as a function of mean anomaly ``l`` and eccentricity ``e``:

* :func:`newton_solve` -- safeguarded Newton iteration, the reference oracle;
* :func:`lagrange_series` -- powers of ``e`` with exact trigonometric coefficients
  ``(1/k!) d^{k-1}(sin^k l)``, convergent only for ``e`` below the Laplace limit;
* :func:`bessel_series` -- ``l + sum (2/n) J_n(n e) sin(n l)``;
* :func:`eta_resummed_series` -- the ``e``-series re-expanded in
  ``eta = e exp(sqrt(1-e^2)) / (1 + sqrt(1-e^2))``, convergent for every ``e < 1``.

Functions that evaluate at a point accept floats or :mod:`mpmath` numbers; with
``mpf`` input the whole evaluation runs at the current ``mpmath.mp.dps``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import mpmath

from .inversion import FunctionJet, invert_series
from .series_core import FLOAT, TruncatedSeries, binomial_series, exp_series, radius_estimate


class KeplerConvergenceError(RuntimeError):
    pass


def _lib(*xs):
    return mpmath if any(isinstance(x, (mpmath.mpf, mpmath.mpc)) for x in xs) else math


def _num(c: Fraction, lib):
    if lib is mpmath:
        return mpmath.mpf(c.numerator) / c.denominator
    return c.numerator / c.denominator


def _check_e(e):
    if not 0 <= e < 1:
        raise ValueError(f"eccentricity must lie in [0, 1), got {e}")


# oracle ------------------------------------------------------------------------------


def kepler_residual(e, l, xi):
    lib = _lib(e, l, xi)
    return xi - e * lib.sin(xi) - l


def newton_solve(e, l, tol=1e-14, max_iter: int = 64):
    """Eccentric anomaly by Newton's method started at ``l + e sin l``.

    Steps leaving the bracket ``[l - e, l + e]`` are replaced by bisection.
    """
    _check_e(e)
    lib = _lib(e, l)
    if e == 0:
        return l
    lo, hi = l - e, l + e
    xi = l + e * lib.sin(l)
    for _ in range(max_iter):
        f = xi - e * lib.sin(xi) - l
        if abs(f) <= tol:
            return xi
        if f > 0:
            hi = xi
        else:
            lo = xi
        step = f / (1 - e * lib.cos(xi))
        new = xi - step
        if not lo <= new <= hi:
            new = (lo + hi) / 2
        if new == xi:
            raise KeplerConvergenceError(
                f"Newton stalled at residual {float(abs(f)):.3e} > tol {float(tol):.1e}"
            )
        xi = new
    raise KeplerConvergenceError(f"no convergence in {max_iter} iterations (e={e}, l={l})")


# trigonometric polynomials ---------------------------------------------------------------


@dataclass(frozen=True)
class TrigPolynomial:
    """``sum_n cos_n cos(n l) + sin_n sin(n l)`` with finitely many terms, ``n >= 0``."""

    sin: dict = field(default_factory=dict)
    cos: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "sin", {n: c for n, c in self.sin.items() if c != 0 and n != 0})
        object.__setattr__(self, "cos", {n: c for n, c in self.cos.items() if c != 0})
        if any(n < 0 for n in list(self.sin) + list(self.cos)):
            raise ValueError("harmonic indices must be non-negative")

    @classmethod
    def one(cls) -> "TrigPolynomial":
        return cls(cos={0: Fraction(1)})

    @classmethod
    def sine(cls, n: int, c=Fraction(1)) -> "TrigPolynomial":
        return cls(sin={n: c})

    @classmethod
    def cosine(cls, n: int, c=Fraction(1)) -> "TrigPolynomial":
        return cls(cos={n: c})

    def harmonics(self) -> set:
        return set(self.sin) | set(self.cos)

    def is_zero(self) -> bool:
        return not self.sin and not self.cos

    def __add__(self, other: "TrigPolynomial") -> "TrigPolynomial":
        s, c = dict(self.sin), dict(self.cos)
        for n, v in other.sin.items():
            s[n] = s.get(n, 0) + v
        for n, v in other.cos.items():
            c[n] = c.get(n, 0) + v
        return TrigPolynomial(s, c)

    def scale(self, a) -> "TrigPolynomial":
        return TrigPolynomial(
            {n: v * a for n, v in self.sin.items()}, {n: v * a for n, v in self.cos.items()}
        )

    def __mul__(self, other):
        if not isinstance(other, TrigPolynomial):
            return self.scale(other)
        s: dict = {}
        c: dict = {}

        def add(d, n, v):
            # fold negative harmonics: cos(-n) = cos n, sin(-n) = -sin n
            if d is s and n < 0:
                n, v = -n, -v
            elif n < 0:
                n = -n
            d[n] = d.get(n, 0) + v

        for a, x in self.cos.items():
            for b, y in other.cos.items():
                add(c, a - b, x * y / 2)
                add(c, a + b, x * y / 2)
            for b, y in other.sin.items():
                add(s, b + a, x * y / 2)
                add(s, b - a, x * y / 2)
        for a, x in self.sin.items():
            for b, y in other.sin.items():
                add(c, a - b, x * y / 2)
                add(c, a + b, -x * y / 2)
            for b, y in other.cos.items():
                add(s, a + b, x * y / 2)
                add(s, a - b, x * y / 2)
        return TrigPolynomial(s, c)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "TrigPolynomial":
        out = TrigPolynomial.one()
        for _ in range(k):
            out = out * self
        return out

    def derivative(self, times: int = 1) -> "TrigPolynomial":
        p = self
        for _ in range(times):
            p = TrigPolynomial(
                {n: -n * v for n, v in p.cos.items()}, {n: n * v for n, v in p.sin.items()}
            )
        return p

    def antiderivative(self) -> "TrigPolynomial":
        """Zero-mean antiderivative; the constant term must vanish."""
        if self.cos.get(0, 0) != 0:
            raise ValueError("secular term: constant part has no periodic antiderivative")
        return TrigPolynomial(
            {n: Fraction(v) / n for n, v in self.cos.items() if n},
            {n: -Fraction(v) / n for n, v in self.sin.items()},
        )

    def __call__(self, l):
        lib = _lib(l)
        out = 0
        for n in sorted(self.cos):
            out += _num(Fraction(self.cos[n]), lib) * lib.cos(n * l)
        for n in sorted(self.sin):
            out += _num(Fraction(self.sin[n]), lib) * lib.sin(n * l)
        return out

    def __eq__(self, other):
        if not isinstance(other, TrigPolynomial):
            return NotImplemented
        return self.sin == other.sin and self.cos == other.cos

    def __hash__(self):
        return hash((tuple(sorted(self.sin.items())), tuple(sorted(self.cos.items()))))


@lru_cache(maxsize=None)
def _order_coefficient(k: int) -> TrigPolynomial:
    # sin^k l = (2i)^{-k} sum_j C(k,j) (-1)^j e^{i(k-2j)l}; differentiate k-1 times
    # term by term and pair j with k-j, which leaves only sines of n = k-2j > 0.
    sin = {}
    for j in range((k + 1) // 2):
        n = k - 2 * j
        sin[n] = Fraction((-1) ** j * math.comb(k, j) * n ** (k - 1), 2 ** (k - 1) * math.factorial(k))
    return TrigPolynomial(sin=sin)


def series_coefficients(K: int) -> list:
    """``[(1/k!) d^{k-1}(sin^k l) for k = 1..K]`` as exact trigonometric polynomials."""
    if K < 0:
        raise ValueError("K must be non-negative")
    return [_order_coefficient(k) for k in range(1, K + 1)]


def coefficient_values(l, K: int) -> list:
    """The e-series coefficients at a fixed ``l``: ``[c_1(l), ..., c_K(l)]``."""
    return [p(l) for p in series_coefficients(K)]


# Lagrange e-series -----------------------------------------------------------------------


@dataclass
class SeriesResult:
    value: object
    terms: list
    divergent: bool
    growth_radius: float | None = None


def _divergence(coeffs: list, x) -> tuple[bool, float | None]:
    """Compare ``|x|`` with the radius fitted to the coefficient magnitudes."""
    vals = [float(abs(c)) for c in coeffs]
    if len(vals) >= 8:
        try:
            est = radius_estimate(TruncatedSeries.floating([0.0] + vals))
            return float(abs(x)) >= est.root_radius, est.root_radius
        except ValueError:
            pass
    nz = [(k + 1, v) for k, v in enumerate(vals) if v > 0]
    if len(nz) < 2:
        return False, None
    (k1, v1), (k2, v2) = nz[-2], nz[-1]
    r = (v1 / v2) ** (1.0 / (k2 - k1))
    return float(abs(x)) >= r, r


def lagrange_series(e, l, K: int) -> SeriesResult:
    """``l + sum_{k<=K} e^k c_k(l)``, with the per-order terms and a divergence flag."""
    _check_e(e)
    coeffs = coefficient_values(l, K)
    terms = [c * e**k for k, c in enumerate(coeffs, start=1)]
    lib = _lib(e, l)
    value = l + (mpmath.fsum(terms) if lib is mpmath else math.fsum(terms))
    divergent, radius = _divergence(coeffs, e) if K else (False, None)
    return SeriesResult(value, terms, divergent, radius)


# Bessel functions and Carlini's series ------------------------------------------------------


def bessel_j(n: int, x: float) -> float:
    """Bessel function ``J_n(x)`` for integer ``n >= 0`` and real ``x >= 0``.

    Ascending series while ``x < n/2`` (no cancellation there), otherwise
    Miller's backward recurrence normalised by ``J_0 + 2 sum J_{2k} = 1``.
    """
    if n < 0:
        raise ValueError("order must be non-negative")
    if x < 0:
        raise ValueError("argument must be non-negative")
    if x == 0:
        return 1.0 if n == 0 else 0.0
    if x < 0.5 * n or x < 1e-3:
        h = 0.5 * x
        term = math.exp(n * math.log(h) - math.lgamma(n + 1))
        total = term
        m = 0
        while abs(term) > 1e-17 * abs(total):
            m += 1
            term *= -h * h / (m * (m + n))
            total += term
        return total
    top = 2 * ((max(n, int(x)) + 20 + int(math.sqrt(40.0 * max(n, x)))) // 2)
    jp, j = 0.0, 1e-30
    norm = 0.0
    result = 0.0
    for k in range(top, 0, -1):
        jm = (2.0 * k / x) * j - jp
        jp, j = j, jm
        if abs(j) > 1e250:
            j *= 1e-250
            jp *= 1e-250
            result *= 1e-250
            norm *= 1e-250
        if k - 1 == n:
            result = j
        if k - 1 > 0 and (k - 1) % 2 == 0:
            norm += 2.0 * j
    norm += j
    return result / norm


def bessel_series(e, l, N: int) -> float:
    """``l + sum_{n=1}^N (2/n) J_n(n e) sin(n l)``."""
    _check_e(e)
    if N < 1:
        raise ValueError("N must be >= 1")
    terms = [2.0 / n * bessel_j(n, n * e) * math.sin(n * l) for n in range(1, N + 1)]
    return l + math.fsum(terms)


# Laplace limit and eta -----------------------------------------------------------------


def laplace_function(r):
    """``r exp(sqrt(1+r^2)) / (1 + sqrt(1+r^2))``; equals 1 at the Laplace limit."""
    lib = _lib(r)
    s = lib.sqrt(1 + r * r)
    return r * lib.exp(s) / (1 + s)


def laplace_limit(tol=1e-7):
    """Root of ``laplace_function(r) = 1`` by bisection on [0.5, 1] then Newton polish."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = 0.5, 1.0
    while hi - lo > 1e-3:
        mid = 0.5 * (lo + hi)
        if laplace_function(mid) < 1:
            lo = mid
        else:
            hi = mid
    r = 0.5 * (lo + hi)
    for _ in range(50):
        s = math.sqrt(1 + r * r)
        g = laplace_function(r) - 1
        # d/dr log g = 1/r + r/s - r/(s (1 + s))
        dg = (g + 1) * (1 / r + r / s - r / (s * (1 + s)))
        step = g / dg
        r -= step
        if abs(step) < 1e-16 and abs(laplace_function(r) - 1) <= tol:
            break
    if abs(laplace_function(r) - 1) > tol:
        raise KeplerConvergenceError("Laplace limit polish failed to reach tolerance")
    return r


def eta_map(e):
    """``e exp(sqrt(1-e^2)) / (1 + sqrt(1-e^2))``."""
    if not 0 <= e < 1:
        raise ValueError(f"eta is defined here for e in [0, 1), got {e}")
    lib = _lib(e)
    s = lib.sqrt(1 - e * e)
    return e * lib.exp(s) / (1 + s)


def eta_modulus_imaginary(r: float) -> float:
    """``|eta(i r)|``, which equals 1 exactly at the Laplace limit."""
    import cmath

    z = 1j * r
    s = cmath.sqrt(1 - z * z)
    return abs(z * cmath.exp(s) / (1 + s))


@lru_cache(maxsize=None)
def eta_series(K: int) -> TruncatedSeries:
    """Taylor series of ``eta(e)`` about ``e = 0`` through ``e**K`` (float)."""
    e2 = TruncatedSeries.floating([0.0, 0.0, -1.0] + [0.0] * (K - 1))  # -e^2, order K+1
    s = binomial_series(Fraction(1, 2), K + 1, FLOAT).compose(e2)  # sqrt(1 - e^2)
    exp_s = exp_series(K + 1, FLOAT).compose(s - 1.0) * math.e
    ratio = exp_s / (s + 1.0)
    e = TruncatedSeries.variable(K + 1, FLOAT)
    return (e * ratio).truncate(K)


@lru_cache(maxsize=None)
def inverse_eta_series(K: int) -> TruncatedSeries:
    """``e(eta)`` through ``eta**K``, by Lagrange inversion of :func:`eta_series`."""
    eta = eta_series(K)
    a1 = eta[1]
    # with x = a1 e:  eta = x - phi(x),  phi(x) = -sum_{m>=2} eta_m (x/a1)^m
    phi = [0.0, 0.0] + [-eta[m] / a1**m for m in range(2, K + 1)]
    x = invert_series(FunctionJet.scalar(phi, 0.0, order=K), K)
    return x / a1


def eta_coefficients(l, K: int) -> TruncatedSeries:
    """``xi - l`` at fixed ``l`` as a power series in ``eta``."""
    c = TruncatedSeries.floating([0.0] + [float(v) for v in coefficient_values(float(l), K)])
    return c.compose(inverse_eta_series(K))


def eta_resummed_series(e, l, K: int) -> SeriesResult:
    """``l + sum_{m<=K} d_m(l) eta(e)^m``.

    The series in ``eta`` has radius 1 and ``eta(e) < 1`` for every ``e < 1``,
    so it is never flagged divergent; ``growth_radius`` still reports the
    radius fitted to the computed coefficients, which is noisy for small ``K``.
    """
    _check_e(e)
    d = eta_coefficients(l, K)
    eta = eta_map(float(e))
    terms = [d[m] * eta**m for m in range(1, K + 1)]
    radius = _divergence(list(d.coefficients[1:]), eta)[1] if K else None
    return SeriesResult(l + math.fsum(terms), terms, False, radius)


# true anomaly ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _velocity_factor(j: int) -> TrigPolynomial:
    """Coefficient of ``e**j`` in ``sqrt(1-e^2) / (1 - e cos l)``."""
    out = TrigPolynomial()
    cos = TrigPolynomial.cosine(1)
    for i in range(j // 2 + 1):
        r = j - 2 * i
        b = binomial_series(Fraction(1, 2), i)[i] * (-1) ** i
        out = out + (cos**r).scale(b)
    return out


@lru_cache(maxsize=None)
def true_anomaly_coefficients(K: int) -> tuple:
    """Trig polynomials ``S_m`` with ``u = l + sum_{m=1}^K e^m S_m(l)``.

    ``u(xi)`` is expanded with ``psi = u`` in Lagrange's formula, whose
    derivative ``du/dxi = sqrt(1-e^2)/(1 - e cos xi)`` is itself expanded in
    powers of ``e``; the ``k = 0`` piece is integrated harmonic by harmonic.
    """
    sin = TrigPolynomial.sine(1)
    out = []
    for m in range(1, K + 1):
        w = _velocity_factor(m)
        if w.cos.get(0, 0) != 0:
            raise ArithmeticError(f"secular term at order {m}")
        s = w.antiderivative()
        for k in range(1, m + 1):
            piece = (sin**k * _velocity_factor(m - k)).derivative(k - 1)
            s = s + piece.scale(Fraction(1, math.factorial(k)))
        out.append(s)
    return tuple(out)


def true_anomaly_series(e, l, K: int):
    """True anomaly ``u`` as a truncated power series in ``e``."""
    _check_e(e)
    coeffs = true_anomaly_coefficients(K)
    lib = _lib(e, l)
    terms = [p(l) * e**m for m, p in enumerate(coeffs, start=1)]
    return l + (mpmath.fsum(terms) if lib is mpmath else math.fsum(terms))


def true_anomaly_exact(e, l, tol=1e-14):
    """Closed form ``u = 2 atan(sqrt((1+e)/(1-e)) tan(xi/2))`` on the branch near ``xi``."""
    _check_e(e)
    lib = _lib(e, l)
    xi = newton_solve(e, l, tol)
    u = 2 * lib.atan2(lib.sqrt(1 + e) * lib.sin(xi / 2), lib.sqrt(1 - e) * lib.cos(xi / 2))
    two_pi = 2 * lib.pi
    # u and xi lie in the same half-plane: pick the 2*pi shift that keeps them together
    return u + two_pi * round(float((xi - u) / two_pi))


# comparison table -------------------------------------------------------------------------


def compare_methods(e, l, K: int = 20, N: int = 200, K_eta: int = 120) -> list[dict]:
    """Rows ``{method, order, value, abs_error_vs_newton, flag}`` for one ``(e, l)``."""
    ref = newton_solve(e, l)
    rows = [{"method": "newton", "order": 0, "value": ref, "abs_error_vs_newton": 0.0, "flag": ""}]
    lag = lagrange_series(e, l, K)
    rows.append({
        "method": "lagrange", "order": K, "value": lag.value,
        "abs_error_vs_newton": abs(lag.value - ref), "flag": "divergent" if lag.divergent else "",
    })
    b = bessel_series(e, l, N)
    rows.append({"method": "bessel", "order": N, "value": b, "abs_error_vs_newton": abs(b - ref), "flag": ""})
    et = eta_resummed_series(e, l, K_eta)
    rows.append({
        "method": "eta", "order": K_eta, "value": et.value,
        "abs_error_vs_newton": abs(et.value - ref), "flag": "divergent" if et.divergent else "",
    })
    return rows
