"""Truncated formal power series and summation of slowly convergent or divergent series.

A :class:`TruncatedSeries` holds the coefficients ``c_0 .. c_K`` of a power
series in one variable.  Coefficients beyond ``K`` are *unknown*, not zero, so
every binary operation truncates to the smaller order of its operands.

Two coefficient modes exist:

* ``"exact"``: :class:`fractions.Fraction` coefficients, used for combinatorial
  identities and anything compared with zero tolerance;
* ``"float"``: double precision, used for radius fits and numerical sums.

Mixing modes raises :class:`ModeMismatchError`; use :meth:`TruncatedSeries.to_float`
or :meth:`TruncatedSeries.to_exact` to cast.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import Callable, Iterable, Sequence

import numpy as np

EXACT = "exact"
FLOAT = "float"
_MODES = (EXACT, FLOAT)


class ModeMismatchError(TypeError):
    """Raised when exact and float series meet without an explicit cast."""


def _to_fraction(c) -> Fraction:
    if isinstance(c, Fraction):
        return c
    if isinstance(c, bool):
        raise TypeError("booleans are not series coefficients")
    if isinstance(c, (int, Rational)):
        return Fraction(c)
    if isinstance(c, str):
        return Fraction(c)
    raise TypeError(
        f"exact series needs int/Fraction/'p/q' coefficients, got {type(c).__name__}; "
        "cast floats explicitly with TruncatedSeries.to_exact"
    )


@dataclass(frozen=True)
class TruncatedSeries:
    """Coefficients of ``sum_k c_k x**k`` known through order ``K = len - 1``."""

    coefficients: tuple
    mode: str = EXACT

    def __post_init__(self):
        if self.mode not in _MODES:
            raise ValueError(f"mode must be one of {_MODES}, got {self.mode!r}")
        coeffs = tuple(self.coefficients)
        if not coeffs:
            raise ValueError("a truncated series needs at least c_0")
        if self.mode == EXACT:
            coeffs = tuple(_to_fraction(c) for c in coeffs)
        else:
            coeffs = tuple(float(c) for c in coeffs)
        object.__setattr__(self, "coefficients", coeffs)

    # construction -------------------------------------------------------

    @classmethod
    def exact(cls, coefficients: Iterable) -> "TruncatedSeries":
        return cls(tuple(coefficients), EXACT)

    @classmethod
    def floating(cls, coefficients: Iterable) -> "TruncatedSeries":
        return cls(tuple(coefficients), FLOAT)

    @classmethod
    def constant(cls, value, order: int, mode: str = EXACT) -> "TruncatedSeries":
        zero = Fraction(0) if mode == EXACT else 0.0
        return cls((value,) + (zero,) * order, mode)

    @classmethod
    def variable(cls, order: int, mode: str = EXACT) -> "TruncatedSeries":
        """The series ``x`` truncated at ``order`` (needs order >= 1)."""
        if order < 1:
            raise ValueError("the variable x needs order >= 1")
        return cls((0, 1) + (0,) * (order - 1), mode)

    # basic properties ---------------------------------------------------

    @property
    def order(self) -> int:
        return len(self.coefficients) - 1

    def __len__(self):
        return len(self.coefficients)

    def __getitem__(self, k):
        return self.coefficients[k]

    def _zero(self):
        return Fraction(0) if self.mode == EXACT else 0.0

    def valuation(self) -> int | None:
        """Index of the first nonzero coefficient, None for the zero series."""
        for k, c in enumerate(self.coefficients):
            if c != 0:
                return k
        return None

    def truncate(self, order: int) -> "TruncatedSeries":
        if order > self.order:
            raise ValueError("cannot extend a truncated series")
        return TruncatedSeries(self.coefficients[: order + 1], self.mode)

    # casting ------------------------------------------------------------

    def to_float(self) -> "TruncatedSeries":
        return TruncatedSeries(tuple(float(c) for c in self.coefficients), FLOAT)

    def to_exact(self, max_denominator: int | None = None) -> "TruncatedSeries":
        """Cast to exact mode.  Floats are converted exactly unless ``max_denominator`` is given."""
        if self.mode == EXACT:
            return self
        out = []
        for c in self.coefficients:
            q = Fraction(c)
            if max_denominator is not None:
                q = q.limit_denominator(max_denominator)
            out.append(q)
        return TruncatedSeries(tuple(out), EXACT)

    # arithmetic ---------------------------------------------------------

    def _check(self, other: "TruncatedSeries"):
        if self.mode != other.mode:
            raise ModeMismatchError(
                f"cannot combine {self.mode} and {other.mode} series without an explicit cast"
            )

    def _scalar(self, s):
        if self.mode == EXACT:
            if isinstance(s, float):
                raise ModeMismatchError("float scalar applied to an exact series")
            return _to_fraction(s)
        return float(s)

    def __add__(self, other):
        if isinstance(other, TruncatedSeries):
            self._check(other)
            K = min(self.order, other.order)
            return TruncatedSeries(
                tuple(self[k] + other[k] for k in range(K + 1)), self.mode
            )
        s = self._scalar(other)
        return TruncatedSeries((self[0] + s,) + self.coefficients[1:], self.mode)

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries(tuple(-c for c in self.coefficients), self.mode)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, TruncatedSeries):
            return series_product(self, other)
        s = self._scalar(other)
        return TruncatedSeries(tuple(c * s for c in self.coefficients), self.mode)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, TruncatedSeries):
            return series_product(self, other.reciprocal())
        s = self._scalar(other)
        return TruncatedSeries(tuple(c / s for c in self.coefficients), self.mode)

    def __pow__(self, n: int):
        if not isinstance(n, int) or n < 0:
            raise ValueError("only non-negative integer powers are supported")
        result = TruncatedSeries.constant(1, self.order, self.mode)
        base = self
        while n:
            if n & 1:
                result = result * base
            base = base * base
            n >>= 1
        return result

    def reciprocal(self) -> "TruncatedSeries":
        """``1/a`` through the same order; needs ``a[0] != 0``."""
        a = self.coefficients
        if a[0] == 0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        b = [self._zero()] * len(a)
        b[0] = 1 / a[0] if self.mode == FLOAT else Fraction(1) / a[0]
        for n in range(1, len(a)):
            s = sum((a[j] * b[n - j] for j in range(1, n + 1)), self._zero())
            b[n] = -s * b[0]
        return TruncatedSeries(tuple(b), self.mode)

    def derivative(self) -> "TruncatedSeries":
        return series_derivative(self)

    def integral(self, constant=0) -> "TruncatedSeries":
        """Antiderivative; the order grows by one because the constant is supplied."""
        c0 = self._scalar(constant)
        return TruncatedSeries(
            (c0,) + tuple(c / (k + 1) for k, c in enumerate(self.coefficients)), self.mode
        )

    def compose(self, inner: "TruncatedSeries") -> "TruncatedSeries":
        return series_compose(self, inner)

    def __call__(self, x):
        """Evaluate the truncated polynomial at ``x`` (Horner)."""
        acc = 0
        for c in reversed(self.coefficients):
            acc = acc * x + c
        return acc

    def __eq__(self, other):
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        return self.mode == other.mode and self.coefficients == other.coefficients

    def __hash__(self):
        return hash((self.mode, self.coefficients))

    def __repr__(self):
        terms = ", ".join(str(c) for c in self.coefficients)
        return f"TruncatedSeries[{self.mode}, K={self.order}]({terms})"

    # serialization --------------------------------------------------------

    def to_json(self) -> dict:
        if self.mode == EXACT:
            coeffs = [f"{c.numerator}/{c.denominator}" for c in self.coefficients]
        else:
            coeffs = list(self.coefficients)
        return {"mode": self.mode, "order": self.order, "coefficients": coeffs}

    @classmethod
    def from_json(cls, data: dict) -> "TruncatedSeries":
        s = cls(tuple(data["coefficients"]), data["mode"])
        if s.order != data["order"]:
            raise ValueError("order field disagrees with coefficient count")
        return s


def series_product(a: TruncatedSeries, b: TruncatedSeries) -> TruncatedSeries:
    """Cauchy product truncated to ``min(K_a, K_b)``."""
    a._check(b)
    K = min(a.order, b.order)
    zero = a._zero()
    out = []
    for n in range(K + 1):
        terms = [a[j] * b[n - j] for j in range(n + 1)]
        out.append(math.fsum(terms) if a.mode == FLOAT else sum(terms, zero))
    return TruncatedSeries(tuple(out), a.mode)


def series_compose(outer: TruncatedSeries, inner: TruncatedSeries) -> TruncatedSeries:
    """Coefficients of ``outer(inner(x))`` through ``min(K_outer, K_inner)``.

    ``inner`` must have a zero constant term, otherwise every coefficient of the
    result would depend on the unknown tail of ``outer``.
    """
    outer._check(inner)
    if inner[0] != 0:
        raise ValueError("inner series must have zero constant term")
    K = min(outer.order, inner.order)
    inner = inner.truncate(K)
    acc = TruncatedSeries.constant(outer[K], K, outer.mode)
    for k in range(K - 1, -1, -1):
        acc = acc * inner + outer[k]
    return acc


def series_derivative(a: TruncatedSeries) -> TruncatedSeries:
    if a.order < 1:
        raise ValueError("derivative needs order >= 1")
    return TruncatedSeries(
        tuple(k * a[k] for k in range(1, a.order + 1)), a.mode
    )


# standard series ------------------------------------------------------------


def geometric_series(order: int, ratio=1, mode: str = EXACT) -> TruncatedSeries:
    """``sum_k ratio**k x**k``."""
    return TruncatedSeries(tuple(ratio**k for k in range(order + 1)), mode)


def exp_series(order: int, mode: str = EXACT) -> TruncatedSeries:
    return TruncatedSeries(
        tuple(Fraction(1, math.factorial(k)) for k in range(order + 1)), EXACT
    ) if mode == EXACT else TruncatedSeries(
        tuple(1.0 / math.factorial(k) for k in range(order + 1)), FLOAT
    )


def log1p_series(order: int, mode: str = EXACT) -> TruncatedSeries:
    coeffs = [Fraction(0)] + [Fraction((-1) ** (k + 1), k) for k in range(1, order + 1)]
    s = TruncatedSeries(tuple(coeffs), EXACT)
    return s if mode == EXACT else s.to_float()


def sin_series(order: int, mode: str = EXACT) -> TruncatedSeries:
    coeffs = []
    for k in range(order + 1):
        coeffs.append(
            Fraction(0) if k % 2 == 0 else Fraction((-1) ** (k // 2), math.factorial(k))
        )
    s = TruncatedSeries(tuple(coeffs), EXACT)
    return s if mode == EXACT else s.to_float()


def binomial_series(p, order: int, mode: str = EXACT) -> TruncatedSeries:
    """``(1 + x)**p`` for rational ``p``."""
    p = _to_fraction(p) if mode == EXACT else float(p)
    coeffs = [Fraction(1) if mode == EXACT else 1.0]
    for k in range(1, order + 1):
        coeffs.append(coeffs[-1] * (p - (k - 1)) / k)
    return TruncatedSeries(tuple(coeffs), mode)


# Abel summation ---------------------------------------------------------------

DEFAULT_ABEL_GRID = (0.9, 0.95, 0.98, 0.99, 0.995)


@dataclass(frozen=True)
class TermGenerator:
    """Deterministic rule ``n -> a_n`` for ``n = start, start + 1, ...``."""

    term: Callable[[int], float]
    start: int = 0

    def __call__(self, n: int) -> float:
        return self.term(n)


@dataclass
class AbelResult:
    value: float
    radii: tuple
    sums: tuple
    divergent_at: tuple = ()
    terms_used: tuple = ()
    cesaro_mean: float = math.nan
    fit_degree: int = 0
    extrapolated: bool = True
    notes: list = field(default_factory=list)


def _abel_sum_at(g: TermGenerator, r: float, max_terms: int, chunk: int = 256):
    """Sum ``a_n r^n`` until chunks stop changing the total; returns (sum, n_used, ok)."""
    chunk_sums = []
    n = g.start
    weight = r**n
    while n - g.start < max_terms:
        try:
            block = []
            for _ in range(chunk):
                block.append(g(n) * weight)
                n += 1
                weight *= r
        except OverflowError:
            return math.nan, n - g.start, False
        biggest = max(abs(b) for b in block)
        if not math.isfinite(biggest) or biggest > 1e300:
            return math.nan, n - g.start, False
        block_sum = math.fsum(block)
        chunk_sums.append(block_sum)
        total = math.fsum(chunk_sums)
        scale = max(1.0, abs(total))
        if biggest <= 1e-17 * scale and abs(block_sum) <= 1e-17 * scale:
            return total, n - g.start, True
    return math.fsum(chunk_sums), n - g.start, False


def _cesaro_mean(g: TermGenerator, n_terms: int) -> float:
    s = 0.0
    acc = 0.0
    try:
        for i in range(n_terms):
            s += g(g.start + i)
            acc += s
    except OverflowError:
        return math.nan
    return acc / n_terms if math.isfinite(acc) else math.nan


def abel_sum(
    g: TermGenerator | Callable[[int], float],
    r_grid: Sequence[float] = DEFAULT_ABEL_GRID,
    extrapolate: bool = True,
    max_terms: int = 1_000_000,
    degree: int = 3,
    cesaro_terms: int = 4096,
    direct_terms: int = 20_000,
) -> AbelResult:
    """Abel sum ``lim_{r->1-} sum_n a_n r^n`` by polynomial extrapolation in ``1 - r``.

    The plain series is tried first; if it stagnates within ``direct_terms``
    terms its sum is returned unchanged.  Otherwise each ``sum a_n r^n`` is
    accumulated until it stagnates in double precision.
    Radii at which it does not stagnate are reported in ``divergent_at`` and left
    out of the fit.  The returned diagnostics also carry the order-1 Cesaro mean
    of the first ``cesaro_terms`` partial sums.
    """
    if not isinstance(g, TermGenerator):
        g = TermGenerator(g)
    radii = tuple(float(r) for r in r_grid)
    if not radii:
        raise ValueError("empty radius grid")
    if any(not 0.0 < r < 1.0 for r in radii):
        raise ValueError("radii must lie in (0, 1)")
    if any(b <= a for a, b in zip(radii, radii[1:])):
        raise ValueError("radius grid must be strictly increasing")

    direct, _, direct_ok = _abel_sum_at(g, 1.0, direct_terms)

    sums, used, bad = [], [], []
    for r in radii:
        s, n, ok = _abel_sum_at(g, r, max_terms)
        sums.append(s)
        used.append(n)
        if not ok:
            bad.append(r)

    good = [(r, s) for r, s in zip(radii, sums) if r not in bad]
    notes = []
    if direct_ok and math.isfinite(direct):
        # Abel's theorem: a convergent series is its own Abel sum
        value, deg = direct, 0
        notes.append("series converges in double precision; direct sum used")
    elif not good:
        value, deg = math.nan, 0
        notes.append("no radius produced a stagnating sum")
    elif not extrapolate or len(good) == 1:
        value, deg = good[-1][1], 0
    else:
        deg = min(degree, len(good) - 1)
        x = np.array([1.0 - r for r, _ in good])
        y = np.array([s for _, s in good])
        value = float(np.polyval(np.polyfit(x, y, deg), 0.0))
    return AbelResult(
        value=value,
        radii=radii,
        sums=tuple(sums),
        divergent_at=tuple(bad),
        terms_used=tuple(used),
        cesaro_mean=_cesaro_mean(g, cesaro_terms),
        fit_degree=deg,
        extrapolated=deg > 0,
        notes=notes,
    )


# radius of convergence -------------------------------------------------------


@dataclass
class RadiusEstimate:
    radius: float
    ratio_radius: float | None
    root_radius: float
    disagreement: float
    stride: int | None
    flags: list = field(default_factory=list)

    def __float__(self):
        return self.radius


def _nonzero_indices(c: np.ndarray) -> list[int]:
    """Indices whose coefficient is not negligible next to its neighbours."""
    idx = []
    K = len(c) - 1
    for k in range(K + 1):
        if c[k] == 0.0:
            continue
        neigh = [c[j] for j in (k - 1, k + 1) if 0 <= j <= K]
        if neigh and c[k] < 1e-8 * max(neigh):
            continue
        idx.append(k)
    return idx


def radius_estimate(a: TruncatedSeries, tail_fraction: float = 0.5) -> RadiusEstimate:
    """Ratio- and root-test estimates of the radius of convergence.

    Both tests are fitted on the trailing part of the coefficients so that the
    usual algebraic prefactor ``k**g`` is absorbed:

    * ratio: ``|c_k / c_{k-s}|**(1/s) = A + B/k`` (Domb-Sykes), radius ``1/A``;
      ``s`` is the spacing of nonzero coefficients (2 for even/odd series);
    * root: ``log|c_k| = a*k + b*log(k) + const``, radius ``exp(-a)``.

    Irregularly placed zeros disable the ratio test; the result then falls back
    to the root test and says so in ``flags``.
    """
    K = a.order
    if K < 8:
        raise ValueError("radius estimate needs order >= 8")
    c = np.abs(np.array([float(x) for x in a.coefficients]))
    k0 = max(1, int(round(K * (1.0 - tail_fraction))))
    flags: list[str] = []

    nz = [k for k in _nonzero_indices(c) if k >= k0]
    if len(nz) < 3:
        raise ValueError("too few nonzero trailing coefficients for a radius estimate")
    if c[K] == 0.0 and c[K - 1] == 0.0:
        flags.append("trailing-zeros")

    steps = {b - a_ for a_, b in zip(nz, nz[1:])}
    stride = steps.pop() if len(steps) == 1 else None
    if stride is not None and stride > 1:
        flags.append(f"interleaved-zeros-stride-{stride}")

    ks = np.array(nz, dtype=float)
    logc = np.log(c[nz])
    if len(nz) >= 4:
        design = np.column_stack([ks, np.log(ks), np.ones_like(ks)])
    else:
        design = np.column_stack([ks, np.ones_like(ks)])
    coef, *_ = np.linalg.lstsq(design, logc, rcond=None)
    root_radius = float(np.exp(-coef[0]))

    ratio_radius = None
    if stride is None:
        flags.append("irregular-zeros-root-test-only")
    else:
        pairs = [(k, c[k], c[k - stride]) for k in nz if k - stride >= 0 and c[k - stride] > 0]
        if len(pairs) >= 2:
            kk = np.array([p[0] for p in pairs], dtype=float)
            rho = np.array([(p[1] / p[2]) ** (1.0 / stride) for p in pairs])
            fit, *_ = np.linalg.lstsq(np.column_stack([np.ones_like(kk), 1.0 / kk]), rho, rcond=None)
            if fit[0] > 0:
                ratio_radius = float(1.0 / fit[0])
            else:
                flags.append("ratio-fit-nonpositive")
        else:
            flags.append("ratio-test-unavailable")

    radius = ratio_radius if ratio_radius is not None else root_radius
    disagreement = (
        abs(ratio_radius - root_radius) / radius if ratio_radius is not None else math.nan
    )
    if disagreement > 0.1:
        flags.append("ratio-root-disagree")
    return RadiusEstimate(radius, ratio_radius, root_radius, disagreement, stride, flags)
