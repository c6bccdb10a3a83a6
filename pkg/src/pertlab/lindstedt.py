"""Lindstedt series for an invariant torus of ``H = A^2/2 + eps f(alpha)``.

The conjugation ``h: T^d -> R^d`` solves

    h(alpha) + (omega . d)^{-2} (eps grad f(alpha + h(alpha))) = 0,

with ``(omega . d)^{-2}`` acting on ``sin(nu . alpha)`` as multiplication by
``-(omega . nu)^{-2}``.  Writing ``h = sum_k eps^k h^[k]`` each order is odd and
is stored in the sine basis.

Internally a torus function is held on the full lattice as a real
antisymmetric field ``c`` with ``h(alpha) = sum_nu c_nu sin(nu . alpha)``
summed over all ``nu``; the sine coefficient on a canonical ``nu`` is then
``2 c_nu``.  With ``f = sum f_nu cos(nu . alpha)`` the order recursion reads

    c^[k]_mu = -(omega . mu)^{-2} sum_nu f_nu nu [exp(nu . C)]^{(k-1)}_{mu - nu},

where ``C = sum_k eps^k c^[k]`` and ``[.]^{(n)}`` takes the ``eps^n`` part.
Expanding the exponential gives the tree sum of :func:`tree_expansion_order`.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import mpmath
import numpy as np

from .inversion import enumerate_trees

MAX_TREE_ORDER = 5
MAX_DIVISOR_COMBINATIONS = 10**6
FLOAT_TOL = 1e-12


class ResonanceError(ValueError):
    pass


class DiophantineViolation(ValueError):
    pass


class SolvabilityError(ArithmeticError):
    pass


# arithmetic over Fraction, float and mpf --------------------------------------------


def _is_mp(x) -> bool:
    return isinstance(x, (mpmath.mpf, mpmath.mpc))


def _total(values):
    values = list(values)
    if not values:
        return 0
    if any(_is_mp(v) for v in values):
        return mpmath.fsum(values)
    if any(isinstance(v, float) for v in values):
        return math.fsum(values)
    return sum(values, 0)


def _mpf(x):
    if isinstance(x, Fraction):
        return mpmath.mpf(x.numerator) / x.denominator
    return mpmath.mpf(x)


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def _dot(u, v):
    return _total(a * b for a, b in zip(u, v))


def canonical(nu: tuple) -> bool:
    """True when the first nonzero entry of ``nu`` is positive."""
    for x in nu:
        if x:
            return x > 0
    return False


def l1(nu) -> int:
    return sum(abs(x) for x in nu)


def _neg(nu: tuple) -> tuple:
    return tuple(-x for x in nu)


def _add(a: tuple, b: tuple) -> tuple:
    return tuple(x + y for x, y in zip(a, b))


def lattice_ball(d: int, N: int):
    """All ``nu`` in ``Z^d`` with ``0 < |nu|_1 <= N`` and ``nu`` canonical."""

    def rec(dim, budget):
        if dim == 0:
            yield ()
            return
        for x in range(-budget, budget + 1):
            for rest in rec(dim - 1, budget - abs(x)):
                yield (x, *rest)

    for nu in rec(d, N):
        if canonical(nu):
            yield nu


def _ball_size(d: int, N: int) -> int:
    # number of lattice points with |nu|_1 <= N
    return sum(2**i * math.comb(d, i) * math.comb(N, i) for i in range(d + 1))


# domain types ----------------------------------------------------------------------


@dataclass(frozen=True)
class DiophantineFrequency:
    """``omega`` with ``|omega . nu| >= 1/(C0 |nu|^tau)`` checked for ``0 < |nu|_1 <= N``."""

    omega: tuple
    C0: float = 1.0
    tau: float = 1.0
    N: int = 50

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(self.omega))
        if not self.omega:
            raise ValueError("frequency must have dimension >= 1")
        if self.C0 <= 0 or self.tau <= 0:
            raise ValueError("C0 and tau must be positive")
        # list() first so an exact resonance is reported before any bound violation
        for nu, value, bound in list(_divisors(self.omega, self.N, self.C0, self.tau)):
            if value < bound:
                raise DiophantineViolation(
                    f"|omega.nu| = {value:.3g} < {bound:.3g} at nu = {nu} (C0 = {self.C0}, tau = {self.tau})"
                )

    @property
    def d(self) -> int:
        return len(self.omega)

    def dot(self, nu):
        return _dot(self.omega, nu)


def _divisors(omega, N, C0, tau):
    d = len(omega)
    if _ball_size(d, N) > MAX_DIVISOR_COMBINATIONS:
        raise ValueError(f"cutoff N = {N} in dimension {d} exceeds {MAX_DIVISOR_COMBINATIONS} combinations")
    for nu in lattice_ball(d, N):
        value = abs(_dot(omega, nu))
        if value == 0:
            raise ResonanceError(f"resonant frequency: omega . {nu} = 0")
        yield nu, value, 1.0 / (C0 * l1(nu) ** tau)


@dataclass(frozen=True)
class DivisorReport:
    offenders: list
    best_C0: float
    tau: float


def small_divisor_report(omega, N: int, tau: float = 1.0, top: int = 20) -> DivisorReport:
    """Smallest ``|omega . nu|`` over canonical ``0 < |nu|_1 <= N``.

    Rows are ``(nu, |omega.nu|, 1/|nu|^tau)``; ``best_C0`` is the smallest
    constant for which the Diophantine bound holds on the ball.
    """
    if isinstance(omega, DiophantineFrequency):
        omega = omega.omega
    rows = sorted(_divisors(tuple(omega), N, 1.0, tau), key=lambda r: (float(r[1]), r[0]))
    best = max(float(b) / float(v) for _, v, b in rows)
    return DivisorReport(rows[:top], best, tau)


@dataclass(frozen=True)
class Potential:
    """Even trigonometric polynomial ``f = sum_nu f_nu cos(nu . alpha)``, ``f_nu = f_{-nu}``."""

    coefficients: Mapping

    def __post_init__(self):
        coeffs = {tuple(k): v for k, v in dict(self.coefficients).items() if v != 0}
        dims = {len(k) for k in coeffs}
        if len(dims) > 1:
            raise ValueError("mixed mode dimensions in potential")
        for nu, v in coeffs.items():
            if not any(nu):
                raise ValueError("the zero mode of f is conventionally 0")
            if coeffs.get(_neg(nu)) != v:
                raise ValueError(f"potential is not even: f_{nu} != f_{_neg(nu)}")
        object.__setattr__(self, "coefficients", dict(sorted(coeffs.items())))

    @classmethod
    def from_cosines(cls, terms: Mapping):
        """``{nu: a}`` meaning ``a cos(nu . alpha)`` on canonical ``nu``."""
        coeffs = {}
        for nu, a in terms.items():
            nu = tuple(nu)
            half = a / 2 if not _is_exact(a) else Fraction(a) / 2
            for key in (nu, _neg(nu)):
                coeffs[key] = coeffs.get(key, 0) + half
        return cls(coeffs)

    @property
    def support(self) -> list:
        return list(self.coefficients)

    @property
    def radius(self) -> int:
        return max((l1(nu) for nu in self.coefficients), default=0)

    @property
    def d(self) -> int | None:
        return len(next(iter(self.coefficients))) if self.coefficients else None

    def __call__(self, alpha):
        return sum(v * np.cos(np.tensordot(nu, np.asarray(alpha, dtype=float), axes=1))
                   for nu, v in self.coefficients.items())


@dataclass(frozen=True)
class TorusFourier:
    """Odd vector field ``h(alpha) = sum_nu s_nu sin(nu . alpha)`` over canonical ``nu``."""

    d: int
    sine: Mapping = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for nu, vec in dict(self.sine).items():
            nu = tuple(nu)
            if len(nu) != self.d or len(vec) != self.d:
                raise ValueError("mode and coefficient dimensions must equal d")
            if not canonical(nu):
                raise ValueError(f"sine coefficients are stored on canonical modes, got {nu}")
            if any(x != 0 for x in vec):
                clean[nu] = tuple(vec)
        object.__setattr__(self, "sine", dict(sorted(clean.items())))

    @classmethod
    def from_lattice(cls, d: int, c: Mapping, tol: float = 0.0) -> "TorusFourier":
        """From the full antisymmetric field ``c``; raises if ``c`` is not odd."""
        sine = {}
        for nu, vec in c.items():
            if not canonical(nu):
                continue
            mirror = c.get(_neg(nu), (0,) * d)
            for a, b in zip(vec, mirror):
                if abs(a + b) > tol:
                    raise SolvabilityError(f"parity violated at mode {nu}: {a} vs {b}")
            sine[nu] = tuple(a - b for a, b in zip(vec, mirror))
        for nu in c:
            if not canonical(nu) and any(c[nu]) and _neg(nu) not in c:
                raise SolvabilityError(f"parity violated: {nu} has no mirror mode")
        return cls(d, sine)

    def lattice(self) -> dict:
        """Full-lattice field ``c`` with ``c_nu = s_nu/2`` and ``c_{-nu} = -c_nu``."""
        out = {}
        for nu, vec in self.sine.items():
            half = tuple(x / 2 if not _is_exact(x) else Fraction(x) / 2 for x in vec)
            out[nu] = half
            out[_neg(nu)] = tuple(-x for x in half)
        return out

    def coefficient(self, nu, j: int = 0):
        """Sine coefficient of component ``j`` on ``nu`` (sign flips for non-canonical ``nu``)."""
        nu = tuple(nu)
        if canonical(nu):
            return self.sine.get(nu, (0,) * self.d)[j]
        return -self.sine.get(_neg(nu), (0,) * self.d)[j]

    @property
    def support_radius(self) -> int:
        return max((l1(nu) for nu in self.sine), default=0)

    def is_zero(self) -> bool:
        return not self.sine

    def max_abs(self) -> float:
        return max((abs(float(x)) for v in self.sine.values() for x in v), default=0.0)

    def to_float(self) -> "TorusFourier":
        return TorusFourier(self.d, {nu: tuple(float(x) for x in v) for nu, v in self.sine.items()})

    def __call__(self, alpha) -> np.ndarray:
        """Evaluate on an array whose leading axis has length ``d``."""
        alpha = np.asarray(alpha, dtype=float)
        out = np.zeros(alpha.shape)
        for nu, vec in self.sine.items():
            s = np.sin(np.tensordot(nu, alpha, axes=1))
            for j, x in enumerate(vec):
                out[j] += float(x) * s
        return out

    def rows(self, k: int) -> list[dict]:
        rows = []
        for nu, vec in self.sine.items():
            for j, x in enumerate(vec):
                row = {"k": k}
                row.update({f"nu{i + 1}": n for i, n in enumerate(nu)})
                row.update({"j": j + 1, "coefficient": x})
                rows.append(row)
        return rows


@dataclass(frozen=True)
class LindstedtSystem:
    name: str
    potential: Potential
    frequency: DiophantineFrequency


def pendulum1d() -> LindstedtSystem:
    """``f = cos(alpha)``, ``omega = 1`` in exact rationals."""
    return LindstedtSystem(
        "pendulum1d",
        Potential.from_cosines({(1,): Fraction(1)}),
        DiophantineFrequency((Fraction(1),), C0=1.0, tau=1.0, N=50),
    )


def golden2d(dps: int | None = None) -> LindstedtSystem:
    """``f = cos(a1) + cos(a1 + a2)``, ``omega = (1, golden mean)``; mpmath numbers when ``dps`` is set."""
    if dps is None:
        omega = (1.0, (1 + math.sqrt(5)) / 2)
        one = 1.0
    else:
        with mpmath.workdps(dps):
            omega = (mpmath.mpf(1), (1 + mpmath.sqrt(5)) / 2)
        one = mpmath.mpf(1)
    return LindstedtSystem(
        "golden2d",
        Potential.from_cosines({(1, 0): one, (1, 1): one}),
        DiophantineFrequency(omega, C0=1.0, tau=1.0, N=50),
    )


SYSTEMS = {"pendulum1d": pendulum1d, "golden2d": golden2d}


# order-by-order recursion ----------------------------------------------------------------


def _conv(a: Mapping, b: Mapping, weight=1) -> dict:
    """Collects ``weight * a_x b_y`` into lists keyed by ``x + y``."""
    out: dict = {}
    for x, ax in a.items():
        for y, by in b.items():
            out.setdefault(_add(x, y), []).append(weight * ax * by)
    return out


class _Recursion:
    """Holds the exponentials ``exp(nu . C)`` order by order for every ``nu`` in supp f."""

    def __init__(self, f: Potential, omega: DiophantineFrequency):
        self.f = f
        self.omega = omega
        self.d = omega.d
        if f.d not in (None, self.d):
            raise ValueError("potential and frequency dimensions differ")
        zero = (0,) * self.d
        self.lattice: list[dict] = []  # c^[1..]
        self.exps = {nu: [{zero: 1}] for nu in f.support}

    def push(self, h: TorusFourier):
        """Append ``h^[k]`` and extend each exponential to order ``k``."""
        c = h.lattice()
        self.lattice.append(c)
        n = len(self.lattice)
        for nu, series in self.exps.items():
            acc: dict = {}
            for k in range(1, n + 1):
                g = {mu: _dot(nu, vec) for mu, vec in self.lattice[k - 1].items()}
                weight = Fraction(k, n)
                for key, terms in _conv(g, series[n - k]).items():
                    acc.setdefault(key, []).extend(_scale(t, weight) for t in terms)
            series.append({key: _total(terms) for key, terms in acc.items()})

    def next_order(self) -> TorusFourier:
        k = len(self.lattice) + 1
        terms: dict = {}
        for nu, fnu in self.f.coefficients.items():
            for mu, e in self.exps[nu][k - 1].items():
                key = _add(mu, nu)
                bucket = terms.setdefault(key, [[] for _ in range(self.d)])
                for j in range(self.d):
                    if nu[j]:
                        bucket[j].append(fnu * nu[j] * e)
        B = {mu: tuple(_total(t) for t in comps) for mu, comps in terms.items()}
        zero = (0,) * self.d
        scale = max((abs(x) for vec in B.values() for x in vec), default=0)
        b0 = B.pop(zero, (0,) * self.d)
        exact = all(_is_exact(x) for vec in B.values() for x in vec) and all(_is_exact(x) for x in b0)
        tol = 0 if exact else FLOAT_TOL * max(1, scale)
        if any(abs(x) > tol for x in b0):
            raise SolvabilityError(f"solvability violated at order {k}: zero mode {b0}")
        c = {}
        for mu, vec in B.items():
            div = self.omega.dot(mu)
            if div == 0:
                raise ResonanceError(f"resonant frequency: omega . {mu} = 0")
            c[mu] = tuple(-x / div**2 for x in vec)
        cscale = max((abs(x) for vec in c.values() for x in vec), default=0)
        return TorusFourier.from_lattice(self.d, c, tol=0 if exact else FLOAT_TOL * max(1, cscale))


def _scale(t, w: Fraction):
    if w == 1 or _is_exact(t):
        return t * w
    return t * w.numerator / w.denominator


def lindstedt_series(f: Potential, omega: DiophantineFrequency, K: int) -> list[TorusFourier]:
    """``[h^[1], ..., h^[K]]`` by the Fourier-space recursion."""
    if K < 0:
        raise ValueError("order must be >= 0")
    rec = _Recursion(f, omega)
    out = []
    for _ in range(K):
        h = rec.next_order()
        out.append(h)
        rec.push(h)
    return out


def solve_order(k: int, history: Sequence[TorusFourier], f: Potential, omega: DiophantineFrequency) -> TorusFourier:
    """``h^[k]`` from ``h^[1..k-1]``: the ``eps^k`` part of the conjugation equation."""
    if k < 1:
        raise ValueError("order must be >= 1")
    if len(history) < k - 1:
        raise ValueError(f"history must contain h^[1..{k - 1}], got {len(history)} orders")
    rec = _Recursion(f, omega)
    for h in history[: k - 1]:
        rec.push(h)
    return rec.next_order()


# tree expansion -----------------------------------------------------------------------------


def _tree_value(node, labels, f: Potential, omega: DiophantineFrequency):
    """``(momentum, scalar, mode)`` of a labelled subtree; the subtree value is ``scalar * mode``.

    ``labels`` is an iterator handing out node modes in depth-first order.
    """
    nu = next(labels)
    children = [_tree_value(ch, labels, f, omega) for ch in node[1]]
    mu = nu
    value = -f.coefficients[nu] / math.factorial(len(children))
    for cmu, cval, cnu in children:
        mu = _add(mu, cmu)
        value = value * cval * _dot(nu, cnu)
    div = omega.dot(mu)
    if div == 0:
        # lines carrying zero momentum contribute nothing
        return mu, 0 * value, nu
    return mu, value / div**2, nu


def tree_expansion_order(k: int, f: Potential, omega: DiophantineFrequency) -> TorusFourier:
    """``h^[k]`` as a sum over trees with ``k`` nodes and modes from supp f.

    Each node ``v`` with ``s_v`` children and mode ``nu_v`` contributes
    ``-f_{nu_v}/s_v!`` over the squared divisor of its line, and each line joining
    ``v`` to its parent ``w`` contributes ``nu_w . nu_v``.  Plane orderings of a
    shape are counted by the multiplicity from :func:`enumerate_trees`.
    """
    if not 1 <= k <= MAX_TREE_ORDER:
        raise ValueError(f"tree expansion is limited to 1 <= k <= {MAX_TREE_ORDER}")
    d = omega.d
    modes = f.support
    acc: dict = {}
    for tree, mult in enumerate_trees(k, 1):
        for labelling in itertools.product(modes, repeat=k):
            mu, value, nu = _tree_value(tree.node, iter(labelling), f, omega)
            if value == 0 or not any(mu):
                continue
            bucket = acc.setdefault(mu, [[] for _ in range(d)])
            for j in range(d):
                if nu[j]:
                    bucket[j].append(mult * value * nu[j])
    c = {mu: tuple(_total(t) for t in comps) for mu, comps in acc.items()}
    scale = max((abs(x) for v in c.values() for x in v), default=0)
    exact = all(_is_exact(x) for v in c.values() for x in v)
    return TorusFourier.from_lattice(d, c, tol=0 if exact else FLOAT_TOL * max(1, scale))


# residual of the conjugation equation ---------------------------------------------------------


@dataclass(frozen=True)
class ConjugationReport:
    epsilon: float
    order: int
    residual: float
    zero_mode: float
    truncation_tail: float
    grid_size: int
    flags: tuple = ()


def _grid(d: int, G: int, lib):
    if lib is np:
        axis = 2 * np.pi * np.arange(G) / G
    else:
        axis = np.array([2 * mpmath.pi * i / G for i in range(G)], dtype=object)
    return np.array(np.meshgrid(*([axis] * d), indexing="ij"))


def _modes(G: int) -> np.ndarray:
    return np.fft.fftfreq(G, 1.0 / G).astype(int)


def _dft(arr: np.ndarray, inverse: bool) -> np.ndarray:
    """Separable DFT on object arrays of mpmath numbers (normalised forward)."""
    G = arr.shape[0]
    sign = 1 if inverse else -1
    ks = _modes(G)
    W = np.array([[mpmath.expjpi(sign * 2 * int(k) * i / mpmath.mpf(G)) for i in range(G)] for k in ks], dtype=object)
    if inverse:
        W = W.T
    out = arr
    for axis in range(arr.ndim):
        out = np.moveaxis(np.tensordot(W, out, axes=([1], [axis])), 0, axis)
    return out / G**arr.ndim if not inverse else out


def verify_conjugation(H: Sequence[TorusFourier], f: Potential, omega: DiophantineFrequency, eps,
                       grid_size: int = 32, dps: int | None = None) -> ConjugationReport:
    """Sup over a ``grid_size^d`` grid of ``max_j |h_j + (omega.d)^{-2}(eps d_j f(alpha + h))|``.

    ``h = sum_{k<=K} eps^k h^[k]``.  The inverse operator acts on the DFT of the
    nonlinear term, so modes beyond the grid are dropped; ``truncation_tail``
    measures the largest inverted coefficient on the outer shell of the grid
    and the report is flagged when it is not small against the residual.
    With ``dps`` the evaluation runs in mpmath at that precision.
    """
    d = omega.d
    K = len(H)
    if dps is None:
        return _verify_float(H, f, omega, float(eps), grid_size, d, K)
    with mpmath.workdps(dps):
        return _verify_mp(H, f, omega, mpmath.mpf(eps), grid_size, d, K)


def _finish(eps, K, G, resid, zero, tail, flags, floor=0.0):
    flags = list(flags)
    if tail > max(1e-2 * resid, floor) and resid > 0:
        flags.append("support-truncation")
    if zero > 1e-10 * max(float(eps), 1e-300) and eps:
        flags.append("zero-mode")
    return ConjugationReport(float(eps), K, float(resid), float(zero), float(tail), G, tuple(flags))


def _shell(G: int, d: int) -> np.ndarray:
    m = np.abs(_modes(G))
    grids = np.meshgrid(*([m] * d), indexing="ij")
    return np.max(grids, axis=0) >= G // 2 - 1


def _divisor_grid(omega, G: int, d: int, lib):
    m = _modes(G)
    grids = np.meshgrid(*([m] * d), indexing="ij")
    if lib is np:
        return sum(float(w) * g for w, g in zip(omega, grids))
    out = np.empty(grids[0].shape, dtype=object)
    for idx in np.ndindex(out.shape):
        out[idx] = mpmath.fsum(w * int(g[idx]) for w, g in zip(omega, grids))
    return out


def _verify_float(H, f, omega, eps, G, d, K):
    alpha = _grid(d, G, np)
    h = np.zeros(alpha.shape)
    for k, hk in enumerate(H, start=1):
        h += eps**k * hk(alpha)
    shifted = alpha + h
    grad = np.zeros(alpha.shape)
    for nu, fnu in f.coefficients.items():
        s = np.sin(np.tensordot(nu, shifted, axes=1))
        for j in range(d):
            grad[j] -= float(fnu) * nu[j] * s
    div = _divisor_grid(omega.omega, G, d, np)
    zero_idx = (0,) * d
    safe = np.where(div == 0, 1.0, div)
    resid = np.zeros(alpha.shape)
    zero, tail = 0.0, 0.0
    shell = _shell(G, d)
    for j in range(d):
        coef = np.fft.fftn(eps * grad[j]) / G**d
        zero = max(zero, abs(coef[zero_idx]))
        inv = -coef / safe**2
        inv[zero_idx] = 0
        tail = max(tail, float(np.max(np.abs(inv[shell]))))
        resid[j] = h[j] + np.real(np.fft.ifftn(inv) * G**d)
    value = float(np.max(np.abs(resid)))
    flags = []
    if eps and value < 1e3 * np.finfo(float).eps * float(np.max(np.abs(h))):
        flags.append("precision-floor")
    # inverted coefficients below this are rounding noise, not lost support
    floor = 1e2 * np.finfo(float).eps * abs(eps)
    return _finish(eps, K, G, value, zero, tail, flags, floor)


def _verify_mp(H, f, omega, eps, G, d, K):
    alpha = _grid(d, G, mpmath)
    shape = alpha.shape[1:]
    h = np.zeros(alpha.shape, dtype=object)
    h[...] = mpmath.mpf(0)
    msin = np.frompyfunc(mpmath.sin, 1, 1)
    for k, hk in enumerate(H, start=1):
        w = eps**k
        for nu, vec in hk.sine.items():
            s = msin(sum(n * alpha[i] for i, n in enumerate(nu) if n))
            for j, x in enumerate(vec):
                if x:
                    h[j] = h[j] + (w * _mpf(x)) * s
    shifted = alpha + h
    grad = np.empty(alpha.shape, dtype=object)
    grad[...] = mpmath.mpf(0)
    for nu, fnu in f.coefficients.items():
        s = msin(sum(n * shifted[i] for i, n in enumerate(nu) if n))
        for j in range(d):
            if nu[j]:
                grad[j] = grad[j] - (_mpf(fnu) * nu[j]) * s
    div = _divisor_grid(tuple(_mpf(w) for w in omega.omega), G, d, mpmath)
    zero_idx = (0,) * d
    shell = _shell(G, d)
    resid = mpmath.mpf(0)
    zero, tail = mpmath.mpf(0), mpmath.mpf(0)
    for j in range(d):
        coef = _dft(eps * grad[j], inverse=False)
        zero = max(zero, abs(coef[zero_idx]))
        inv = np.empty(shape, dtype=object)
        for idx in np.ndindex(shape):
            inv[idx] = mpmath.mpc(0) if idx == zero_idx else -coef[idx] / div[idx] ** 2
            if shell[idx]:
                tail = max(tail, abs(inv[idx]))
        back = _dft(inv, inverse=True)
        for idx in np.ndindex(shape):
            resid = max(resid, abs(h[j][idx] + mpmath.re(back[idx])))
    return _finish(eps, K, G, resid, zero, tail, [])


@dataclass(frozen=True)
class ResidualStudy:
    reports: list
    slope: float
    intercept: float


def residual_study(H, f, omega, eps_grid, grid_size: int = 32, dps: int | None = None) -> ResidualStudy:
    """Residuals over an ``eps`` grid and the least-squares slope of ``log residual`` vs ``log eps``."""
    reports = [verify_conjugation(H, f, omega, e, grid_size, dps) for e in eps_grid]
    pts = [(math.log(r.epsilon), math.log(r.residual)) for r in reports if r.residual > 0 and r.epsilon > 0]
    if len(pts) < 2:
        return ResidualStudy(reports, math.nan, math.nan)
    x, y = np.array(pts).T
    slope, intercept = np.polyfit(x, y, 1)
    return ResidualStudy(reports, float(slope), float(intercept))


# decay of the coefficients -------------------------------------------------------------------


@dataclass(frozen=True)
class DecayFit:
    """Envelope ``|h^[k]_nu| <= c^k exp(-kappa |nu|)`` over the computed coefficients."""

    c: float
    kappa: float
    max_violation: float
    degenerate: bool
    points: int
    table: list = field(default_factory=list)


def decay_fit(H: Sequence[TorusFourier]) -> DecayFit:
    """Envelope ``log|h^[k]_nu| <= k log c - kappa |nu|`` with ``kappa >= 0``.

    ``(log c, kappa)`` come from a least-squares fit of the data, ``kappa``
    is clipped at 0, and ``log c`` is then raised to the smallest value that
    leaves no violations.  ``|h^[k]_nu|`` is the max over components.
    """
    if len(H) < 3:
        raise ValueError("decay fit needs at least three orders")
    table = []
    for k, h in enumerate(H, start=1):
        for nu, vec in h.sine.items():
            mag = max(abs(float(x)) for x in vec)
            if mag > 0:
                table.append({"k": k, "norm": l1(nu), "log_abs": math.log(mag)})
    if not table:
        return DecayFit(math.nan, math.nan, 0.0, True, 0, [])
    ks = np.array([r["k"] for r in table], dtype=float)
    ns = np.array([r["norm"] for r in table], dtype=float)
    ys = np.array([r["log_abs"] for r in table])
    (_, neg_kappa), *_ = np.linalg.lstsq(np.column_stack([ks, ns]), ys, rcond=None)
    kappa = max(0.0, -float(neg_kappa))
    L = float(np.max((ys + kappa * ns) / ks))
    viol = ys - (ks * L - kappa * ns)
    while np.max(viol) > 0:
        L = float(np.nextafter(L, math.inf))
        viol = ys - (ks * L - kappa * ns)
    return DecayFit(math.exp(L), kappa, float(np.max(viol)), False, len(table), table)
