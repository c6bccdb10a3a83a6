"""Lagrange inversion of ``alpha = x - phi(x)`` and its decorated-tree expansion.

The k-th Lagrange term ``(1/k!) d^{k-1}/dalpha^{k-1} (phi(alpha)^k)`` equals a sum
over rooted trees with ``k`` nodes.  Every node ``v`` carries a component label
``j_v`` and stands for the tensor ``(1/k_v!) d^{k_v} phi_{j_v}`` whose derivative
directions are the labels of the ``k_v`` nodes entering it.  Trees that differ
only by reordering children are identified; the number of plane orderings of a
class is its multiplicity.

Trees are nested tuples ``(label, (child, child, ...))`` with children sorted,
which makes the tuple itself the canonical form.  Labels are 1-based.
"""
from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from itertools import product
from typing import Iterable, Sequence

from .series_core import EXACT, FLOAT, TruncatedSeries, radius_estimate

MAX_TREE_ORDER = 8
MAX_DIMENSION = 3


class InsufficientOrderError(ValueError):
    """A jet was asked for a derivative beyond its truncation order."""


# jets ------------------------------------------------------------------------


def _is_exact(c) -> bool:
    return isinstance(c, (int, Fraction)) and not isinstance(c, bool)


@dataclass(frozen=True)
class FunctionJet:
    """Taylor data of ``phi: R^n -> R^n`` around a base point.

    ``components[j]`` maps a multi-index ``m`` to ``d^m phi_j(base) / m!``.
    ``order=None`` marks a polynomial: coefficients absent from the map are
    known to vanish at every order.
    """

    components: tuple
    base: tuple
    order: int | None = None

    def __post_init__(self):
        n = len(self.components)
        if n < 1:
            raise ValueError("a jet needs at least one component")
        if len(self.base) != n:
            raise ValueError("base point dimension differs from component count")
        for comp in self.components:
            for m in comp:
                if len(m) != n:
                    raise ValueError(f"multi-index {m} has wrong length for n={n}")
                if self.order is not None and sum(m) > self.order:
                    raise ValueError(f"multi-index {m} exceeds jet order {self.order}")

    @property
    def n(self) -> int:
        return len(self.components)

    @property
    def exact(self) -> bool:
        values = [c for comp in self.components for c in comp.values()]
        return all(_is_exact(c) for c in values) and all(_is_exact(b) for b in self.base)

    @property
    def mode(self) -> str:
        return EXACT if self.exact else FLOAT

    def coefficient(self, j: int, m: Sequence[int]):
        """Taylor coefficient of component ``j`` (0-based) at multi-index ``m``."""
        m = tuple(m)
        if self.order is not None and sum(m) > self.order:
            raise InsufficientOrderError(
                f"jet of order {self.order} has no derivative of order {sum(m)}"
            )
        zero = Fraction(0) if self.exact else 0.0
        return self.components[j].get(m, zero)

    def derivative(self, j: int, directions: Iterable[int]):
        """``d^k phi_j / dx_{i1} ... dx_{ik}`` at the base, directions 0-based."""
        counts = [0] * self.n
        for i in directions:
            counts[i] += 1
        c = self.coefficient(j, counts)
        return c * math.prod(math.factorial(q) for q in counts)

    def as_series(self, order: int, j: int = 0) -> TruncatedSeries:
        """Scalar jet as a series in the displacement ``y`` from the base."""
        if self.n != 1:
            raise ValueError("as_series is defined for scalar jets only")
        if self.order is not None and order > self.order:
            raise InsufficientOrderError(f"jet of order {self.order} cannot supply order {order}")
        coeffs = [self.coefficient(j, (k,)) for k in range(order + 1)]
        return TruncatedSeries(tuple(coeffs), self.mode)

    # constructors -------------------------------------------------------

    @classmethod
    def scalar(cls, taylor: Sequence, base=0, order: int | None = None) -> "FunctionJet":
        """Scalar jet from Taylor coefficients ``phi(base + y) = sum taylor[m] y**m``."""
        comp = {(m,): c for m, c in enumerate(taylor) if c != 0}
        return cls((comp,), (base,), order)

    @classmethod
    def from_derivatives(cls, derivatives: Sequence, base=0) -> "FunctionJet":
        """Scalar jet from ``phi(base), phi'(base), ...``; order = len - 1."""
        taylor = [d / math.factorial(m) for m, d in enumerate(derivatives)]
        return cls.scalar(taylor, base, order=len(derivatives) - 1)

    @classmethod
    def from_polynomials(cls, polys: Sequence, base: Sequence | None = None) -> "FunctionJet":
        """Polynomial map given around 0, re-expanded exactly about ``base``.

        Each entry of ``polys`` is ``{exponent tuple: coefficient}`` or, for
        ``n = 1``, a plain coefficient list.
        """
        n = len(polys)
        if base is None:
            base = (0,) * n
        base = tuple(base)
        comps = []
        for p in polys:
            if not isinstance(p, dict):
                p = {(e,): c for e, c in enumerate(p)}
            comps.append(_shift_polynomial(p, base))
        return cls(tuple(comps), base, None)


def _shift_polynomial(poly: dict, base: tuple) -> dict:
    """Coefficients of ``p(base + y)`` in powers of ``y``."""
    out: dict = {}
    for expo, c in poly.items():
        if c == 0:
            continue
        # prod_i (b_i + y_i)^{e_i} = prod_i sum_{q_i} C(e_i, q_i) b_i^{e_i - q_i} y_i^{q_i}
        for qs in product(*(range(e + 1) for e in expo)):
            w = c
            for e, q, b in zip(expo, qs, base):
                w = w * math.comb(e, q) * b ** (e - q)
            if w != 0:
                out[qs] = out.get(qs, 0) + w
    return {m: v for m, v in out.items() if v != 0}


# decorated trees ----------------------------------------------------------------


def _node_size(node) -> int:
    return 1 + sum(_node_size(c) for c in node[1])


def _canonical(node):
    label, children = node
    return (label, tuple(sorted(_canonical(c) for c in children)))


@dataclass(frozen=True)
class DecoratedTree:
    """Rooted tree with component labels; ``node`` is the first node ``v0``.

    The root ``r`` itself is implicit: it receives the single line leaving
    ``v0`` and its label coincides with ``v0``'s.
    """

    node: tuple

    def __post_init__(self):
        object.__setattr__(self, "node", _canonical(self.node))

    @classmethod
    def _from_canonical(cls, node) -> "DecoratedTree":
        tree = object.__new__(cls)
        object.__setattr__(tree, "node", node)
        return tree

    @property
    def root_label(self) -> int:
        return self.node[0]

    @property
    def size(self) -> int:
        """Number of nodes, equal to the number of lines including the root line."""
        return _node_size(self.node)

    def nodes(self):
        """Depth-first iterator over ``(label, children)`` pairs."""
        stack = [self.node]
        while stack:
            v = stack.pop()
            yield v
            stack.extend(reversed(v[1]))

    def branching(self) -> list[int]:
        """The ``k_v`` (number of entering lines) of each node, depth-first."""
        return [len(v[1]) for v in self.nodes()]

    def multiplicity(self) -> int:
        return _multiplicity(self.node)

    def to_text(self) -> str:
        return _node_text(self.node)

    @classmethod
    def from_text(cls, text: str) -> "DecoratedTree":
        return cls(_parse_tree(text))

    def __str__(self):
        return self.to_text()


@lru_cache(maxsize=None)
def _multiplicity(node) -> int:
    """Number of plane orderings of the subtree (orbit of child permutations)."""
    label, children = node
    counts = Counter(children)
    m = math.factorial(len(children))
    for c in counts.values():
        m //= math.factorial(c)
    for ch in children:
        m *= _multiplicity(ch)
    return m


def _node_text(node) -> str:
    label, children = node
    inner = "".join(" " + _node_text(c) for c in children)
    return f"(j={label}{inner})"


_TOKEN = re.compile(r"\(j=(\d+)|\)")


def _parse_tree(text: str):
    stack: list = []
    result = None
    pos = 0
    text = text.strip()
    for m in _TOKEN.finditer(text):
        gap = text[pos:m.start()]
        if gap.strip():
            raise ValueError(f"unexpected text {gap!r} in tree encoding")
        pos = m.end()
        if m.group(1) is not None:
            stack.append((int(m.group(1)), []))
        else:
            if not stack:
                raise ValueError("unbalanced parentheses in tree encoding")
            label, children = stack.pop()
            node = (label, tuple(children))
            if stack:
                stack[-1][1].append(node)
            elif result is None:
                result = node
            else:
                raise ValueError("tree encoding holds more than one tree")
    if stack or result is None or text[pos:].strip():
        raise ValueError("malformed tree encoding")
    return result


@lru_cache(maxsize=None)
def _trees_of_size(size: int, n: int) -> tuple:
    """All canonical trees with ``size`` nodes and labels in ``1..n``, sorted."""
    if size == 1:
        return tuple((j, ()) for j in range(1, n + 1))
    # pool ordered by size so candidates for a remaining budget form a prefix
    pool = [t for s in range(1, size) for t in _trees_of_size(s, n)]
    sizes = [_node_size(t) for t in pool]
    bound = {r: sum(1 for z in sizes if z <= r) for r in range(size)}

    @lru_cache(maxsize=None)
    def forests(remaining: int, start: int) -> tuple:
        if remaining == 0:
            return ((),)
        out = []
        for i in range(start, bound[remaining]):
            for rest in forests(remaining - sizes[i], i):
                out.append((pool[i],) + rest)
        return tuple(out)

    canon = sorted(tuple(sorted(f)) for f in forests(size - 1, 0))
    return tuple((j, f) for j in range(1, n + 1) for f in canon)


def enumerate_trees(k: int, n: int = 1, root_label: int | None = None) -> list:
    """Canonical decorated trees with ``k`` nodes and their multiplicities.

    Returns ``[(DecoratedTree, multiplicity), ...]`` in canonical order.  With
    ``root_label`` given only trees whose first node carries that label are kept.
    """
    if not 1 <= k <= MAX_TREE_ORDER:
        raise ValueError(f"tree order k={k} outside 1..{MAX_TREE_ORDER}")
    if not 1 <= n <= MAX_DIMENSION:
        raise ValueError(f"dimension n={n} outside 1..{MAX_DIMENSION}")
    out = []
    for node in _trees_of_size(k, n):
        if root_label is not None and node[0] != root_label:
            continue
        out.append((DecoratedTree._from_canonical(node), _multiplicity(node)))
    return out


def _node_value(node, jet: FunctionJet):
    label, children = node
    kv = len(children)
    d = jet.derivative(label - 1, [c[0] - 1 for c in children])
    val = d / math.factorial(kv) if not jet.exact else Fraction(d, math.factorial(kv))
    for c in children:
        val = val * _node_value(c, jet)
    return val


def tree_value(tree: DecoratedTree, jet: FunctionJet):
    """Product over nodes of ``(1/k_v!) d^{k_v} phi_{j_v}`` at the jet's base point."""
    if not isinstance(tree, DecoratedTree):
        tree = DecoratedTree(tree)
    if jet.order is not None and max(tree.branching()) > jet.order:
        raise InsufficientOrderError("jet order is below the largest node branching")
    if max(v[0] for v in tree.nodes()) > jet.n:
        raise ValueError("tree label exceeds jet dimension")
    return _node_value(tree.node, jet)


def tree_sum(k: int, jet: FunctionJet, j: int = 1):
    """``sum_theta multiplicity * Val(theta)`` over trees whose first node has label ``j``."""
    zero = Fraction(0) if jet.exact else 0.0
    terms = [m * tree_value(t, jet) for t, m in enumerate_trees(k, jet.n, root_label=j)]
    if jet.exact:
        return sum(terms, zero)
    return math.fsum(terms)


# Lagrange series -----------------------------------------------------------------


def lagrange_term(k: int, jet: FunctionJet, psi: FunctionJet | None = None):
    """``(1/k!) d^{k-1}(phi^k dpsi)`` at the base point, scalar case.

    ``psi=None`` means ``psi(x) = x``.
    """
    if jet.n != 1:
        raise ValueError("the direct Lagrange term is scalar only; use tree_sum for n > 1")
    if k < 1:
        raise ValueError("k must be >= 1")
    phi = jet.as_series(k - 1)
    if psi is None:
        dpsi = TruncatedSeries.constant(1, k - 1, phi.mode)
    else:
        if psi.n != 1:
            raise ValueError("psi must be scalar")
        if psi.order is not None and psi.order < k:
            raise InsufficientOrderError(f"psi jet of order {psi.order} < k={k}")
        dpsi = psi.as_series(k).derivative()
        if dpsi.mode != phi.mode:
            dpsi = dpsi.to_float()
            phi = phi.to_float()
    prod_ = phi**k * dpsi
    return prod_[k - 1] / k


def _pad(series: TruncatedSeries, order: int) -> TruncatedSeries:
    zero = series._zero()
    coeffs = series.coefficients + (zero,) * max(0, order - series.order)
    return TruncatedSeries(coeffs[: order + 1], series.mode)


def invert_series(jet: FunctionJet, K: int, variable: str = "alpha"):
    """Solve ``alpha = x - phi(x)`` for ``x`` as a truncated series.

    ``variable="alpha"``
        Scalar jet about 0 with ``phi(0) = phi'(0) = 0``; returns ``x(alpha)``
        through ``alpha**K``.  Each power of ``alpha`` then collects finitely
        many Lagrange terms.
    ``variable="strength"``
        ``phi -> t*phi``; returns ``x`` as a series in ``t`` whose constant term
        is the base point and whose ``t**k`` coefficient is the k-th Lagrange
        term.  Vector jets (``n <= 3``) go through the tree sum and return one
        series per component.
    """
    if K < 1:
        raise ValueError("K must be >= 1")
    if variable == "strength":
        if jet.n == 1:
            coeffs = [jet.base[0]] + [lagrange_term(k, jet) for k in range(1, K + 1)]
            return TruncatedSeries(tuple(coeffs), jet.mode)
        if jet.n > MAX_DIMENSION:
            raise ValueError(f"dimension {jet.n} above {MAX_DIMENSION}")
        return tuple(
            TruncatedSeries(
                (jet.base[j - 1],) + tuple(tree_sum(k, jet, j) for k in range(1, K + 1)),
                jet.mode,
            )
            for j in range(1, jet.n + 1)
        )
    if variable != "alpha":
        raise ValueError("variable must be 'alpha' or 'strength'")
    if jet.n != 1:
        raise ValueError("alpha-series inversion is scalar; use variable='strength' for n > 1")
    if jet.base[0] != 0:
        raise ValueError("alpha-series inversion needs a jet about 0")
    if jet.coefficient(0, (0,)) != 0 or jet.coefficient(0, (1,)) != 0:
        raise ValueError(
            "alpha-series inversion needs phi(0) = phi'(0) = 0; "
            "otherwise every power of alpha receives infinitely many terms"
        )
    phi = jet.as_series(K) if jet.order is not None else _pad(
        TruncatedSeries(tuple(jet.coefficient(0, (m,)) for m in range(K + 1)), jet.mode), K
    )
    x = TruncatedSeries.variable(K, phi.mode)
    for k in range(1, K):
        # coefficients of phi above K only reach degrees > K + k - 1
        big = _pad(phi, K + k - 1)
        term = big**k
        for _ in range(k - 1):
            term = term.derivative()
        term = term / math.factorial(k)
        x = x + term.truncate(K)
    return x


def check_inversion(jet: FunctionJet, x: TruncatedSeries) -> TruncatedSeries:
    """``x(alpha) - phi(x(alpha)) - alpha``; vanishes through the order of ``x``."""
    K = x.order
    phi = jet.as_series(K) if jet.order is not None else TruncatedSeries(
        tuple(jet.coefficient(0, (m,)) for m in range(K + 1)), jet.mode
    )
    return x - phi.compose(x) - TruncatedSeries.variable(K, x.mode)


def jet_compose(jet: FunctionJet, j: int, displacements: Sequence[TruncatedSeries]) -> TruncatedSeries:
    """``phi_j(base + d(t))`` for series ``d_i(t)`` with zero constant terms (0-based ``j``)."""
    K = min(d.order for d in displacements)
    if jet.order is not None and jet.order < K:
        raise InsufficientOrderError("jet order too low for the requested composition order")
    mode = displacements[0].mode
    out = TruncatedSeries.constant(0, K, mode)
    powers = [[TruncatedSeries.constant(1, K, mode)] for _ in displacements]
    for m, c in jet.components[j].items():
        if sum(m) > K:
            continue
        term = TruncatedSeries.constant(1, K, mode)
        for i, e in enumerate(m):
            while len(powers[i]) <= e:
                powers[i].append(powers[i][-1] * displacements[i].truncate(K))
            term = term * powers[i][e]
        out = out + term * c
    return out


# fixed points ---------------------------------------------------------------------


@dataclass
class FixedPointResult:
    series: TruncatedSeries
    partial_sums: list
    value: float
    status: str
    radius: float | None = None
    notes: list = field(default_factory=list)

    @property
    def divergent(self) -> bool:
        return self.status == "divergent"


def fixed_point_value(jet: FunctionJet, K: int) -> FixedPointResult:
    """Partial sums of ``x(0) = sum_k (1/k!) d^{k-1}(phi^k)|_0`` for ``x = phi(x)``.

    The terms are the coefficients of the series in a strength ``t`` obtained
    by ``phi -> t*phi``; the value reported is the partial sum at ``t = 1``.
    Which root the sum selects is whatever the partial sums do, nothing is
    assumed in advance.
    """
    if jet.n != 1:
        raise ValueError("fixed_point_value is scalar only")
    if jet.base[0] != 0:
        raise ValueError("fixed_point_value needs a jet about 0")
    terms = [Fraction(0) if jet.exact else 0.0] + [lagrange_term(k, jet) for k in range(1, K + 1)]
    series = TruncatedSeries(tuple(terms), jet.mode)
    partial, acc = [], 0.0
    for c in terms[1:]:
        acc += float(c)
        partial.append(acc)
    notes = []
    nonzero = [k for k in range(1, K + 1) if terms[k] != 0]
    radius = None
    if not nonzero or nonzero[-1] < K // 2:
        status = "terminating"
        notes.append("no nonzero terms in the second half; the sum is finite")
    else:
        try:
            est = radius_estimate(series.to_float())
            radius = est.radius
            notes.extend(est.flags)
        except ValueError as exc:
            notes.append(f"radius estimate unavailable: {exc}")
        if radius is None:
            a, b = nonzero[-2:] if len(nonzero) > 1 else (nonzero[-1], nonzero[-1])
            ratio = abs(float(terms[b]) / float(terms[a])) ** (1.0 / max(1, b - a)) if a != b else 0.0
            radius = 1.0 / ratio if ratio > 0 else math.inf
        status = "convergent" if radius > 1.0 else "divergent"
    return FixedPointResult(series, partial, partial[-1] if partial else 0.0, status, radius, notes)
