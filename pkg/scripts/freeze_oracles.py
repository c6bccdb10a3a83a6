"""Compute reference values with independent tools and freeze them to tests/data/oracles.json.

Nothing here imports pertlab.  Run once; the tests read the frozen file.

    python scripts/freeze_oracles.py
"""
from __future__ import annotations

import json
import math
from pathlib import Path

import mpmath
import sympy as sp
from scipy import special

OUT = Path(__file__).resolve().parents[1] / "tests" / "data" / "oracles.json"
DPS = 40


def kepler_sine_coefficients(kmax: int) -> dict:
    """(1/k!) d^{k-1} sin^k(l) expanded in sin(n l), by symbolic differentiation and integration."""
    l = sp.symbols("l", real=True)
    out = {}
    for k in range(1, kmax + 1):
        expr = sp.diff(sp.sin(l) ** k, l, k - 1) / sp.factorial(k)
        coeffs = {}
        for n in range(1, k + 1):
            b = sp.integrate(sp.expand_trig(expr * sp.sin(n * l)), (l, 0, 2 * sp.pi)) / sp.pi
            b = sp.nsimplify(sp.simplify(b))
            if b != 0:
                coeffs[str(n)] = str(b)
        out[str(k)] = coeffs
    return out


def kepler_newton_points() -> list:
    mpmath.mp.dps = DPS
    rows = []
    for e in ("0.1", "0.3", "0.5", "0.8", "0.9", "0.95"):
        for l in ("0.25", "1", "2", "3"):
            E, L = mpmath.mpf(e), mpmath.mpf(l)
            xi = mpmath.findroot(lambda x: x - E * mpmath.sin(x) - L, L + E * mpmath.sin(L))
            beta = mpmath.sqrt((1 + E) / (1 - E))
            u = 2 * mpmath.atan(beta * mpmath.tan(xi / 2))
            if u < 0:
                u += 2 * mpmath.pi
            rows.append({"e": e, "l": l, "xi": mpmath.nstr(xi, 30), "u": mpmath.nstr(u, 30)})
    return rows


def laplace_limit() -> str:
    mpmath.mp.dps = DPS
    f = lambda x: x * mpmath.exp(mpmath.sqrt(1 + x * x)) / (1 + mpmath.sqrt(1 + x * x)) - 1
    return mpmath.nstr(mpmath.findroot(f, 0.66), 30)


def bessel_values() -> list:
    rows = []
    for n in (0, 1, 2, 5, 10, 30, 50, 100, 200):
        for x in (0.5, 3.0, 10.0, 0.9 * n if n else 1.0, 0.5 * n if n else 2.0):
            rows.append({"n": n, "x": x, "J": repr(float(special.jv(n, x)))})
    return rows


def eta_taylor(order: int) -> list:
    e = sp.symbols("e")
    s = sp.sqrt(1 - e**2)
    expr = e * sp.exp(s) / (1 + s)
    ser = sp.series(expr, e, 0, order + 1).removeO()
    return [str(sp.N(ser.coeff(e, m), 30)) for m in range(order + 1)]


def pendulum_lindstedt(kmax: int) -> dict:
    """h'' = eps sin(alpha + h) for f = cos(alpha), omega = 1, solved in z = exp(i alpha)."""
    z, eps = sp.symbols("z eps")
    hs = []
    out = {}
    for k in range(1, kmax + 1):
        H = sum((eps ** (j + 1) * hj for j, hj in enumerate(hs)), sp.Integer(0))
        E = sum(((sp.I * H) ** m / sp.factorial(m) for m in range(k)), sp.Integer(0))
        Einv = sum(((-sp.I * H) ** m / sp.factorial(m) for m in range(k)), sp.Integer(0))
        rhs = sp.expand((z * E - Einv / z) / (2 * sp.I))
        rhs_k = sp.expand(rhs.coeff(eps, k - 1))
        terms = sp.Poly(sp.expand(rhs_k * z ** (2 * k)), z).as_dict()
        hk = sp.Integer(0)
        for (p,), c in terms.items():
            n = p - 2 * k
            if n == 0:
                assert sp.simplify(c) == 0, "secular term"
                continue
            hk += -c / n**2 * z**n
        hk = sp.expand(hk)
        hs.append(hk)
        sine = {}
        poly = sp.Poly(sp.expand(hk * z ** (2 * k)), z).as_dict()
        for (p,), c in poly.items():
            n = p - 2 * k
            if n > 0:
                # c z^n + c' z^-n with c' = -c is 2 i c sin(n alpha)
                s = sp.nsimplify(sp.simplify(2 * sp.I * c))
                if s != 0:
                    sine[str(n)] = str(s)
        out[str(k)] = sine
    return out


def main():
    data = {
        "kepler_sine_coefficients": kepler_sine_coefficients(8),
        "kepler_points": kepler_newton_points(),
        "laplace_limit": laplace_limit(),
        "bessel": bessel_values(),
        "eta_taylor": eta_taylor(12),
        "pendulum_lindstedt": pendulum_lindstedt(5),
        "rooted_tree_counts": [1, 1, 2, 4, 9, 20, 48, 115],
        "catalan": [math.comb(2 * n, n) // (n + 1) for n in range(12)],
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(data, indent=1) + "\n")
    print(f"wrote {OUT}")


if __name__ == "__main__":
    main()
