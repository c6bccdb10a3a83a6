"""Eccentric anomaly by four routes across eccentricities: Newton, e-series, Bessel, eta.

    python scripts/kepler_compare.py --l 1.0 --K 20
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

from pertlab import kepler


@dataclass
class Config:
    l: float = 1.0
    eccentricities: tuple = (0.1, 0.3, 0.5, 0.65, 0.7, 0.8, 0.9)
    K: int = 20
    N: int = 200
    K_eta: int = 60


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--l", type=float, default=Config.l)
    ap.add_argument("--K", type=int, default=Config.K)
    ap.add_argument("--N", type=int, default=Config.N)
    ap.add_argument("--K-eta", dest="K_eta", type=int, default=Config.K_eta)
    args = ap.parse_args()
    cfg = Config(l=args.l, K=args.K, N=args.N, K_eta=args.K_eta)
    r = kepler.laplace_limit(1e-12)
    print(f"Laplace limit r* = {r:.15f}")
    print(f"{'e':>5} {'eta(e)':>8} {'lagrange':>11} {'bessel':>11} {'eta':>11}")
    for e in cfg.eccentricities:
        rows = {row["method"]: row for row in kepler.compare_methods(e, cfg.l, cfg.K, cfg.N, cfg.K_eta)}
        lag = rows["lagrange"]
        mark = "*" if lag["flag"] else " "
        print(f"{e:>5.2f} {kepler.eta_map(e):>8.4f} {lag['abs_error_vs_newton']:>10.2e}{mark} "
              f"{rows['bessel']['abs_error_vs_newton']:>11.2e} {rows['eta']['abs_error_vs_newton']:>11.2e}")
    print("* e-series flagged divergent (e beyond the fitted radius)")


if __name__ == "__main__":
    main()
