"""Residual of the torus conjugation equation vs eps, per truncation order, plus decay fit.

    python scripts/lindstedt_residual.py --system golden2d --K 4 --dps 40
"""
from __future__ import annotations

import argparse
from dataclasses import dataclass

import mpmath
import numpy as np

from pertlab import lindstedt


@dataclass
class Config:
    system: str = "golden2d"
    K: int = 4
    dps: int = 40
    grid: int = 24
    eps: tuple = tuple(np.logspace(-4, -2, 5))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--system", choices=sorted(lindstedt.SYSTEMS), default=Config.system)
    ap.add_argument("--K", type=int, default=Config.K)
    ap.add_argument("--dps", type=int, default=Config.dps, help="0 for double precision")
    ap.add_argument("--grid", type=int, default=Config.grid)
    args = ap.parse_args()
    cfg = Config(args.system, args.K, args.dps, args.grid)
    dps = cfg.dps or None
    sysm = lindstedt.golden2d(dps) if cfg.system == "golden2d" else lindstedt.pendulum1d()
    with mpmath.workdps(cfg.dps or 15):
        H = lindstedt.lindstedt_series(sysm.potential, sysm.frequency, cfg.K)
    for k, h in enumerate(H, start=1):
        print(f"order {k}: {len(h.sine)} modes, support radius {h.support_radius}, max |coef| {h.max_abs():.4g}")
    for K in range(1, cfg.K + 1):
        study = lindstedt.residual_study(H[:K], sysm.potential, sysm.frequency, cfg.eps, cfg.grid, dps)
        res = " ".join(f"{r.residual:.2e}" for r in study.reports)
        print(f"K={K}: slope {study.slope:6.3f} (expected {K + 1})  residuals {res}")
    if cfg.K >= 3:
        fit = lindstedt.decay_fit(H)
        print(f"decay envelope c={fit.c:.4f} kappa={fit.kappa:.4f} max violation {fit.max_violation:.1e}")
    rep = lindstedt.small_divisor_report(sysm.frequency, 30, top=5)
    print("smallest divisors:", ", ".join(f"{nu}:{float(v):.3g}" for nu, v, _ in rep.offenders))


if __name__ == "__main__":
    main()
