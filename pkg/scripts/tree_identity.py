"""Tree sums against the direct Lagrange term for random rational jets; counts of tree shapes.

    python scripts/tree_identity.py --trials 50 --kmax 6
"""
from __future__ import annotations

import argparse
import random
from dataclasses import dataclass
from fractions import Fraction

from pertlab.inversion import FunctionJet, enumerate_trees, lagrange_term, tree_sum


@dataclass
class Config:
    trials: int = 20
    kmax: int = 6
    seed: int = 0


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=Config.trials)
    ap.add_argument("--kmax", type=int, default=Config.kmax)
    ap.add_argument("--seed", type=int, default=Config.seed)
    cfg = Config(**vars(ap.parse_args()))
    rng = random.Random(cfg.seed)
    print("k  shapes  plane orderings")
    for k in range(1, cfg.kmax + 1):
        trees = enumerate_trees(k, 1)
        print(f"{k}  {len(trees):>6}  {sum(m for _, m in trees):>15}")
    bad = 0
    for _ in range(cfg.trials):
        coeffs = [Fraction(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(5)]
        jet = FunctionJet.from_polynomials([coeffs], (Fraction(rng.randint(-3, 3), 2),))
        bad += sum(tree_sum(k, jet) != lagrange_term(k, jet) for k in range(1, cfg.kmax + 1))
    print(f"{cfg.trials * cfg.kmax} exact comparisons, {bad} mismatches")


if __name__ == "__main__":
    main()
