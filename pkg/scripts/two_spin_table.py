"""Two-spin exchange-symmetric state: weights at the equatorial product points.

Prints the computed weight next to 2^(4s)/(64 s) and 2^(4s)/(64 s^2); the two
expressions agree only at s = 1.
"""
import argparse
import itertools
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from qcohere import ClassicalFamily, decompose
from qcohere.catalog import two_spin_noon


@dataclass
class Config:
    spins: list = field(default_factory=lambda: ["1", "3/2"])


def _same(a, b):
    d = abs((a - b) % (2 * np.pi))
    return min(d, 2 * np.pi - d) < 1e-6


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spins", nargs="+", default=Config().spins)
    cfg = Config(**vars(ap.parse_args()))
    logging.basicConfig(level=logging.ERROR)
    for s in map(Fraction, cfg.spins):
        dec = decompose(two_spin_noon(s), ClassicalFamily.spin_coherent_product(s))
        print(f"s = {s}: {dec.verdict.value}, residual {dec.residual_norm:.2e}, "
              f"{len(dec.weights)} stationary product states")
        print("  nA nB   weight     64s-form   64s^2-form")
        for na, nb in itertools.product(range(int(4 * s)), repeat=2):
            pa, pb = np.pi * na / (2 * s), np.pi * nb / (2 * s)
            w = next(w for (a, b, c, d), w in zip(dec.states.params, dec.weights)
                     if abs(a - np.pi / 2) < 1e-6 and abs(c - np.pi / 2) < 1e-6 and _same(b, pa) and _same(d, pb))
            sign = (-1) ** (na + nb + int(2 * s))
            print(f"  {na:2d} {nb:2d} {w:+.6f}  {sign * 2 ** (4 * float(s)) / (64 * float(s)):+.6f}  "
                  f"{sign * 2 ** (4 * float(s)) / (64 * float(s) ** 2):+.6f}")


if __name__ == "__main__":
    main()
