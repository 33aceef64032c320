"""Spin cat states over spin coherent states: stationary points and weights.

For each s the poles carry 1/2 and the 4s equatorial points at
phi_n = pi n / (2 s) carry (-1)^n 2^(2s) / (8 s).
"""
import argparse
import logging
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from qcohere import ClassicalFamily, decompose
from qcohere.catalog import spin_cat


@dataclass
class Config:
    spins: list = field(default_factory=lambda: ["1", "3/2", "2", "5/2", "3"])


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--spins", nargs="+", default=Config().spins)
    cfg = Config(**vars(ap.parse_args()))
    logging.basicConfig(level=logging.ERROR)
    print("s,theta,phi,weight,closed_form")
    for s in map(Fraction, cfg.spins):
        dec = decompose(spin_cat(s), ClassicalFamily.spin_coherent(s))
        for (th, ph), w in zip(dec.states.params, dec.weights):
            if abs(th - np.pi / 2) < 1e-9:
                n = int(round(ph / (np.pi / (2 * s)))) % int(4 * s)
                ref = (-1) ** n * 2 ** (2 * s) / (8 * s)
            else:
                ref = 0.5
            print(f"{s},{th:.6f},{ph:.6f},{w:+.12f},{float(ref):+.12f}")


if __name__ == "__main__":
    main()
