"""Ternary-logic qubit: smallest quasiprobability over the (p, |gamma|) plane.

Writes CSV columns p, gamma, min_weight, feasible, closed_form_feasible.
"""
import argparse
import csv
import logging
import sys
from dataclasses import dataclass

import numpy as np

from qcohere import ClassicalFamily, decompose
from qcohere.catalog import ternary_qubit_state


@dataclass
class Config:
    steps: int = 101
    out: str = "-"


def run(cfg: Config):
    fam = ClassicalFamily.ternary_qubit()
    rows = []
    for p in np.linspace(0, 1, cfg.steps):
        for g in np.linspace(0, 1, cfg.steps):
            dec = decompose(ternary_qubit_state(p, g), fam)
            closed = min(p, 1 - p) >= np.sqrt(p * (1 - p)) * g
            rows.append((p, g, float(dec.weights.min()), dec.feasible, closed))
    return rows


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--steps", type=int, default=Config.steps)
    ap.add_argument("--out", default=Config.out)
    cfg = Config(**vars(ap.parse_args()))
    logging.basicConfig(level=logging.ERROR)
    rows = run(cfg)
    f = sys.stdout if cfg.out == "-" else open(cfg.out, "w", newline="")
    w = csv.writer(f)
    w.writerow(["p", "gamma", "min_weight", "feasible", "closed_form_feasible"])
    w.writerows(rows)
    band = [r for r in rows if r[3] != r[4]]
    print(f"{len(rows)} points, {len(band)} disagreements (all should sit on the boundary)", file=sys.stderr)


if __name__ == "__main__":
    main()
