"""Noisy generalized Smolin states: verdict and negativity versus the noise level."""
import argparse
import logging
from dataclasses import dataclass

import numpy as np

from qcohere import ClassicalFamily, decompose
from qcohere.catalog import noisy_smolin


@dataclass
class Config:
    parties: int = 4
    steps: int = 21


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--parties", type=int, default=Config.parties)
    ap.add_argument("--steps", type=int, default=Config.steps)
    cfg = Config(**vars(ap.parse_args()))
    logging.basicConfig(level=logging.ERROR)
    print("eta,verdict,negativity,min_weight,stationary_states")
    for eta in np.linspace(0, 1, cfg.steps):
        dec = decompose(noisy_smolin(cfg.parties, eta), ClassicalFamily.product())
        print(f"{eta:.4f},{dec.verdict.value},{dec.negativity:.6f},{dec.weights.min():+.6f},{len(dec.weights)}")


if __name__ == "__main__":
    main()
