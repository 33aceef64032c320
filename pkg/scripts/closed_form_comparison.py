"""Canonical weights versus the one-parameter closed-form solution families.

For the ternary qubit and the Pauli-diagonal two-qubit states the Gram
system has a kernel, and the closed forms are affine families in free
parameters (r, q). This script checks that the engine's weights lie on those
families, prints the fitted parameters, and compares them with the
mid-interval choices (the engine's tie-break is the minimum-norm point).
"""
import itertools
import logging

import numpy as np

from qcohere import ClassicalFamily, decompose
from qcohere.catalog import pauli_two_qubit, ternary_qubit_state

AX = {"z": np.array([[1, 0], [0, -1]]), "x": np.array([[0, 1], [1, 0]]), "y": np.array([[0, -1j], [1j, 0]])}


def ternary():
    print("ternary qubit: p = (p+r, 1-p+r, c-r, -c-r), c = sqrt(p(1-p))|gamma|")
    for p, g in [(0.5, 0.3), (0.3, 0.4), (0.2, 0.9), (0.5, 1.0)]:
        dec = decompose(ternary_qubit_state(p, g), ClassicalFamily.ternary_qubit())
        w = dict(zip(dec.labels, dec.weights))
        c = np.sqrt(p * (1 - p)) * g
        eq = sorted((k for k in w if k.startswith("|φ")), key=lambda k: -w[k])
        r = w["|0>"] - p
        vec = np.array([w["|0>"], w["|1>"], w[eq[0]], w[eq[1]]])
        ref = np.array([p + r, 1 - p + r, c - r, -c - r])
        mid = -(min(p, 1 - p) + c) / 2
        print(f"  p={p:.2f} |g|={g:.2f}: r={r:+.6f} on-family err={np.abs(vec - ref).max():.1e} "
              f"mid-interval r={mid:+.6f} feasible={dec.feasible}")


def _label_vec(rho, dec):
    out = {}
    for w in "zxy":
        _, v = np.linalg.eigh(AX[w])
        for (i, sa), (j, sb) in itertools.product(enumerate("-+"), repeat=2):
            ref = np.kron(v[:, i], v[:, j])
            for st, pk in zip(dec.states.states, dec.weights):
                if abs(np.vdot(ref, st.amplitudes)) ** 2 > 1 - 1e-8:
                    out[(w, sa, sb)] = pk
    return out


def pauli():
    print("Pauli-diagonal states, complex products: base + (r+q, -r, -q) pattern")
    for rx, ry, rz in [(0.2, 0.3, -0.1), (0.1, -0.4, 0.3), (0.75, -0.75, 0.75)]:
        rho = pauli_two_qubit(rx, ry, rz)
        dec = decompose(rho, ClassicalFamily.product())
        w = _label_vec(rho, dec)
        rho_w = {"z": rz, "x": rx, "y": ry}
        sign = lambda a, b: 1 if a == b else -1
        base = {k: 1 / 12 + sign(k[1], k[2]) * rho_w[k[0]] / 4 for k in w}
        r = -np.mean([w[k] - base[k] for k in w if k[0] == "x"])
        q = -np.mean([w[k] - base[k] for k in w if k[0] == "y"])
        shift = {"z": r + q, "x": -r, "y": -q}
        err = max(abs(w[k] - base[k] - shift[k[0]]) for k in w)
        sym_r = (abs(rz) + abs(ry) - 2 * abs(rx)) / 12
        sym_q = (abs(rz) + abs(rx) - 2 * abs(ry)) / 12
        print(f"  ({rx}, {ry}, {rz}): {len(w)}/12 products, r={r:+.6f} q={q:+.6f} on-family err={err:.1e}; "
              f"symmetric choice r={sym_r:+.6f} q={sym_q:+.6f}; {dec.verdict.value}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.ERROR)
    ternary()
    pauli()
