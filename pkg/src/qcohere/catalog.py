"""Named example states.

Every builder returns a validated, trace-one, positive semidefinite
HermitianOperator. ``build(name)`` resolves strings such as
``"spin-cat:s=3/2"`` or ``"smolin:N=4,eta=0.5"``.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import reduce
from typing import Callable

import numpy as np

from .families import parse_spin
from .operators import HermitianOperator

SIGMA_0 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PSD_TOL = 1e-10


class CatalogError(ValueError):
    pass


def _projector(v: np.ndarray, dims=None) -> HermitianOperator:
    v = v / np.linalg.norm(v)
    return HermitianOperator(np.outer(v, v.conj()), dims)


def _check_psd(m: np.ndarray, what: str) -> None:
    lo = np.linalg.eigvalsh(m).min()
    if lo < -PSD_TOL:
        raise CatalogError(f"{what}: parameters give a non-positive operator (min eigenvalue {lo:.3e})")


def qudit_superposition(d: int) -> HermitianOperator:
    """|phi><phi| with |phi> = (|0> + ... + |d-1>)/sqrt(d)."""
    if int(d) != d or d < 2:
        raise CatalogError("d must be an integer >= 2")
    return _projector(np.ones(int(d), dtype=complex))


def spin_cat(s) -> HermitianOperator:
    """Projector onto (|-s> + |s>)/sqrt(2); basis index k holds m = s - k."""
    s = parse_spin(s)
    if s < 1:
        raise CatalogError("spin_cat needs s >= 1")
    d = int(2 * s) + 1
    v = np.zeros(d, dtype=complex)
    v[0] = v[-1] = 1.0
    return _projector(v)


def two_spin_noon(s) -> HermitianOperator:
    """(|s,-s> + (-1)^{2s} |-s,s>)/sqrt(2) on two spins."""
    s = parse_spin(s)
    if s < 1:
        raise CatalogError("two_spin_noon needs s >= 1")
    d = int(2 * s) + 1
    top, bottom = np.eye(d)[0], np.eye(d)[-1]
    sign = (-1) ** int(2 * s)
    v = np.kron(top, bottom) + sign * np.kron(bottom, top)
    return _projector(v.astype(complex), (d, d))


def pauli_two_qubit(rho_x: float, rho_y: float, rho_z: float) -> HermitianOperator:
    """(sigma_0 x sigma_0 + sum_w rho_w sigma_w x sigma_w)/4."""
    ev = pauli_eigenvalues(rho_x, rho_y, rho_z)
    if ev.min() < -PSD_TOL:
        raise CatalogError(f"({rho_x}, {rho_y}, {rho_z}) lies outside the physical tetrahedron")
    m = (np.kron(SIGMA_0, SIGMA_0) + rho_x * np.kron(SIGMA_X, SIGMA_X)
         + rho_y * np.kron(SIGMA_Y, SIGMA_Y) + rho_z * np.kron(SIGMA_Z, SIGMA_Z)) / 4
    return HermitianOperator(m, (2, 2))


def pauli_eigenvalues(rho_x, rho_y, rho_z) -> np.ndarray:
    """Closed-form spectrum of ``pauli_two_qubit``."""
    return np.array([
        1 + rho_z + rho_x - rho_y,
        1 + rho_z - rho_x + rho_y,
        1 - rho_z + rho_x + rho_y,
        1 - rho_z - rho_x - rho_y,
    ]) / 4


def generalized_smolin(N: int, rho_x: float, rho_y: float, rho_z: float) -> HermitianOperator:
    """(sigma_0^N + rho_z sigma_z^N + rho_x sigma_x^N + rho_y sigma_y^N)/2^N."""
    if int(N) != N or N < 2:
        raise CatalogError("N must be an integer >= 2")
    N = int(N)
    power = lambda m: reduce(np.kron, [m] * N)
    m = (power(SIGMA_0) + rho_z * power(SIGMA_Z) + rho_x * power(SIGMA_X)
         + rho_y * power(SIGMA_Y)) / 2 ** N
    _check_psd(m, "generalized_smolin")
    return HermitianOperator(m, (2,) * N)


def noisy_smolin(N: int, eta: float) -> HermitianOperator:
    """Smolin-type state mixed with white noise: all three correlations equal eta."""
    return generalized_smolin(N, eta, eta, eta)


def ternary_qubit_state(p: float, gamma: complex) -> HermitianOperator:
    """p|0><0| + (1-p)|1><1| + sqrt(p(1-p)) (gamma|1><0| + gamma*|0><1|)."""
    if not 0 <= p <= 1:
        raise CatalogError("p must lie in [0, 1]")
    if abs(gamma) > 1 + 1e-12:
        raise CatalogError("|gamma| must not exceed 1")
    c = np.sqrt(p * (1 - p))
    m = np.array([[p, c * np.conj(gamma)], [c * gamma, 1 - p]], dtype=complex)
    return HermitianOperator(m)


def rho_prime() -> HermitianOperator:
    """(|0><0| + 2|1><1|)/3."""
    return HermitianOperator(np.diag([1, 2]).astype(complex) / 3)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    builder: Callable
    params: tuple[str, ...]
    description: str
    defaults: tuple = ()


def _complex(x: str) -> complex:
    return complex(x.replace("i", "j").replace(" ", ""))


CATALOG: dict[str, CatalogEntry] = {e.name: e for e in [
    CatalogEntry("qudit", lambda d: qudit_superposition(int(d)), ("d",),
                 "uniform superposition of d basis states"),
    CatalogEntry("spin-cat", lambda s: spin_cat(s), ("s",), "(|-s> + |s>)/sqrt(2)"),
    CatalogEntry("noon", lambda s: two_spin_noon(s), ("s",),
                 "two-spin (|s,-s> +- |-s,s>)/sqrt(2)"),
    CatalogEntry("pauli", lambda rx, ry, rz: pauli_two_qubit(float(rx), float(ry), float(rz)),
                 ("rx", "ry", "rz"), "two-qubit Pauli-diagonal family", ("0", "0", "0")),
    CatalogEntry("smolin", lambda N, eta=None, rx=None, ry=None, rz=None: (
        noisy_smolin(int(N), float(eta)) if eta is not None
        else generalized_smolin(int(N), float(rx or 0), float(ry or 0), float(rz or 0))),
                 ("N", "eta", "rx", "ry", "rz"), "generalized Smolin state"),
    CatalogEntry("ternary-qubit", lambda p, gamma: ternary_qubit_state(float(p), _complex(gamma)),
                 ("p", "gamma"), "qubit with population p and coherence gamma"),
    CatalogEntry("rho-prime", lambda: rho_prime(), (), "(|0><0| + 2|1><1|)/3"),
]}


def parse_name(name: str) -> tuple[str, dict[str, str]]:
    head, _, rest = name.strip().partition(":")
    params = {}
    if rest:
        for item in rest.split(","):
            key, eq, val = item.partition("=")
            if not eq:
                raise CatalogError(f"malformed parameter {item!r} in {name!r}")
            params[key.strip()] = val.strip()
    return head.strip(), params


def build(name: str) -> HermitianOperator:
    """Build a catalog state from a name such as ``"pauli:rx=0.5,ry=0,rz=0"``."""
    head, params = parse_name(name)
    if head not in CATALOG:
        raise CatalogError(f"unknown catalog state {head!r}; known: {', '.join(CATALOG)}")
    entry = CATALOG[head]
    unknown = set(params) - set(entry.params)
    if unknown:
        raise CatalogError(f"unknown parameters for {head}: {sorted(unknown)}")
    if head == "pauli":
        params = {k: params.get(k, "0") for k in entry.params}
    try:
        return entry.builder(**params)
    except TypeError as exc:
        raise CatalogError(f"{head}: missing parameters ({exc})") from None
