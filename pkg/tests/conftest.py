import logging

import numpy as np
import pytest

from qcohere.families import spin_coherent_vectors
from qcohere.operators import HermitianOperator

logging.getLogger("qcohere").setLevel(logging.ERROR)


def random_density(rng, d, rank=None):
    k = rank or d
    x = rng.normal(size=(d, k)) + 1j * rng.normal(size=(d, k))
    m = x @ x.conj().T
    return m / np.trace(m).real


def random_hermitian(rng, d):
    x = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (x + x.conj().T) / 2


def random_member(rng, kind, dims):
    """Random member of a classical family: kind in {complex, real, spin}."""
    v = np.ones(1, complex)
    for d in dims:
        if kind == "spin":
            f = spin_coherent_vectors(d - 1, np.array([np.arccos(rng.uniform(-1, 1))]),
                                      np.array([rng.uniform(0, 2 * np.pi)]))[0]
        else:
            f = rng.normal(size=d) + (0 if kind == "real" else 1j * rng.normal(size=d))
        v = np.kron(v, f / np.linalg.norm(f))
    return v


def random_mixture(rng, kind, dims, max_members=None):
    """Convex mixture of up to 3*dim random family members."""
    D = int(np.prod(dims))
    n = int(rng.integers(1, (max_members or 3 * D) + 1))
    w = rng.dirichlet(np.ones(n))
    m = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, (random_member(rng, kind, dims) for _ in w)))
    return HermitianOperator(m, tuple(dims) if len(dims) > 1 else None)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in mod.RESULTS:
            terminalreporter.write_line(line)
