import numpy as np
import pytest

from qcohere.catalog import noisy_smolin, pauli_two_qubit, spin_cat
from qcohere.families import ClassicalFamily
from qcohere.membership import certify_membership, from_coordinates, hs_coordinates

from conftest import random_hermitian, random_member, random_mixture


def test_coordinates_are_isometric(rng):
    a, b = random_hermitian(rng, 4), random_hermitian(rng, 4)
    xa, xb = hs_coordinates(a), hs_coordinates(b)
    assert xa @ xb == pytest.approx(np.trace(a @ b).real)
    assert np.allclose(from_coordinates(xa, 4), a)


@pytest.mark.parametrize("kind,dims,family", [
    ("complex", (2, 2), ClassicalFamily.product()),
    ("spin", (3,), ClassicalFamily.spin_coherent(1)),
])
def test_mixtures_are_members(kind, dims, family, rng):
    for _ in range(5):
        rho = random_mixture(rng, kind, dims)
        m = certify_membership(family, rho)
        assert m.member is True
        assert m.weights.min() >= 0
        amps = np.array([s.amplitudes for s in m.states])
        fit = np.einsum("k,ki,kj->ij", m.weights, amps, amps.conj())
        assert np.linalg.norm(fit - rho.entries) <= 1e-8


@pytest.mark.parametrize("family,rho", [
    (ClassicalFamily.spin_coherent(1), spin_cat(1)),
    (ClassicalFamily.product(), pauli_two_qubit(0.75, -0.75, 0.75)),
    (ClassicalFamily.product(), noisy_smolin(4, 0.6)),
])
def test_nonmembers_get_a_witness(family, rho):
    m = certify_membership(family, rho)
    assert m.member is False
    w = m.witness
    # independent check of the separating hyperplane on random family members
    rng = np.random.default_rng(3)
    kind = "spin" if family.kind.value.startswith("Spin") else "complex"
    dims = rho.subsystem_dims or (rho.dim,)
    level = np.trace(w @ rho.entries).real
    for _ in range(2000):
        v = random_member(rng, kind, dims)
        assert np.vdot(v, w @ v).real < level
