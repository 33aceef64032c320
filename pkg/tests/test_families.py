import json
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcohere.catalog import build, pauli_two_qubit, rho_prime, spin_cat, ternary_qubit_state
from qcohere.families import (ClassicalFamily, FamilyKind, NonConvergenceError, NotInFamilyError,
                              SearchConfig, factorize_product, parse_spin,
                              separability_eigen_iterate, spin_coherent_state, stationarity_defect,
                              stationary_points)
from qcohere.operators import HermitianOperator, PureState, hermitian_eig, product_vector

from conftest import random_density, random_mixture

seeds = st.integers(0, 2**32 - 1)
PAULI = {"z": np.array([[1, 0], [0, -1]]), "x": np.array([[0, 1], [1, 0]]),
         "y": np.array([[0, -1j], [1j, 0]])}


def pauli_eigvecs():
    out = []
    for m in PAULI.values():
        _, v = np.linalg.eigh(m)
        out += [v[:, 0], v[:, 1]]
    return out


def twelve_products():
    vecs = []
    for m in PAULI.values():
        _, v = np.linalg.eigh(m)
        for a in (0, 1):
            for b in (0, 1):
                vecs.append(np.kron(v[:, a], v[:, b]))
    return vecs


def in_set(vec, candidates, tol=1e-8):
    return any(abs(np.vdot(c, vec)) ** 2 > 1 - tol for c in candidates)


# ---------- ClassicalFamily ----------
def test_parse_spin():
    assert parse_spin("3/2") == Fraction(3, 2)
    assert parse_spin(1.5) == Fraction(3, 2)
    with pytest.raises(ValueError):
        parse_spin(0.3)


@pytest.mark.parametrize("fam", [
    ClassicalFamily.all_pure(), ClassicalFamily.ternary_qubit(), ClassicalFamily.spin_coherent("5/2"),
    ClassicalFamily.product((2, 3)), ClassicalFamily.product(real=True),
    ClassicalFamily.spin_coherent_product(1, 3),
    ClassicalFamily.orthonormal_basis([[1, 1j], [1, -1j]] / np.sqrt(2))])
def test_family_json_round_trip(fam):
    back = ClassicalFamily.from_json(json.loads(json.dumps(fam.to_json())))
    assert back.kind == fam.kind
    assert json.dumps(back.to_json()) == json.dumps(fam.to_json())


def test_search_config_round_trip():
    cfg = SearchConfig(seed=7, starts=33, spin_grid=(16, 32))
    assert SearchConfig.from_json(json.loads(json.dumps(cfg.to_json()))) == cfg
    assert SearchConfig.from_json({"seed": 3, "unknown": 1}).seed == 3


def test_family_dimension_checks():
    with pytest.raises(ValueError):
        stationary_points(ClassicalFamily.spin_coherent(1), rho_prime())
    with pytest.raises(ValueError):
        ClassicalFamily.spin_coherent_product(1, parties=1)


# ---------- discrete families ----------
def test_all_pure_is_eigensystem(rng):
    for d in (2, 3, 5):
        rho = HermitianOperator(random_density(rng, d))
        s = stationary_points(ClassicalFamily.all_pure(), rho)
        es = hermitian_eig(rho)
        assert np.allclose(np.sort(s.values), es.eigenvalues, atol=1e-12)
        for v in es.eigenvectors:
            assert in_set(v.amplitudes, [x.amplitudes for x in s.states])


def test_all_pure_rho_prime():
    s = stationary_points(ClassicalFamily.all_pure(), rho_prime())
    assert np.allclose(s.values, [1 / 3, 2 / 3])
    assert in_set(np.array([1, 0]), [x.amplitudes for x in s.states])


def test_orthonormal_basis_defects_zero():
    s = stationary_points(ClassicalFamily.orthonormal_basis(), build("qudit:d=3"))
    assert len(s) == 3 and np.all(s.defects == 0)


def test_ternary_equatorial_pure_state():
    s = stationary_points(ClassicalFamily.ternary_qubit(), ternary_qubit_state(0.5, 1.0))
    want = [np.array([1, 0]), np.array([0, 1]), np.array([1, 1]) / np.sqrt(2),
            np.array([1, -1]) / np.sqrt(2)]
    assert len(s) == 4
    for w in want:
        assert in_set(w, [x.amplitudes for x in s.states])


def test_ternary_defect_requires_family_member():
    with pytest.raises(NotInFamilyError):
        stationarity_defect(ClassicalFamily.ternary_qubit(), rho_prime(),
                            PureState.from_vector([0.6, 0.8]))


# ---------- spin coherent ----------
def test_spin_cat_stationary_set():
    s = stationary_points(ClassicalFamily.spin_coherent(1), spin_cat(1))
    assert len(s) == 6
    want = [spin_coherent_state(1, 0, 0), spin_coherent_state(1, np.pi, 0)]
    want += [spin_coherent_state(1, np.pi / 2, np.pi * n / 2) for n in range(4)]
    for w in want:
        assert in_set(w.amplitudes, [x.amplitudes for x in s.states])


def test_spin_stationarity_defect_examples():
    fam, rho = ClassicalFamily.spin_coherent(1), spin_cat(1)
    # phi_n = pi n / 2 are stationary on the equator
    for n in range(4):
        assert stationarity_defect(fam, rho, (np.pi / 2, np.pi * n / 2)) <= 1e-9
    # half-way between two of them the azimuthal slope is 1/2
    assert stationarity_defect(fam, rho, (np.pi / 2, np.pi / 4)) == pytest.approx(0.5, abs=1e-9)
    assert stationarity_defect(fam, rho, (np.pi / 2 + 0.1, np.pi / 4)) > 1e-3


def test_spin_defect_matches_finite_difference():
    fam, rho = ClassicalFamily.spin_coherent("3/2"), spin_cat("3/2")
    g = lambda t, p: spin_coherent_state("3/2", t, p).expectation(rho)
    t, p, h = 1.1, 0.4, 1e-6
    grad = [(g(t + h, p) - g(t - h, p)) / (2 * h), (g(t, p + h) - g(t, p - h)) / (2 * h)]
    assert stationarity_defect(fam, rho, (t, p)) == pytest.approx(np.linalg.norm(grad), rel=1e-5)


def test_spin_coherent_state_poles():
    assert np.allclose(spin_coherent_state(1, 0, 0).amplitudes, [1, 0, 0])
    assert abs(spin_coherent_state(1, np.pi, 0).amplitudes[2]) == pytest.approx(1)


# ---------- product families ----------
def test_pauli_product_stationary_set():
    rho = pauli_two_qubit(0.75, -0.75, 0.75)
    s = stationary_points(ClassicalFamily.product(), rho)
    assert len(s) == 12
    ref = twelve_products()
    for x in s.states:
        assert in_set(x.amplitudes, ref)
    assert sorted(np.round(s.values, 12)) == [1 / 16] * 6 + [7 / 16] * 6


def test_product_real_on_real_input_is_real(rng):
    for _ in range(5):
        m = random_density(rng, 4).real
        rho = HermitianOperator(m / np.trace(m), (2, 2))
        s = stationary_points(ClassicalFamily.product(real=True), rho)
        for x in s.states:
            assert np.all(x.amplitudes.imag == 0) and x.real_only


def test_factorize_product(rng):
    a, b = rng.normal(size=2) + 1j * rng.normal(size=2), rng.normal(size=3)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    fa, fb = factorize_product(PureState(np.kron(a, b)), (2, 3))
    assert abs(np.vdot(fa.amplitudes, a)) == pytest.approx(1) and abs(np.vdot(fb.amplitudes, b)) == pytest.approx(1)
    with pytest.raises(NotInFamilyError):
        factorize_product(PureState.from_vector([1, 0, 0, 1]), (2, 2))


# ---------- separability eigenvalue iteration ----------
def test_iterate_product_pure_state():
    rho = HermitianOperator(np.diag([1.0, 0, 0, 0]), (2, 2))
    zero = PureState.from_vector([1, 0])
    states, g = separability_eigen_iterate(rho, [zero, zero])
    assert g == pytest.approx(1.0)
    assert all(abs(s.amplitudes[0]) == pytest.approx(1) for s in states)


def test_iterate_pauli_fixed_points(rng):
    rho = pauli_two_qubit(0.75, -0.75, 0.75)
    # the 12 eigenvector products are fixed points with g = (1 +- 3/4)/4
    for v in twelve_products():
        fa, fb = factorize_product(PureState(v), (2, 2))
        high = np.vdot(v, rho.entries @ v).real > 0.25
        states, g = separability_eigen_iterate(rho, [fa, fb], branch="max" if high else "min")
        assert in_set(product_vector(states), [v])
        assert g == pytest.approx(7 / 16 if high else 1 / 16)
    # |rho_x| = |rho_y| = |rho_z| makes both extremal branches degenerate
    # (b = diag(1, -1, 1) a on the Bloch sphere), so random starts land on
    # the same values but not necessarily on the 12 products
    for _ in range(20):
        init = [PureState.from_vector(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(2)]
        for branch, want in (("max", 7 / 16), ("min", 1 / 16)):
            _, g = separability_eigen_iterate(rho, init, branch=branch)
            assert g == pytest.approx(want, abs=1e-9)


def test_iterate_smolin_sign_patterns(rng):
    rho = build("smolin:N=4,eta=1")
    eig = pauli_eigvecs()
    for _ in range(10):
        init = [PureState.from_vector(rng.normal(size=2) + 1j * rng.normal(size=2)) for _ in range(4)]
        states, g = separability_eigen_iterate(rho, init)
        # each factor is an eigenvector of a single Pauli matrix shared by all parties
        kinds = set()
        for s in states:
            hits = [k for k, v in enumerate(eig) if abs(np.vdot(v, s.amplitudes)) ** 2 > 1 - 1e-8]
            assert hits
            kinds.add(hits[0] // 2)
        assert len(kinds) == 1


@settings(max_examples=30, deadline=None)
@given(seeds)
def test_iterate_fixed_point_value(seed):
    rng = np.random.default_rng(seed)
    rho = HermitianOperator(random_density(rng, 6), (2, 3))
    init = [PureState.from_vector(rng.normal(size=2)), PureState.from_vector(rng.normal(size=3))]
    try:
        states, g = separability_eigen_iterate(rho, init, max_sweeps=2000, tol=1e-13)
    except NonConvergenceError:
        return
    v = product_vector(states)
    gamma = np.outer(v, v.conj())
    assert isinstance(g, float)
    assert g == pytest.approx(np.trace(gamma @ rho.entries).real, abs=1e-10)


def test_iterate_needs_subsystems():
    with pytest.raises(ValueError):
        separability_eigen_iterate(rho_prime(), [PureState.from_vector([1, 0])])


# ---------- set-level invariants ----------
CATALOG_CASES = [
    ("spin-cat:s=1", ClassicalFamily.spin_coherent(1)),
    ("spin-cat:s=3/2", ClassicalFamily.spin_coherent("3/2")),
    ("spin-cat:s=2", ClassicalFamily.spin_coherent(2)),
    ("noon:s=1", ClassicalFamily.spin_coherent_product(1)),
    ("pauli:rx=0.75,ry=-0.75,rz=0.75", ClassicalFamily.product()),
    ("pauli:rx=0,ry=1,rz=0", ClassicalFamily.product(real=True)),
    ("pauli:rx=0.3,ry=0.2,rz=-0.1", ClassicalFamily.product()),
    ("smolin:N=4,eta=0.5", ClassicalFamily.product()),
    ("ternary-qubit:p=0.3,gamma=0.4+0.2i", ClassicalFamily.ternary_qubit()),
]


def _check_set(s, family, rho):
    amps = np.array([x.amplitudes for x in s.states])
    fid = np.abs(amps.conj() @ amps.T) ** 2
    np.fill_diagonal(fid, 0)
    assert fid.max(initial=0) < 1 - 1e-8
    stat = s.stationary if s.stationary is not None else np.ones(len(s), bool)
    if family.kind in (FamilyKind.ALL_PURE, FamilyKind.ORTHONORMAL_BASIS):
        return
    assert np.all(s.defects[stat] <= 1e-8)
    for x, g in zip(s.states, s.values):
        assert g == pytest.approx(x.expectation(rho), abs=1e-12)


@pytest.mark.parametrize("name,family", CATALOG_CASES)
def test_catalog_sets_valid_and_seed_stable(name, family):
    rho = build(name)
    a = stationary_points(family, rho, SearchConfig(seed=1))
    b = stationary_points(family, rho, SearchConfig(seed=12345))
    _check_set(a, family, rho)
    assert len(a) == len(b)
    for x in b.states:
        assert in_set(x.amplitudes, [y.amplitudes for y in a.states])


@pytest.mark.parametrize("kind,dims,family", [
    ("complex", (2, 2), ClassicalFamily.product()),
    ("real", (2, 2), ClassicalFamily.product(real=True)),
    ("spin", (3,), ClassicalFamily.spin_coherent(1)),
    ("spin", (2, 2), ClassicalFamily.spin_coherent_product("1/2")),
])
def test_random_states_sets_valid(kind, dims, family, rng):
    for _ in range(5):
        rho = random_mixture(rng, kind, dims)
        _check_set(stationary_points(family, rho), family, rho)


def test_stationary_set_json_flags():
    s = stationary_points(ClassicalFamily.spin_coherent(1), spin_cat(1))
    data = json.loads(json.dumps(s.to_json()))
    assert len(data["states"]) == 6
    assert all(e["stationary"] and e["defect"] <= 1e-8 for e in data["states"])
