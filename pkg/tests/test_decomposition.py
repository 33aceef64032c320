import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qcohere.catalog import (build, noisy_smolin, pauli_two_qubit, qudit_superposition, rho_prime,
                             spin_cat, ternary_qubit_state, SIGMA_Y)
from qcohere.decomposition import (Tolerances, ValidationError, Verdict, build_gram, decompose,
                                   residual, solve_nonneg, validate_state, verdict_of, GramSystem)
from qcohere.families import ClassicalFamily, StationarySet, stationary_points
from qcohere.operators import HermitianOperator, PureState, hermitian_eig, hs_inner

from conftest import random_density, random_mixture
from oracles import (bicone_margin, brute_force_residual, partial_transpose_min_eig,
                     product_qubit_dictionary, ternary_dictionary)

seeds = st.integers(0, 2**32 - 1)


def by_label(dec):
    return dict(zip(dec.labels, dec.weights))


def check_identities(rho, dec):
    """Reconstruction identity and, for consistent systems, residual orthogonality."""
    amps = np.array([s.amplitudes for s in dec.states.states])
    mix = np.einsum("k,ki,kj->ij", dec.weights, amps, amps.conj())
    assert np.linalg.norm(rho.entries - mix - dec.residual.entries) <= 1e-8
    if dec.consistency_defect <= 1e-8:
        for s in dec.states.states:
            assert abs(hs_inner(s.projector(), dec.residual)) <= 1e-8


# ---------- build_gram ----------
def test_gram_orthonormal_is_identity():
    d = stationary_points(ClassicalFamily.orthonormal_basis(), qudit_superposition(4))
    assert np.allclose(build_gram(d, qudit_superposition(4)).gram, np.eye(4))


def test_gram_ternary_matrix():
    rho = ternary_qubit_state(0.5, 1.0)
    d = stationary_points(ClassicalFamily.ternary_qubit(), rho)
    sys = build_gram(d, rho)
    poles = [i for i, lab in enumerate(d.labels) if lab in ("|0>", "|1>")]
    eq = [i for i in range(4) if i not in poles]
    g = sys.gram
    assert np.allclose(g[np.ix_(poles, poles)], np.eye(2))
    assert np.allclose(g[np.ix_(eq, eq)], np.eye(2), atol=1e-15)
    assert np.allclose(g[np.ix_(poles, eq)], 0.5)


@settings(max_examples=50, deadline=None)
@given(seeds, st.integers(1, 12))
def test_gram_psd(seed, k):
    rng = np.random.default_rng(seed)
    states = [PureState.from_vector(rng.normal(size=3) + 1j * rng.normal(size=3)) for _ in range(k)]
    d = StationarySet(states, np.zeros(k), [str(i) for i in range(k)], np.zeros(k))
    sys = build_gram(d, HermitianOperator(random_density(rng, 3)))
    assert np.linalg.eigvalsh(sys.gram).min() >= -1e-10
    assert np.allclose(np.diag(sys.gram), 1)


# ---------- solve_nonneg ----------
def test_solve_spin_cat_s1():
    rho = spin_cat(1)
    d = stationary_points(ClassicalFamily.spin_coherent(1), rho)
    p, feasible = solve_nonneg(build_gram(d, rho))
    w = dict(zip(d.labels, p))
    assert not feasible
    assert w["θ=0"] == pytest.approx(0.5) and w["θ=π"] == pytest.approx(0.5)
    for n, lab in enumerate(["θ=π/2, φ=0", "θ=π/2, φ=π/2", "θ=π/2, φ=π", "θ=π/2, φ=3π/2"]):
        assert w[lab] == pytest.approx((-1) ** n / 2, abs=1e-10)
    assert np.maximum(0, -p).sum() == pytest.approx(1.0)


def test_solve_ternary_pure_equatorial():
    rho = ternary_qubit_state(0.5, 1.0)
    d = stationary_points(ClassicalFamily.ternary_qubit(), rho)
    p, feasible = solve_nonneg(build_gram(d, rho))
    assert feasible
    w = dict(zip(d.labels, p))
    assert w["|φ=0.000000>"] == pytest.approx(1, abs=1e-12)
    assert sum(abs(v) for k, v in w.items() if k != "|φ=0.000000>") <= 1e-12


def test_solve_orthonormal_is_diagonal(rng):
    rho = HermitianOperator(random_density(rng, 5))
    d = stationary_points(ClassicalFamily.orthonormal_basis(), rho)
    p, feasible = solve_nonneg(build_gram(d, rho))
    diag = np.diag(rho.entries).real
    assert feasible
    for lab, pk in zip(d.labels, p):
        assert pk == pytest.approx(diag[int(lab[1:-1])], abs=1e-12)


def test_solve_singular_feasible_system():
    # two copies of the same direction plus a third: G singular, nonnegative solutions exist
    g = np.array([[1, 1, 0], [1, 1, 0], [0, 0, 1]], float)
    p, feasible = solve_nonneg(GramSystem(g, np.array([0.4, 0.4, 0.6]), None))
    assert feasible and np.allclose(g @ p, [0.4, 0.4, 0.6]) and p.min() >= -1e-9
    assert p[0] == pytest.approx(p[1])  # minimum-norm tie-break splits evenly


def test_solve_singular_infeasible_minimal_negativity():
    # p0 + p1 = 1 from the first two rows, p0 + p1 = -1 ... use a consistent one needing negativity
    g = np.array([[1, 1, 0.5], [1, 1, 0.5], [0.5, 0.5, 1]], float)
    target = np.array([0.0, 0.0, 1.0])  # forces p0 + p1 = -2/3 p2 ... negative mass
    p, feasible = solve_nonneg(GramSystem(g, target, None))
    assert not feasible
    assert np.allclose(g @ p, target, atol=1e-10)
    assert p[0] == pytest.approx(p[1])
    # min sum(p-) subject to p0 + p1 + p2/2 = 0, (p0+p1)/2 + p2 = 1 -> p2 = 4/3, p0 + p1 = -2/3
    assert np.maximum(0, -p).sum() == pytest.approx(2 / 3)


# ---------- residual ----------
def test_residual_qudit_off_diagonal():
    rho = qudit_superposition(2)
    d = stationary_points(ClassicalFamily.orthonormal_basis(), rho)
    r = residual(rho, d, np.array([0.5, 0.5]))
    assert np.allclose(r.entries, [[0, 0.5], [0.5, 0]])
    assert r.hs_norm() ** 2 == pytest.approx(0.5)


def test_residual_length_mismatch():
    rho = qudit_superposition(2)
    d = stationary_points(ClassicalFamily.orthonormal_basis(), rho)
    with pytest.raises(ValueError):
        residual(rho, d, np.ones(3))


def test_residual_rebit_pauli():
    dec = decompose(pauli_two_qubit(0, 1, 0), ClassicalFamily.product(real=True))
    assert np.allclose(dec.residual.entries, np.kron(SIGMA_Y, SIGMA_Y) / 4, atol=1e-8)
    assert dec.residual_norm == pytest.approx(0.5, abs=1e-8)


# ---------- decompose ----------
def test_decompose_rho_prime():
    dec = decompose(rho_prime(), ClassicalFamily.all_pure())
    assert dec.verdict == Verdict.CLASSICAL
    assert np.allclose(sorted(dec.weights), [1 / 3, 2 / 3], atol=1e-12)
    assert dec.residual_norm <= 1e-12


def test_decompose_qudit_d4():
    dec = decompose(qudit_superposition(4), ClassicalFamily.orthonormal_basis())
    assert dec.verdict == Verdict.RESIDUAL
    assert dec.residual_norm ** 2 == pytest.approx(0.75, abs=1e-10)


@pytest.mark.parametrize("eta,want", [(0.2, Verdict.CLASSICAL), (0.5, Verdict.NEGATIVE)])
def test_decompose_smolin(eta, want):
    assert decompose(noisy_smolin(4, eta), ClassicalFamily.product()).verdict == want


def test_verdict_table():
    assert verdict_of(True, 0.0, 1e-8) == Verdict.CLASSICAL
    assert verdict_of(False, 0.0, 1e-8) == Verdict.NEGATIVE
    assert verdict_of(True, 1.0, 1e-8) == Verdict.RESIDUAL
    assert verdict_of(False, 1.0, 1e-8) == Verdict.BOTH


def test_validation():
    with pytest.raises(ValidationError):
        validate_state(HermitianOperator(np.diag([1.5, -0.5])))
    with pytest.raises(ValidationError):
        validate_state(HermitianOperator(np.eye(2)))
    # shifted operators pass once validation is switched off
    shifted = HermitianOperator(rho_prime().entries - np.eye(2) / 2)
    dec = decompose(shifted, ClassicalFamily.all_pure(), validate_psd=False)
    assert dec.verdict == Verdict.NEGATIVE


def test_tolerances_are_respected():
    rho = qudit_superposition(2)
    loose = decompose(rho, ClassicalFamily.orthonormal_basis(), tolerances=Tolerances(tol_res=1.0))
    assert loose.verdict == Verdict.CLASSICAL


def test_decomposition_json(rng):
    dec = decompose(spin_cat(1), ClassicalFamily.spin_coherent(1))
    data = json.loads(json.dumps(dec.to_json()))
    assert set(data) == {"weights", "residual", "residual_norm", "negativity", "verdict",
                         "consistency_defect"}
    assert data["verdict"] == "NegativeQuasiprobability"
    p = [w["p"] for w in data["weights"]]
    assert np.allclose(p, dec.weights) and len(p) == 6
    assert HermitianOperator.from_json(data["residual"]).hs_norm() == pytest.approx(dec.residual_norm)


# ---------- spectral special case ----------
@settings(max_examples=40, deadline=None)
@given(seeds, st.integers(1, 8))
def test_spectral_special_case(seed, d):
    rng = np.random.default_rng(seed)
    rho = HermitianOperator(random_density(rng, d))
    dec = decompose(rho, ClassicalFamily.all_pure())
    assert np.abs(np.sort(dec.weights) - hermitian_eig(rho).eigenvalues).max() <= 1e-10
    assert dec.residual_norm <= 1e-10 and dec.verdict == Verdict.CLASSICAL


# ---------- identities on arbitrary decompositions ----------
FAMILIES = {
    "ternary": (ClassicalFamily.ternary_qubit(), (2,)),
    "spin1": (ClassicalFamily.spin_coherent(1), (3,)),
    "spin32": (ClassicalFamily.spin_coherent("3/2"), (4,)),
    "qubits": (ClassicalFamily.product(), (2, 2)),
    "rebits": (ClassicalFamily.product(real=True), (2, 2)),
    "basis": (ClassicalFamily.orthonormal_basis(), (3,)),
}


@settings(max_examples=40, deadline=None)
@given(seeds, st.sampled_from(sorted(FAMILIES)), st.integers(1, 4))
def test_reconstruction_and_orthogonality(seed, name, rank):
    fam, dims = FAMILIES[name]
    d = int(np.prod(dims))
    rng = np.random.default_rng(seed)
    rho = HermitianOperator(random_density(rng, d, rank=min(rank, d)), dims if len(dims) > 1 else None)
    check_identities(rho, decompose(rho, fam))


# ---------- closure soundness (small sample; the full run is an acceptance check) ----------
@pytest.mark.parametrize("kind,dims,family", [
    ("complex", (2, 2), ClassicalFamily.product()),
    ("real", (2, 2), ClassicalFamily.product(real=True)),
    ("complex", (2, 3), ClassicalFamily.product()),
    ("spin", (3,), ClassicalFamily.spin_coherent(1)),
    ("spin", (4,), ClassicalFamily.spin_coherent("3/2")),
    ("spin", (2, 2), ClassicalFamily.spin_coherent_product("1/2")),
])
def test_closure_soundness(kind, dims, family):
    rng = np.random.default_rng(99)
    for _ in range(15):
        rho = random_mixture(rng, kind, dims)
        dec = decompose(rho, family)
        assert dec.verdict == Verdict.CLASSICAL, (dec.verdict, dec.residual_norm, dec.negativity)
        check_identities(rho, dec)


def test_closure_soundness_discrete(rng):
    for _ in range(50):
        # ternary family: poles and equator
        phi = rng.uniform(0, 2 * np.pi, size=3)
        vecs = [np.array([1, 0]), np.array([0, 1])] + [np.array([1, np.exp(1j * f)]) / np.sqrt(2) for f in phi]
        w = rng.dirichlet(np.ones(len(vecs)))
        m = sum(wi * np.outer(v, v.conj()) for wi, v in zip(w, vecs))
        assert decompose(HermitianOperator(m), ClassicalFamily.ternary_qubit()).verdict == Verdict.CLASSICAL
        # orthonormal basis: diagonal states
        diag = HermitianOperator(np.diag(rng.dirichlet(np.ones(4))))
        assert decompose(diag, ClassicalFamily.orthonormal_basis()).verdict == Verdict.CLASSICAL


# ---------- brute-force oracle ----------
def test_oracle_ternary(rng):
    dictionary = ternary_dictionary(10_000)
    checked = 0
    while checked < 60:
        rho = random_density(rng, 2)
        if abs(bicone_margin(rho)) < 1e-3:
            continue
        brute = brute_force_residual(rho, dictionary)
        dec = decompose(HermitianOperator(rho), ClassicalFamily.ternary_qubit())
        assert (brute <= 1e-4) == (dec.verdict == Verdict.CLASSICAL), (brute, dec.verdict)
        checked += 1


@pytest.mark.parametrize("real", [False, True])
def test_oracle_two_qubits(real, rng):
    dictionary = product_qubit_dictionary(100, real=real)
    family = ClassicalFamily.product(real=real)
    agree = []
    for _ in range(12):
        m = random_density(rng, 4, rank=int(rng.integers(1, 5)))
        if real:
            m = m.real
        lam = rng.uniform(0, 1)
        m = lam * m + (1 - lam) * np.eye(4) / 4
        if abs(partial_transpose_min_eig(m)) < 5e-3:
            continue  # grid resolution band around the separable boundary
        brute = brute_force_residual(m, dictionary)
        dec = decompose(HermitianOperator(m, (2, 2)), family)
        agree.append((brute <= 1e-4) == (dec.verdict == Verdict.CLASSICAL))
    assert agree and all(agree)
