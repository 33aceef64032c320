"""Convex-hull membership for continuous families.

The stationary set of a state settles the classicality question exactly when
it spans the state; for generic mixed states it can miss the members of an
optimal mixture. ``certify_membership`` decides ``rho in conv(family)``
directly by fully corrective Frank-Wolfe in HS-orthonormal real coordinates:
NNLS over a growing set of atoms, new atoms from maximising <c|R|c> over the
family for W = R - 10 ||R|| P_ker, with R the current residual and P_ker the
projector onto the kernel of rho. A pricing step that finds no member with
<c|W|c> >= tr(W rho) yields W as a separating witness. The witness is only as
good as the pricing search (multistart local maximisation), not a proof.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .families import (ClassicalFamily, FamilyKind, _alternating, _lattice, _parties,
                       _random_factors, _rho_for, bloch_angles, spin_coherent_vectors)
from .manifold import ProductBatch, ProductFunctional, _retract, _tangent, batched_kron, spin_frame
from .lp import nnls
from .operators import HermitianOperator, PureState, _canonical_phase

log = logging.getLogger(__name__)

KERNEL_TOL = 1e-10
CONTINUOUS = (FamilyKind.PRODUCT_COMPLEX, FamilyKind.PRODUCT_REAL,
              FamilyKind.SPIN_COHERENT, FamilyKind.SPIN_COHERENT_PRODUCT)


@dataclass
class MembershipResult:
    member: bool | None  # None: undecided within the iteration budget
    weights: np.ndarray
    states: list[PureState]
    distance: float  # HS norm of the best fit found
    witness: np.ndarray | None = None
    iterations: int = 0
    notes: list[str] = field(default_factory=list)


def hs_coordinates(m: np.ndarray) -> np.ndarray:
    """Real coordinates of Hermitian matrices in an HS-orthonormal basis, batched."""
    d = m.shape[-1]
    iu = np.triu_indices(d, 1)
    up = m[..., iu[0], iu[1]]
    return np.concatenate([np.diagonal(m, axis1=-2, axis2=-1).real,
                           np.sqrt(2) * up.real, np.sqrt(2) * up.imag], axis=-1)


def from_coordinates(x: np.ndarray, d: int) -> np.ndarray:
    iu = np.triu_indices(d, 1)
    n = len(iu[0])
    m = np.diag(x[:d]).astype(complex)
    m[iu] = (x[d:d + n] + 1j * x[d + n:]) / np.sqrt(2)
    m[iu[1], iu[0]] = np.conj(m[iu])
    return m


def _projector_coordinates(psi: np.ndarray) -> np.ndarray:
    return hs_coordinates(np.einsum("si,sj->sij", psi, psi.conj()))


class _Pricer:
    """Approximate maximiser of <c|W|c> over a continuous family."""

    def __init__(self, parties, rng, starts: int):
        self.parties = parties
        self.rng = rng
        self.starts = starts
        self.dims = [p.dim for p in parties]
        self.kind = parties[0].kind
        self.warm: list[np.ndarray] | None = None
        if self.kind == "spin":
            lat, _ = _lattice(parties, 1)
            self.seeds = lat
        if self.kind == "spin" and len(parties) == 1:
            th = (np.arange(12) + 0.5) * np.pi / 12
            ph = np.arange(24) * 2 * np.pi / 24
            T, P = np.meshgrid(th, ph, indexing="ij")
            grid = ProductBatch(parties, [spin_frame(self.dims[0] - 1, T.ravel(), P.ravel())])
            self.seeds = ProductBatch.concat([self.seeds, grid])

    def __call__(self, w: np.ndarray, count: int, intensive: bool = False):
        """Best ``count`` distinct members by <c|W|c>; returns (psi, values)."""
        n_random = self.starts * (16 if intensive else 1)
        if self.kind == "spin":
            func = ProductFunctional(w, self.parties)
            starts = [self.seeds, ProductBatch(self.parties,
                                               _random_factors(self.rng, self.parties, n_random))]
            if self.warm is not None:
                starts.append(ProductBatch(self.parties, self.warm))
            batch = ProductBatch.concat(starts)
            top = np.argsort(-func.value(batch))[:max(4 * count, 64 if intensive else 16)]
            batch, _ = func.newton(batch.take(top), max_iter=100 if intensive else 30)
            vecs = batch.vectors()
            frames = batch.factors
        else:
            init = _random_factors(self.rng, self.parties, n_random)
            if self.warm is not None:
                init = [np.concatenate([a, b]) for a, b in zip(init, self.warm)]
            vecs, _, _ = _alternating(w, self.dims, init, "max", 500 if intensive else 50, 1e-14,
                                      self.kind == "real")
            frames = vecs
        psi = batched_kron(vecs)
        val = np.einsum("si,ij,sj->s", psi.conj(), w, psi).real
        order = np.argsort(-val)
        picked: list[int] = []
        for i in order:
            if len(picked) == count:
                break
            if picked and np.max(np.abs(psi[picked].conj() @ psi[i]) ** 2) > 1 - 1e-6:
                continue
            picked.append(i)
        keep = order[:max(8, count)]
        self.warm = [v[keep] for v in frames]
        return psi[picked], val[picked]


def _spin_snap(parties, psi: np.ndarray) -> np.ndarray:
    """Re-express spin product vectors exactly as coherent states."""
    out = []
    for vec in psi:
        t = vec.reshape([p.dim for p in parties])
        factors = []
        for j, p in enumerate(parties):
            red = np.moveaxis(t, j, 0).reshape(p.dim, -1)
            u = np.linalg.svd(red)[0][:, 0]
            th, ph = bloch_angles(p.dim - 1, u[None, :])
            factors.append(spin_coherent_vectors(p.dim - 1, th, ph)[0])
        v = factors[0]
        for f in factors[1:]:
            v = np.kron(v, f)
        out.append(v)
    return np.array(out)


def certify_membership(family: ClassicalFamily, rho: HermitianOperator,
                       initial: list[PureState] = (), seed: int = 0, max_iter: int = 200,
                       tol: float = 1e-9, per_iter: int = 4, starts: int = 12) -> MembershipResult:
    """Decide whether rho (its real part for real families) is a mixture of members.

    Fully corrective Frank-Wolfe: NNLS over the current atoms, then add the
    members maximising <c|W|c> (see module docstring). Every member of the
    hull satisfies tr(W rho) <= max_c <c|W|c>; if a cheap and then an
    intensive pricing pass both stay below tr(W rho), rho is reported outside
    with W as witness. Between pricing steps the atoms are refined by a
    Levenberg-Marquardt polish of positions and weights.
    """
    if family.kind not in CONTINUOUS:
        raise ValueError(f"membership by column generation needs a continuous family, got {family.kind.value}")
    parties = _parties(family, rho)
    target = _rho_for(family, rho)
    kind = parties[0].kind
    x = hs_coordinates(target)
    rng = np.random.default_rng(seed)
    price = _Pricer(parties, rng, starts)
    seeds, _ = _lattice(parties, 0)
    psi = batched_kron(seeds.vectors())
    if len(initial):
        psi = np.vstack([psi, [s.amplitudes for s in initial]])
    if kind == "spin":
        psi = _spin_snap(parties, psi)
    a = _projector_coordinates(psi)
    # atoms of an exact mixture lie in the range of rho; steer pricing there
    lam, vec = np.linalg.eigh(target)
    ker = vec[:, lam <= KERNEL_TOL * max(1.0, lam.max())]
    kernel = ker @ ker.conj().T
    notes: list[str] = []
    for it in range(1, max_iter + 1):
        p, rnorm = nnls(a.T, x)
        sup = p > 0
        psi, a, p = psi[sup], a[sup], p[sup]
        if rnorm > tol:
            # local descent on atom positions between conditional-gradient steps
            vec, q, fn = _polish_atoms(parties, psi, p, x, tol, 60 if rnorm < 1e-4 else 8)
            if fn < rnorm:
                psi, p, rnorm = vec, q, fn
                a = _projector_coordinates(psi)
        if rnorm <= tol:
            return _result(True, parties, psi, p, rnorm, it, notes)
        r = target - from_coordinates(a.T @ p, target.shape[0])
        w = r - 10 * rnorm * kernel
        level = float(np.real(np.trace(w @ target)))
        for intensive in (False, True):
            new, val = price(w, per_iter, intensive)
            if kind == "real":
                new = new.real.astype(complex)
                new /= np.linalg.norm(new, axis=1, keepdims=True)
            elif kind == "spin":
                new = _spin_snap(parties, new)
            val = np.einsum("si,ij,sj->s", new.conj(), w, new).real
            # a member satisfies tr(W rho) <= max_c <c|W|c>
            top = val.max(initial=-np.inf)
            if top >= level - 1e-9 * max(1.0, abs(level)):
                break
        else:
            bound = (level - top) / np.linalg.norm(w)
            notes.append(f"outside the hull: distance >= {bound:.3e}")
            return MembershipResult(False, p, _states(parties, psi), rnorm, witness=w,
                                    iterations=it, notes=notes)
        gain = val > 0
        psi = np.vstack([psi, new[gain]])
        a = np.vstack([a, _projector_coordinates(new[gain])])
    notes.append(f"undecided after {max_iter} iterations")
    return MembershipResult(None, p, _states(parties, psi), rnorm, iterations=max_iter, notes=notes)


def _states(parties, psi):
    real = parties[0].kind == "real"
    return [PureState.from_vector(_canonical_phase(v), real_only=real) for v in psi]


def _result(member, parties, psi, p, rnorm, it, notes):
    return MembershipResult(member, np.asarray(p), _states(parties, psi), float(rnorm),
                            iterations=it, notes=notes)


def _factor_batch(parties, psi) -> ProductBatch:
    """Split product vectors into manifold factors (spin frames for spins)."""
    dims = [q.dim for q in parties]
    factors = []
    for j, q in enumerate(parties):
        u = np.array([np.linalg.svd(np.moveaxis(v.reshape(dims), j, 0).reshape(q.dim, -1))[0][:, 0]
                      for v in psi])
        if q.kind == "spin":
            th, ph = bloch_angles(q.dim - 1, u)
            factors.append(spin_frame(q.dim - 1, th, ph))
        else:
            u = np.array([_canonical_phase(x) for x in u])
            factors.append(u.real.astype(complex) if q.kind == "real" else u)
    return ProductBatch(parties, factors)


def _merge(psi, p, fid=1 - 1e-3):
    """Collapse near-duplicate atoms onto the heaviest of each group."""
    order = np.argsort(-p)
    keep, weight = [], []
    for i in order:
        if keep:
            f = np.abs(psi[keep].conj() @ psi[i]) ** 2
            j = int(np.argmax(f))
            if f[j] >= fid:
                weight[j] += p[i]
                continue
        keep.append(i)
        weight.append(p[i])
    return psi[keep], np.array(weight)


def _polish_atoms(parties, psi, p, x, tol=1e-10, max_iter=60):
    """Levenberg-Marquardt on the atoms with NNLS weights; returns the best fit.

    The system is underdetermined, so steps are -J^T (J J^T + mu)^-1 F. After
    each step the weights are re-fitted by NNLS, which drops superfluous
    atoms exactly instead of letting their weights creep to zero.
    """
    psi, p = _merge(psi, p)
    batch = _factor_batch(parties, psi)
    vec = batched_kron(batch.vectors())
    a = _projector_coordinates(vec)
    f = a.T @ p - x
    fn = np.linalg.norm(f)
    mu = 1e-6
    for _ in range(max_iter):
        if fn <= tol:
            break
        log.debug("polish |F| = %.3e (%d atoms)", fn, len(p))
        K = len(p)
        vecs = batch.vectors()
        cols, tangents = [], []
        for j, q in enumerate(parties):
            t, _ = _tangent(q, batch.factors[j])  # (K, n, d)
            tangents.append(t)
            n = t.shape[1]
            parts = [np.broadcast_to(v[:, None, :], (K, n, v.shape[1])) for v in vecs]
            parts[j] = t
            dpsi = batched_kron(parts)  # (K, n, D)
            dproj = np.einsum("kai,kj->kaij", dpsi, vec.conj())
            dproj = dproj + np.conj(np.swapaxes(dproj, -1, -2))
            cols.append((p[:, None, None] * hs_coordinates(dproj)).reshape(K * n, -1))
        cols.append(a)
        jac = np.vstack(cols).T
        jjt = jac @ jac.T
        scale = max(np.trace(jjt) / len(jjt), 1e-300)
        for _ in range(12):
            step = -jac.T @ np.linalg.solve(jjt + mu * scale * np.eye(len(jjt)), f)
            pos, factors = 0, []
            for j, q in enumerate(parties):
                n = tangents[j].shape[1]
                factors.append(_retract(q, batch.factors[j], tangents[j],
                                        step[pos:pos + K * n].reshape(K, n)))
                pos += K * n
            nb = ProductBatch(parties, factors)
            nvec = batched_kron(nb.vectors())
            na = _projector_coordinates(nvec)
            npw, nfn = nnls(na.T, x)
            if nfn < fn:
                keep = npw > 0
                batch = ProductBatch(parties, [fa[keep] for fa in factors])
                vec, a, p = nvec[keep], na[keep], npw[keep]
                f, fn = a.T @ p - x, nfn
                mu = max(mu / 10, 1e-15)
                break
            mu *= 10
        else:
            break
    return vec, p, fn


