"""Batched calculus on products of pure-state manifolds.

A point is a product state psi_1 x ... x psi_N where every factor lives on
one of three local manifolds:

* ``complex``: all unit vectors of C^d (modulo phase), 2(d-1) real directions
* ``real``: real unit vectors of R^d, d-1 directions
* ``spin``: SU(2) coherent states of spin s, 2 directions

All routines work on a batch of S points at once. ``f = <Psi|rho|Psi>`` and
its gradient/Hessian are taken in local tangent coordinates x, where the
factor moves as psi(x) = psi + sum_a x_a t_a + 1/2 sum_ab x_a x_b w_ab + ...
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def spin_matrices(two_s: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S_x, S_y, S_z) with hbar = 1; basis index k holds m = s - k."""
    s = two_s / 2
    m = s - np.arange(two_s + 1)
    sz = np.diag(m).astype(complex)
    sp = np.zeros((two_s + 1, two_s + 1), dtype=complex)
    for k in range(1, two_s + 1):
        # S+ |m> = sqrt((s - m)(s + m + 1)) |m + 1>, and m + 1 sits at index k - 1
        sp[k - 1, k] = np.sqrt((s - m[k]) * (s + m[k] + 1))
    sx = (sp + sp.conj().T) / 2
    sy = (sp - sp.conj().T) / 2j
    for a in (sx, sy, sz):
        a.setflags(write=False)
    return sx, sy, sz


def _expm_herm(h: np.ndarray) -> np.ndarray:
    """exp(-i h) for a batch of Hermitian matrices."""
    w, v = np.linalg.eigh(h)
    return (v * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(v, -1, -2))


def spin_frame(two_s: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Rotation exp(-i phi S_z) exp(-i theta S_y), batched over angles."""
    sx, sy, sz = spin_matrices(two_s)
    theta = np.asarray(theta, dtype=float)[..., None, None]
    phi = np.asarray(phi, dtype=float)[..., None, None]
    return _expm_herm(phi * sz) @ _expm_herm(theta * sy)


@dataclass(frozen=True)
class Party:
    kind: str  # "complex" | "real" | "spin"
    dim: int

    @property
    def two_s(self) -> int:
        return self.dim - 1

    @property
    def n_dirs(self) -> int:
        if self.kind == "complex":
            return 2 * (self.dim - 1)
        if self.kind == "real":
            return self.dim - 1
        return 2


class ProductBatch:
    """S product states; spin factors also carry their rotation frame."""

    def __init__(self, parties, factors):
        self.parties = tuple(parties)
        # complex/real: (S, d) unit vectors; spin: (S, d, d) frames
        self.factors = [np.asarray(x, dtype=complex) for x in factors]

    @property
    def size(self) -> int:
        return self.factors[0].shape[0]

    def vectors(self) -> list[np.ndarray]:
        out = []
        for p, x in zip(self.parties, self.factors):
            out.append(x[:, :, 0] if p.kind == "spin" else x)
        return out

    def take(self, idx) -> "ProductBatch":
        return ProductBatch(self.parties, [x[idx] for x in self.factors])

    @staticmethod
    def concat(batches) -> "ProductBatch":
        batches = [b for b in batches if b.size]
        parties = batches[0].parties
        return ProductBatch(parties, [np.concatenate([b.factors[j] for b in batches])
                                      for j in range(len(parties))])


def batched_kron(vectors: list[np.ndarray]) -> np.ndarray:
    out = vectors[0]
    for v in vectors[1:]:
        out = (out[..., :, None] * v[..., None, :]).reshape(*out.shape[:-1], -1)
    return out


def _tangent(party: Party, factor: np.ndarray):
    """Tangent vectors t (S, n, d) and second derivatives w (S, n, n, d)."""
    S, d = factor.shape[0], party.dim
    if party.kind == "spin":
        sx, sy, _ = spin_matrices(party.two_s)
        e0 = np.zeros(d, dtype=complex)
        e0[0] = 1.0
        gens = (sx, sy)
        t_local = np.stack([-1j * g @ e0 for g in gens])  # (2, d)
        w_local = np.stack([[-0.5 * (ga @ gb + gb @ ga) @ e0 for gb in gens] for ga in gens])
        t = np.einsum("sij,aj->sai", factor, t_local)
        w = np.einsum("sij,abj->sabi", factor, w_local)
        return t, w
    psi = factor
    if d == 1:
        return np.zeros((S, 0, 1), complex), np.zeros((S, 0, 0, 1), complex)
    # orthonormal complement of psi via QR of [psi | I]
    m = np.concatenate([psi[:, :, None], np.broadcast_to(np.eye(d), (S, d, d))], axis=2)
    if party.kind == "real":
        q, _ = np.linalg.qr(m.real)
        u = q[:, :, 1:].astype(complex)
        t = np.swapaxes(u, 1, 2)
    else:
        q, _ = np.linalg.qr(m)
        u = np.swapaxes(q[:, :, 1:], 1, 2)
        t = np.concatenate([u, 1j * u], axis=1)
    n = t.shape[1]
    w = -np.einsum("ab,si->sabi", np.eye(n), psi)
    return t, w


def _retract(party: Party, factor: np.ndarray, t: np.ndarray, x: np.ndarray) -> np.ndarray:
    if party.kind == "spin":
        sx, sy, _ = spin_matrices(party.two_s)
        h = x[:, 0, None, None] * sx + x[:, 1, None, None] * sy
        return factor @ _expm_herm(h)
    v = factor + np.einsum("sa,sai->si", x, t)
    if party.kind == "real":
        v = v.real.astype(complex)
    return v / np.linalg.norm(v, axis=1, keepdims=True)


class ProductFunctional:
    """f(Psi) = <Psi|rho|Psi> on a product manifold, with derivatives."""

    def __init__(self, rho: np.ndarray, parties):
        self.rho = np.asarray(rho, dtype=complex)
        self.parties = tuple(parties)
        self.dims = tuple(p.dim for p in self.parties)
        if int(np.prod(self.dims)) != self.rho.shape[0]:
            raise ValueError("party dimensions do not match the operator")
        self.offsets = np.cumsum([0] + [p.n_dirs for p in self.parties])
        self.scale = max(1.0, float(np.max(np.abs(self.rho))))

    def value(self, batch: ProductBatch) -> np.ndarray:
        psi = batched_kron(batch.vectors())
        return np.einsum("si,ij,sj->s", psi.conj(), self.rho, psi).real

    def _slot_products(self, vecs, replacements):
        """kron over parties, with some slots replaced by extra-axis arrays.

        ``replacements`` maps party index -> array (S, m, d); the result has
        one extra axis per replaced slot (in party order) before the last.
        """
        out = None
        for j, v in enumerate(vecs):
            if j in replacements:
                r = replacements[j]  # (S, m, d)
                if out is None:
                    out = r
                else:
                    k = out.ndim - 2  # number of extra axes so far
                    out = out[..., None, :, None] * r.reshape(
                        r.shape[0], *([1] * k), r.shape[1], 1, r.shape[2])
                    out = out.reshape(*out.shape[:-2], -1)
            else:
                out = v if out is None else (out[..., :, None] * v.reshape(
                    v.shape[0], *([1] * (out.ndim - 1)), v.shape[1])).reshape(*out.shape[:-1], -1)
        return out

    def derivatives(self, batch: ProductBatch, hessian: bool = True):
        vecs = batch.vectors()
        S = batch.size
        tangents = [_tangent(p, x) for p, x in zip(self.parties, batch.factors)]
        psi = batched_kron(vecs)
        phi = psi @ self.rho.T
        f = np.einsum("si,si->s", psi.conj(), phi).real
        n = int(self.offsets[-1])
        deltas = np.concatenate(
            [self._slot_products(vecs, {j: tangents[j][0]}) for j in range(len(vecs))], axis=1)
        grad = 2 * np.einsum("si,sai->sa", phi.conj(), deltas).real
        if not hessian:
            return f, grad, None
        rho_d = deltas @ self.rho.T
        m = np.einsum("sai,sbi->sab", deltas.conj(), rho_d)
        for j in range(len(vecs)):
            a0, a1 = self.offsets[j], self.offsets[j + 1]
            if a1 == a0:
                continue
            wj = tangents[j][1]  # (S, n, n, d)
            nj = wj.shape[1]
            dd = self._slot_products(vecs, {j: wj.reshape(S, nj * nj, -1)})
            m[:, a0:a1, a0:a1] += np.einsum("si,sai->sa", phi.conj(), dd).reshape(S, nj, nj)
            for k in range(j + 1, len(vecs)):
                b0, b1 = self.offsets[k], self.offsets[k + 1]
                if b1 == b0:
                    continue
                dd = self._slot_products(vecs, {j: tangents[j][0], k: tangents[k][0]})
                block = np.einsum("si,sabi->sab", phi.conj(), dd)
                m[:, a0:a1, b0:b1] += block
                m[:, b0:b1, a0:a1] += np.swapaxes(block, 1, 2)
        hess = 2 * m.real
        hess = (hess + np.swapaxes(hess, 1, 2)) / 2
        assert hess.shape == (S, n, n)
        return f, grad, hess

    def newton(self, batch: ProductBatch, max_iter: int = 100, tol: float = 1e-12,
               max_step: float = 0.5):
        """Damped Newton iteration on the gradient from every start.

        Converges to nearby critical points of any type (maxima, minima,
        saddles). Returns the final batch and a mask of converged rows.
        """
        factors = [x.copy() for x in batch.factors]
        S = batch.size
        converged = np.zeros(S, dtype=bool)
        active = np.arange(S)
        gtol = tol * self.scale
        for _ in range(max_iter):
            if active.size == 0:
                break
            sub = ProductBatch(self.parties, [x[active] for x in factors])
            _, grad, hess = self.derivatives(sub)
            gnorm = np.linalg.norm(grad, axis=1)
            done = gnorm <= gtol
            converged[active[done]] = True
            keep = ~done
            if not keep.any():
                break
            active, grad, hess = active[keep], grad[keep], hess[keep]
            sub = sub.take(keep)
            lam, vec = np.linalg.eigh(hess)
            cut = 1e-10 * np.maximum(np.abs(lam).max(axis=1, initial=0.0), self.scale * 1e-6)
            proj = np.einsum("sab,sa->sb", vec, grad)
            safe = np.abs(lam) > cut[:, None]
            coef = np.where(safe, proj / np.where(safe, lam, 1.0), 0.0)
            step = -np.einsum("sab,sb->sa", vec, coef)
            # steepest-ascent fallback when the Hessian carries no information
            stuck = np.linalg.norm(step, axis=1) == 0
            step[stuck] = grad[stuck]
            norm = np.linalg.norm(step, axis=1, keepdims=True)
            step = step * np.minimum(1.0, max_step / np.maximum(norm, 1e-300))
            tangents = [_tangent(p, x) for p, x in zip(self.parties, sub.factors)]
            for j, p in enumerate(self.parties):
                a0, a1 = self.offsets[j], self.offsets[j + 1]
                if a1 > a0:
                    factors[j][active] = _retract(p, sub.factors[j], tangents[j][0], step[:, a0:a1])
        else:
            if active.size:
                sub = ProductBatch(self.parties, [x[active] for x in factors])
                _, grad, _ = self.derivatives(sub, hessian=False)
                converged[active[np.linalg.norm(grad, axis=1) <= gtol]] = True
        return ProductBatch(self.parties, factors), converged


def reduced_operators(rho_tensor: np.ndarray, vecs: list[np.ndarray], j: int) -> np.ndarray:
    """Batch of operators on party j with every other party sandwiched."""
    n = len(vecs)
    rows = "abcdefghijkl"[:n]
    cols = "ABCDEFGHIJKL"[:n]
    operands = [rho_tensor]
    terms = [rows + cols]
    for k in range(n):
        if k == j:
            continue
        operands += [vecs[k].conj(), vecs[k]]
        terms += ["z" + rows[k], "z" + cols[k]]
    spec = ",".join(terms) + "->z" + rows[j] + cols[j]
    return np.einsum(spec, *operands, optimize=True)
