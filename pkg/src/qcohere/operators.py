"""Dense Hermitian operators, pure states and the linear algebra around them.

Everything here is small (d <= 256) and dense. Values are immutable once
constructed; all operations return new objects.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

HERMITIAN_TOL = 1e-12
NORM_TOL = 1e-12
DEGENERATE_GAP = 1e-9


class DimensionError(ValueError):
    pass


class NotHermitianError(ValueError):
    pass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HermitianOperator:
    """A d x d complex Hermitian matrix, optionally carrying a tensor structure.

    Inputs that are Hermitian to within ``HERMITIAN_TOL`` (scaled by the
    largest entry) are symmetrized; anything worse is rejected.
    """

    entries: np.ndarray
    subsystem_dims: tuple[int, ...] | None = None

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or a.shape[0] == 0:
            raise DimensionError(f"expected a non-empty square matrix, got shape {a.shape}")
        scale = max(1.0, float(np.max(np.abs(a))))
        if np.max(np.abs(a - a.conj().T)) > HERMITIAN_TOL * scale:
            raise NotHermitianError("matrix is not Hermitian within tolerance")
        object.__setattr__(self, "entries", _frozen((a + a.conj().T) / 2))
        if self.subsystem_dims is not None:
            dims = tuple(int(k) for k in self.subsystem_dims)
            if any(k < 1 for k in dims) or int(np.prod(dims)) != a.shape[0]:
                raise DimensionError(f"subsystem_dims {dims} do not multiply to {a.shape[0]}")
            object.__setattr__(self, "subsystem_dims", dims)

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    @property
    def trace(self) -> float:
        return float(np.trace(self.entries).real)

    def hs_norm(self) -> float:
        return float(np.sqrt(max(hs_inner(self, self), 0.0)))

    def min_eigenvalue(self) -> float:
        return float(np.linalg.eigvalsh(self.entries)[0])

    def with_dims(self, subsystem_dims: Sequence[int] | None) -> "HermitianOperator":
        return HermitianOperator(self.entries, subsystem_dims)

    def __add__(self, other: "HermitianOperator") -> "HermitianOperator":
        _check_same_dim(self, other)
        return HermitianOperator(self.entries + other.entries, self.subsystem_dims)

    def __sub__(self, other: "HermitianOperator") -> "HermitianOperator":
        _check_same_dim(self, other)
        return HermitianOperator(self.entries - other.entries, self.subsystem_dims)

    def scaled(self, factor: float) -> "HermitianOperator":
        return HermitianOperator(float(factor) * self.entries, self.subsystem_dims)

    # JSON interchange: {"dim", "subsystem_dims", "re", "im"}
    def to_json(self) -> dict:
        return {
            "dim": self.dim,
            "subsystem_dims": list(self.subsystem_dims) if self.subsystem_dims else None,
            "re": self.entries.real.tolist(),
            "im": self.entries.imag.tolist(),
        }

    @classmethod
    def from_json(cls, data: dict) -> "HermitianOperator":
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
        if re.shape != im.shape:
            raise DimensionError("re and im parts differ in shape")
        op = cls(re + 1j * im, data.get("subsystem_dims"))
        if "dim" in data and int(data["dim"]) != op.dim:
            raise DimensionError(f"declared dim {data['dim']} != matrix size {op.dim}")
        return op

    def dumps(self) -> str:
        return json.dumps(self.to_json())


@dataclass(frozen=True, eq=False)
class PureState:
    """A unit vector. ``real_only`` marks states constrained to real amplitudes."""

    amplitudes: np.ndarray
    real_only: bool = False

    def __post_init__(self):
        v = np.asarray(self.amplitudes, dtype=complex).reshape(-1)
        if v.size == 0:
            raise DimensionError("empty state vector")
        if abs(np.linalg.norm(v) - 1.0) > NORM_TOL:
            raise ValueError(f"state is not normalized (norm {np.linalg.norm(v)!r})")
        if self.real_only:
            if np.max(np.abs(v.imag)) > NORM_TOL:
                raise ValueError("real_only state has imaginary amplitudes")
            v = v.real.astype(complex)
        object.__setattr__(self, "amplitudes", _frozen(v))

    @classmethod
    def from_vector(cls, v, real_only: bool = False) -> "PureState":
        v = np.asarray(v, dtype=complex).reshape(-1)
        if real_only:
            v = v.real.astype(complex)
        n = np.linalg.norm(v)
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return cls(v / n, real_only)

    @property
    def dim(self) -> int:
        return self.amplitudes.shape[0]

    def projector(self, subsystem_dims: Sequence[int] | None = None) -> HermitianOperator:
        v = self.amplitudes
        return HermitianOperator(np.outer(v, v.conj()), subsystem_dims)

    def overlap(self, other: "PureState") -> complex:
        return complex(np.vdot(self.amplitudes, other.amplitudes))

    def fidelity(self, other: "PureState") -> float:
        return abs(self.overlap(other)) ** 2

    def expectation(self, op: HermitianOperator) -> float:
        v = self.amplitudes
        return float(np.vdot(v, op.entries @ v).real)

    def to_json(self) -> dict:
        return {"re": self.amplitudes.real.tolist(), "im": self.amplitudes.imag.tolist(),
                "real_only": self.real_only}

    @classmethod
    def from_json(cls, data: dict) -> "PureState":
        re = np.asarray(data["re"], dtype=float)
        im = np.asarray(data.get("im", np.zeros_like(re)), dtype=float)
        return cls.from_vector(re + 1j * im, bool(data.get("real_only", False)))


@dataclass(frozen=True, eq=False)
class EigenSystem:
    eigenvalues: np.ndarray
    eigenvectors: tuple[PureState, ...] = field(default_factory=tuple)

    def matrix(self) -> np.ndarray:
        """Eigenvectors as the columns of a unitary."""
        return np.column_stack([v.amplitudes for v in self.eigenvectors])

    def reconstruct(self) -> np.ndarray:
        V = self.matrix()
        return (V * self.eigenvalues) @ V.conj().T


def _check_same_dim(a: HermitianOperator, b: HermitianOperator) -> None:
    if a.dim != b.dim:
        raise DimensionError(f"dimension mismatch: {a.dim} vs {b.dim}")


def hs_inner(a: HermitianOperator, b: HermitianOperator) -> float:
    """Hilbert-Schmidt product tr(a b) of two Hermitian operators."""
    _check_same_dim(a, b)
    # tr(ab) = sum_ij a_ij b_ji = sum_ij a_ij conj(b_ij); the pairing below is symmetric in a, b
    x, y = a.entries, b.entries
    return float(np.sum(x.real * y.real) + np.sum(x.imag * y.imag))


def _jacobi_eigh(a: np.ndarray, max_sweeps: int = 100) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi diagonalization of a complex Hermitian matrix."""
    a = np.array(a, dtype=complex)
    n = a.shape[0]
    v = np.eye(n, dtype=complex)
    scale = np.linalg.norm(a)
    if scale == 0.0 or n == 1:
        return np.real(np.diag(a)).copy(), v
    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= 1e-15 * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                mag = abs(apq)
                if mag <= 1e-300:
                    continue
                phase = apq / mag
                app, aqq = a[p, p].real, a[q, q].real
                tau = (aqq - app) / (2.0 * mag)
                t = (1.0 if tau >= 0 else -1.0) / (abs(tau) + np.sqrt(1.0 + tau * tau))
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                # U = diag(1, conj(phase)) @ [[c, s], [-s, c]]
                u = np.array([[c, s], [-s * np.conj(phase), c * np.conj(phase)]])
                idx = [p, q]
                a[:, idx] = a[:, idx] @ u
                a[idx, :] = u.conj().T @ a[idx, :]
                a[p, q] = a[q, p] = 0.0
                a[p, p] = a[p, p].real
                a[q, q] = a[q, q].real
                v[:, idx] = v[:, idx] @ u
    return np.real(np.diag(a)).copy(), v


def _canonical_phase(v: np.ndarray) -> np.ndarray:
    """Rotate a vector so its first non-negligible entry is real positive."""
    mags = np.abs(v)
    k = int(np.argmax(mags > mags.max() * 1e-8))
    return v * (abs(v[k]) / v[k])


def hermitian_eig(a: HermitianOperator) -> EigenSystem:
    """Full spectrum in ascending order with orthonormal eigenvectors.

    Output is deterministic: eigenvectors in a degenerate cluster (gap below
    1e-9) are re-orthonormalized by Gram-Schmidt in index order, and each
    vector gets a canonical phase.
    """
    w, v = _jacobi_eigh(a.entries)
    order = np.argsort(w, kind="stable")
    w, v = w[order], v[:, order]
    n = len(w)
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[stop - 1] < DEGENERATE_GAP:
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            q = np.zeros_like(block)
            for k in range(block.shape[1]):
                x = block[:, k] - q[:, :k] @ (q[:, :k].conj().T @ block[:, k])
                q[:, k] = x / np.linalg.norm(x)
            v[:, start:stop] = q
        start = stop
    vectors = tuple(PureState.from_vector(_canonical_phase(v[:, k])) for k in range(n))
    return EigenSystem(_frozen(w), vectors)


def real_part_operator(a: HermitianOperator) -> HermitianOperator:
    """Symmetric real part (a + conj(a))/2."""
    return HermitianOperator(a.entries.real.astype(complex), a.subsystem_dims)


def imaginary_part_matrix(a: HermitianOperator) -> np.ndarray:
    """Antisymmetric real matrix m with a = Re(a) + i m."""
    return np.array(a.entries.imag)


def tensor(a: HermitianOperator, b: HermitianOperator) -> HermitianOperator:
    da = a.subsystem_dims or (a.dim,)
    db = b.subsystem_dims or (b.dim,)
    return HermitianOperator(np.kron(a.entries, b.entries), da + db)


def tensor_all(ops: Iterable[HermitianOperator]) -> HermitianOperator:
    ops = list(ops)
    out = ops[0]
    for op in ops[1:]:
        out = tensor(out, op)
    return out


def product_vector(states: Sequence[PureState | np.ndarray]) -> np.ndarray:
    out = np.ones(1, dtype=complex)
    for s in states:
        out = np.kron(out, s.amplitudes if isinstance(s, PureState) else np.asarray(s))
    return out


def reduced_operator(rho: HermitianOperator,
                     fixed_states: Sequence[tuple[int, PureState]]) -> HermitianOperator:
    """Sandwich ``rho`` with pure states on all but one subsystem.

    ``fixed_states`` pairs subsystem indices with the states to fix there;
    exactly one subsystem must stay free. The result acts on that subsystem.
    """
    dims = rho.subsystem_dims
    if dims is None:
        raise DimensionError("operator has no subsystem structure")
    n = len(dims)
    fixed = dict()
    for idx, state in fixed_states:
        if not 0 <= idx < n:
            raise IndexError(f"subsystem index {idx} out of range for {n} parties")
        if idx in fixed:
            raise ValueError(f"subsystem {idx} fixed twice")
        if state.dim != dims[idx]:
            raise DimensionError(f"state of dim {state.dim} on subsystem of dim {dims[idx]}")
        fixed[idx] = state.amplitudes
    free = [k for k in range(n) if k not in fixed]
    if len(free) != 1:
        raise ValueError("exactly one subsystem must be left free")
    t = rho.entries.reshape(dims + dims)
    # contract kets (axes n..2n-1) and bras (axes 0..n-1), highest index first
    for k in sorted(fixed, reverse=True):
        psi = fixed[k]
        t = np.tensordot(t, psi, axes=([n + k], [0]))
        t = np.tensordot(psi.conj(), t, axes=([0], [k]))
        n -= 1
    return HermitianOperator(t.reshape(dims[free[0]], dims[free[0]]))
