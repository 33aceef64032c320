"""Classical families and their stationary sets.

A family is a closed set of pure states regarded as classical. For a target
operator rho, the stationary states are the family members at which
c -> <c|rho|c> has zero derivative along the family; the finite set of them
returned here feeds the Gram system of the decomposition engine.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, asdict
from enum import Enum
from fractions import Fraction
from math import comb
from typing import Any, Sequence

import numpy as np

from .manifold import (Party, ProductBatch, ProductFunctional, batched_kron,
                       reduced_operators, spin_frame, spin_matrices)
from .operators import (DimensionError, HermitianOperator, PureState, hermitian_eig,
                        real_part_operator, _canonical_phase)

log = logging.getLogger(__name__)


class FamilyKind(str, Enum):
    ALL_PURE = "AllPure"
    ORTHONORMAL_BASIS = "OrthonormalBasis"
    TERNARY_QUBIT = "TernaryQubit"
    SPIN_COHERENT = "SpinCoherent"
    PRODUCT_COMPLEX = "ProductComplex"
    PRODUCT_REAL = "ProductReal"
    SPIN_COHERENT_PRODUCT = "SpinCoherentProduct"


class NonConvergenceError(RuntimeError):
    pass


class NotInFamilyError(ValueError):
    pass


def parse_spin(s) -> Fraction:
    """Accept 1, 1.5, "3/2", ... and return s as a Fraction with 2s integral."""
    if isinstance(s, str):
        f = Fraction(s)
    else:
        f = Fraction(s).limit_denominator(2)
        if abs(float(f) - float(s)) > 1e-9:
            raise ValueError(f"spin must be a positive multiple of 1/2, got {s!r}")
    if f <= 0 or (2 * f).denominator != 1:
        raise ValueError(f"spin must be a positive multiple of 1/2, got {s!r}")
    return f


@dataclass(frozen=True)
class ClassicalFamily:
    kind: FamilyKind
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "kind", FamilyKind(self.kind))
        p = dict(self.params)
        if self.kind in (FamilyKind.SPIN_COHERENT, FamilyKind.SPIN_COHERENT_PRODUCT):
            p["s"] = parse_spin(p.get("s", Fraction(1, 2)))
        if self.kind == FamilyKind.SPIN_COHERENT_PRODUCT:
            p["parties"] = int(p.get("parties", 2))
            if p["parties"] < 2:
                raise ValueError("product families need at least two subsystems")
        if self.kind in (FamilyKind.PRODUCT_COMPLEX, FamilyKind.PRODUCT_REAL) and "subsystem_dims" in p:
            p["subsystem_dims"] = tuple(int(k) for k in p["subsystem_dims"])
            if len(p["subsystem_dims"]) < 2:
                raise ValueError("product families need at least two subsystems")
        object.__setattr__(self, "params", p)

    # convenience constructors
    @classmethod
    def all_pure(cls):
        return cls(FamilyKind.ALL_PURE)

    @classmethod
    def orthonormal_basis(cls, basis=None, dim: int | None = None):
        params = {}
        if basis is not None:
            params["basis"] = [np.asarray(v, dtype=complex) for v in basis]
        if dim is not None:
            params["dim"] = dim
        return cls(FamilyKind.ORTHONORMAL_BASIS, params)

    @classmethod
    def ternary_qubit(cls):
        return cls(FamilyKind.TERNARY_QUBIT)

    @classmethod
    def spin_coherent(cls, s):
        return cls(FamilyKind.SPIN_COHERENT, {"s": s})

    @classmethod
    def product(cls, subsystem_dims=None, real: bool = False):
        params = {} if subsystem_dims is None else {"subsystem_dims": subsystem_dims}
        return cls(FamilyKind.PRODUCT_REAL if real else FamilyKind.PRODUCT_COMPLEX, params)

    @classmethod
    def spin_coherent_product(cls, s, parties: int = 2):
        return cls(FamilyKind.SPIN_COHERENT_PRODUCT, {"s": s, "parties": parties})

    @property
    def is_product(self) -> bool:
        return self.kind in (FamilyKind.PRODUCT_COMPLEX, FamilyKind.PRODUCT_REAL,
                             FamilyKind.SPIN_COHERENT_PRODUCT)

    def subsystem_dims(self, rho: HermitianOperator | None = None) -> tuple[int, ...] | None:
        if self.kind == FamilyKind.SPIN_COHERENT_PRODUCT:
            return (int(2 * self.params["s"]) + 1,) * self.params["parties"]
        if self.kind in (FamilyKind.PRODUCT_COMPLEX, FamilyKind.PRODUCT_REAL):
            dims = self.params.get("subsystem_dims") or (rho.subsystem_dims if rho else None)
            if dims is None:
                raise DimensionError("product family needs subsystem_dims (family or operator)")
            if len(dims) < 2:
                raise ValueError("product families need at least two subsystems")
            return tuple(dims)
        return None

    def dim(self, rho: HermitianOperator | None = None) -> int | None:
        k = self.kind
        if k == FamilyKind.TERNARY_QUBIT:
            return 2
        if k == FamilyKind.SPIN_COHERENT:
            return int(2 * self.params["s"]) + 1
        if k == FamilyKind.ORTHONORMAL_BASIS:
            if "basis" in self.params:
                return len(self.params["basis"][0])
            return self.params.get("dim", rho.dim if rho else None)
        if self.is_product:
            return int(np.prod(self.subsystem_dims(rho)))
        return self.params.get("dim", rho.dim if rho else None)

    def check_operator(self, rho: HermitianOperator) -> None:
        d = self.dim(rho)
        if d != rho.dim:
            raise DimensionError(f"{self.kind.value} family has dim {d}, operator has dim {rho.dim}")

    def basis_vectors(self, dim: int) -> list[np.ndarray]:
        if "basis" not in self.params:
            return list(np.eye(dim, dtype=complex))
        vs = [np.asarray(v, dtype=complex) for v in self.params["basis"]]
        m = np.column_stack(vs)
        if m.shape[0] != m.shape[1] or np.abs(m.conj().T @ m - np.eye(len(vs))).max() > 1e-10:
            raise ValueError("basis vectors are not an orthonormal basis")
        return vs

    def to_json(self) -> dict:
        p = {}
        for key, v in self.params.items():
            if key == "basis":
                p[key] = [{"re": np.real(x).tolist(), "im": np.imag(x).tolist()} for x in v]
            elif isinstance(v, Fraction):
                p[key] = float(v)
            elif isinstance(v, tuple):
                p[key] = list(v)
            else:
                p[key] = v
        return {"kind": self.kind.value, "params": p}

    @classmethod
    def from_json(cls, data: dict) -> "ClassicalFamily":
        params = dict(data.get("params") or {})
        if "basis" in params:
            basis = []
            for v in params["basis"]:
                if isinstance(v, dict):
                    re = np.asarray(v["re"], float)
                    basis.append(re + 1j * np.asarray(v.get("im", np.zeros_like(re)), float))
                else:
                    basis.append(np.asarray(v, dtype=complex))
            params["basis"] = basis
        return cls(FamilyKind(data["kind"]), params)


@dataclass
class SearchConfig:
    seed: int = 0
    starts: int | None = None  # random starts per branch; default 50 * parties
    max_sweeps: int = 500
    tol_g: float = 1e-10
    tol_fidelity: float = 1e-8
    spin_grid: tuple[int, int] = (64, 128)
    newton_iter: int = 100

    def to_json(self) -> dict:
        d = asdict(self)
        d["spin_grid"] = list(self.spin_grid)
        return d

    @classmethod
    def from_json(cls, data: dict) -> "SearchConfig":
        data = dict(data or {})
        if "spin_grid" in data:
            data["spin_grid"] = tuple(data["spin_grid"])
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)


@dataclass
class StationarySet:
    states: list[PureState]
    values: np.ndarray
    labels: list[str]
    defects: np.ndarray
    params: list[Any] = field(default_factory=list)
    degenerate: np.ndarray | None = None
    warnings: list[str] = field(default_factory=list)
    partial: bool = False
    stationary: np.ndarray | None = None  # False for members added by the hull search

    def __len__(self) -> int:
        return len(self.states)

    def to_json(self) -> dict:
        return {
            "states": [
                {"label": lab, "g": float(g), "defect": float(dfc), "state": st.to_json(),
                 "params": _jsonable(par), "stationary": bool(flag)}
                for st, g, lab, dfc, par, flag in zip(
                    self.states, self.values, self.labels, self.defects, self.params,
                    self.stationary if self.stationary is not None else [True] * len(self))
            ],
            "warnings": list(self.warnings),
            "partial": self.partial,
        }


def _jsonable(x):
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, PureState):
        return x.to_json()
    return float(x)


# --------------------------------------------------------------------------
# spin coherent states


def spin_coherent_state(s, theta: float, phi: float) -> PureState:
    """|theta, phi> with amplitudes sqrt(C(2s, s+m)) cos^{s+m} sin^{s-m} e^{-i m phi}.

    Basis index k holds m = s - k.
    """
    two_s = int(2 * parse_spin(s))
    return PureState.from_vector(spin_coherent_vectors(two_s, np.array([theta]), np.array([phi]))[0])


def spin_coherent_vectors(two_s: int, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    theta = np.asarray(theta, dtype=float)[:, None]
    phi = np.asarray(phi, dtype=float)[:, None]
    k = np.arange(two_s + 1)
    up = two_s - k  # s + m
    down = k  # s - m
    m = two_s / 2 - k
    binom = np.sqrt(np.array([comb(two_s, int(u)) for u in up], dtype=float))
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    return binom * c ** up * s ** down * np.exp(-1j * m * phi)


def bloch_angles(two_s: int, vec: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(theta, phi) of the spin expectation direction for a batch of vectors."""
    sx, sy, sz = spin_matrices(two_s)
    s = two_s / 2
    ex = np.einsum("si,ij,sj->s", vec.conj(), sx, vec).real / s
    ey = np.einsum("si,ij,sj->s", vec.conj(), sy, vec).real / s
    ez = np.einsum("si,ij,sj->s", vec.conj(), sz, vec).real / s
    theta = np.arctan2(np.hypot(ex, ey), ez)
    phi = np.mod(np.arctan2(ey, ex), 2 * np.pi)
    pole = (np.abs(theta) < 1e-12) | (np.abs(theta - np.pi) < 1e-12)
    theta = np.where(np.abs(theta) < 1e-12, 0.0, np.where(np.abs(theta - np.pi) < 1e-12, np.pi, theta))
    phi = np.where(pole | (np.abs(phi - 2 * np.pi) < 1e-12), 0.0, phi)
    return theta, phi


def _angle_label(theta: float, phi: float) -> str:
    def fmt(x):
        r = x / np.pi
        for den in (1, 2, 3, 4, 6, 8, 12, 16):
            num = round(r * den)
            if abs(r * den - num) < 1e-7:
                if num == 0:
                    return "0"
                frac = Fraction(num, den)
                n, d = frac.numerator, frac.denominator
                top = "π" if n == 1 else f"{n}π"
                return top if d == 1 else f"{top}/{d}"
        return f"{x:.6f}"
    if theta in (0.0, np.pi):
        return f"θ={fmt(theta)}"
    return f"θ={fmt(theta)}, φ={fmt(phi)}"


# --------------------------------------------------------------------------
# canonical lattices for continuum degeneracies

MAX_LATTICE_LEVEL = 2
SPAN_TOL = 1e-9


def _local_frames(d: int, real: bool, level: int = 0) -> dict[str, np.ndarray]:
    """Named orthonormal frames: computational plus two-level rotations.

    Level 0 holds the x-type (|j> +- |l>) and, for complex parties, y-type
    (|j> +- i|l>) frames. Each further level halves the phase (complex) or
    rotation-angle (real) spacing.
    """
    eye = np.eye(d, dtype=complex)
    frames = {"z": eye}
    steps = 2 ** (level + 1)
    for j in range(d):
        for l in range(j + 1, d):
            for k in (range(1, steps) if real else range(steps)):
                if real:
                    # a frame rotated by a equals the one rotated by a + pi/2
                    ang = np.pi * k / (2 * steps)
                    u = np.cos(ang) * eye[j] + np.sin(ang) * eye[l]
                    w = -np.sin(ang) * eye[j] + np.cos(ang) * eye[l]
                    name = f"x{j}{l}" if 2 * k == steps else f"r{k}/{2 * steps}-{j}{l}"
                else:
                    ph = np.exp(1j * np.pi * k / steps)
                    u = (eye[j] + ph * eye[l]) / np.sqrt(2)
                    w = (eye[j] - ph * eye[l]) / np.sqrt(2)
                    name = {0: "x", steps // 2: "y"}.get(k, f"p{k}/{steps}-") + f"{j}{l}"
                f = eye.copy()
                f[:, j], f[:, l] = u, w
                frames[name] = f
    return frames


_QUBIT_NAMES = {("z", 0): "0", ("z", 1): "1", ("x01", 0): "+", ("x01", 1): "-",
                ("y01", 0): "+i", ("y01", 1): "-i"}


def _product_lattice(dims: Sequence[int], real: bool, level: int = 0):
    """All products in which every party uses the same named frame."""
    frames = [_local_frames(d, real, level) for d in dims]
    common = [k for k in frames[0] if all(k in f for f in frames[1:])]
    vecs, labels = [], []
    for name in common:
        for idx in np.ndindex(*dims):
            vecs.append([frames[j][name][:, i] for j, i in enumerate(idx)])
            labels.append("|" + ",".join(
                _QUBIT_NAMES.get((name, i), f"{name}:{i}") if d == 2 else f"{name}:{i}"
                for i, d in zip(idx, dims)) + ">")
    return vecs, labels


def _spin_local_lattice(two_s: int, level: int = 0) -> list[tuple[float, float]]:
    """Poles plus equatorial points at multiples of pi/(2s) (refined per level)."""
    n_phi = max(4, 2 * two_s) * 2 ** level
    pts = [(0.0, 0.0), (np.pi, 0.0)]
    pts += [(np.pi / 2, 2 * np.pi * n / n_phi) for n in range(n_phi)]
    return pts


def _lattice(parties, level: int):
    n = len(parties)
    if parties[0].kind == "spin":
        local = [_spin_local_lattice(p.dim - 1, level) for p in parties]
        angles = [[local[j][c[j]] for j in range(n)]
                  for c in np.ndindex(*[len(l) for l in local])]
        factors = [spin_frame(parties[j].dim - 1, np.array([a[j][0] for a in angles]),
                              np.array([a[j][1] for a in angles])) for j in range(n)]
        labels = [" ⊗ ".join(_angle_label(*a[j]) for j in range(n)) for a in angles]
    else:
        vecs, labels = _product_lattice([p.dim for p in parties], parties[0].kind == "real", level)
        factors = [np.array([v[j] for v in vecs]) for j in range(n)]
    return ProductBatch(parties, factors), labels

# --------------------------------------------------------------------------
# alternating separability iteration


def _rho_for(family: ClassicalFamily, rho: HermitianOperator) -> np.ndarray:
    if family.kind == FamilyKind.PRODUCT_REAL:
        return real_part_operator(rho).entries
    return rho.entries


def _alternating(rho: np.ndarray, dims, vecs, branch: str, max_sweeps: int, tol: float,
                 real: bool):
    """Batched cyclic update: each party -> extremal eigenvector of its reduced operator."""
    n = len(dims)
    t = rho.reshape(tuple(dims) * 2)
    vecs = [np.array(v, dtype=complex) for v in vecs]
    S = vecs[0].shape[0]
    g_old = np.full(S, np.inf)
    converged = np.zeros(S, dtype=bool)
    active = np.arange(S)
    pick = -1 if branch == "max" else 0
    for _ in range(max_sweeps):
        cur = [v[active] for v in vecs]
        for j in range(n):
            red = reduced_operators(t, cur, j)
            if real:
                red = red.real
            w, u = np.linalg.eigh(red)
            cur[j] = u[:, :, pick].astype(complex)
            g = w[:, pick]
        for j in range(n):
            vecs[j][active] = cur[j]
        done = np.abs(g - g_old[active]) <= tol
        g_old[active] = g
        converged[active[done]] = True
        active = active[~done]
        if active.size == 0:
            break
    psi = batched_kron(vecs)
    g_final = np.einsum("si,ij,sj->s", psi.conj(), rho, psi).real
    return vecs, g_final, converged


def separability_eigen_iterate(rho: HermitianOperator, initial: Sequence[PureState],
                               max_sweeps: int = 500, tol: float = 1e-10,
                               branch: str = "max", real: bool = False):
    """Fixed point of the (multipartite) separability eigenvalue equations.

    Starting from ``initial`` (one state per subsystem), every party is
    replaced in turn by the largest (``branch="max"``) or smallest
    (``branch="min"``) eigenvector of its reduced operator until the value
    g stops changing by more than ``tol``. With ``real=True`` the real part
    of rho is used and all vectors stay real.

    Returns (list of PureState, g). Raises NonConvergenceError otherwise.
    """
    dims = rho.subsystem_dims
    if dims is None or len(dims) < 2:
        raise DimensionError("separability iteration needs at least two subsystems")
    if len(initial) != len(dims):
        raise ValueError("need one initial state per subsystem")
    mat = real_part_operator(rho).entries if real else rho.entries
    vecs = [st.amplitudes[None, :] for st in initial]
    vecs, g, ok = _alternating(mat, dims, vecs, branch, max_sweeps, tol, real)
    if not ok[0]:
        raise NonConvergenceError(f"no fixed point within {max_sweeps} sweeps")
    states = [PureState.from_vector(_canonical_phase(v[0]), real_only=real) for v in vecs]
    return states, float(g[0])


# --------------------------------------------------------------------------
# stationary sets


def stationary_points(family: ClassicalFamily, rho: HermitianOperator,
                      search: SearchConfig | None = None) -> StationarySet:
    """Finite set of stationary family members for ``rho``."""
    search = search or SearchConfig()
    family.check_operator(rho)
    k = family.kind
    if k == FamilyKind.ALL_PURE:
        return _all_pure(rho)
    if k == FamilyKind.ORTHONORMAL_BASIS:
        return _orthonormal(family, rho)
    if k == FamilyKind.TERNARY_QUBIT:
        return _ternary(rho)
    return _manifold_search(family, rho, search)


def _finish(states, labels, params, rho_mat, family, rho, degenerate=None, warnings=(),
            partial=False, stationary=None) -> StationarySet:
    vals = np.array([float(np.vdot(s.amplitudes, rho_mat @ s.amplitudes).real) for s in states])
    defects = np.array([stationarity_defect(family, rho, p if p is not None else s)
                        for s, p in zip(states, params)])
    order = sorted(range(len(states)), key=lambda i: (
        round(vals[i], 9),
        tuple(np.round(np.concatenate([states[i].amplitudes.real, states[i].amplitudes.imag]), 9))))
    deg = np.zeros(len(states), bool) if degenerate is None else np.asarray(degenerate)
    stat = np.ones(len(states), bool) if stationary is None else np.asarray(stationary)
    return StationarySet(
        states=[states[i] for i in order], values=vals[order], labels=[labels[i] for i in order],
        defects=defects[order], params=[params[i] for i in order], degenerate=deg[order],
        warnings=list(warnings), partial=partial, stationary=stat[order])


def _all_pure(rho):
    es = hermitian_eig(rho)
    labels = [f"eig{k}" for k in range(rho.dim)]
    return _finish(list(es.eigenvectors), labels, [None] * rho.dim, rho.entries,
                   ClassicalFamily.all_pure(), rho)


def _orthonormal(family, rho):
    vs = family.basis_vectors(rho.dim)
    states = [PureState.from_vector(v) for v in vs]
    return _finish(states, [f"|{j}>" for j in range(len(vs))], [None] * len(vs), rho.entries,
                   family, rho)


def _ternary(rho):
    off = rho.entries[1, 0]
    if abs(off) <= 1e-14:
        phis = [0.0, np.pi]
    else:
        a = float(np.mod(np.angle(off), 2 * np.pi))
        phis = [a, float(np.mod(a + np.pi, 2 * np.pi))]
    states = [PureState(np.array([1, 0])), PureState(np.array([0, 1]))]
    labels = ["|0>", "|1>"]
    params = [None, None]
    for p in phis:
        states.append(PureState.from_vector(np.array([1.0, np.exp(1j * p)])))
        labels.append(f"|φ={p:.6f}>")
        params.append(p)
    return _finish(states, labels, params, rho.entries, ClassicalFamily.ternary_qubit(), rho)


def _parties(family: ClassicalFamily, rho: HermitianOperator) -> list[Party]:
    if family.kind == FamilyKind.SPIN_COHERENT:
        return [Party("spin", rho.dim)]
    if family.kind == FamilyKind.SPIN_COHERENT_PRODUCT:
        return [Party("spin", d) for d in family.subsystem_dims()]
    kind = "real" if family.kind == FamilyKind.PRODUCT_REAL else "complex"
    return [Party(kind, d) for d in family.subsystem_dims(rho)]


def _random_factors(rng, parties, count):
    out = []
    for p in parties:
        if p.kind == "spin":
            u = rng.uniform(-1, 1, count)
            out.append(spin_frame(p.dim - 1, np.arccos(u), rng.uniform(0, 2 * np.pi, count)))
        else:
            v = rng.normal(size=(count, p.dim))
            if p.kind == "complex":
                v = v + 1j * rng.normal(size=(count, p.dim))
            out.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    return out


class _Pool:
    """Converged candidates accumulated over several Newton runs."""

    def __init__(self, parties):
        self.parties = parties
        self.factors = [[] for _ in parties]
        self.f, self.degenerate, self.saddle, self.lattice, self.labels = [], [], [], [], []

    def add(self, batch: ProductBatch, f, degenerate, saddle, lattice: bool, labels):
        for j, v in enumerate(batch.vectors()):
            self.factors[j].extend(v)
        self.f.extend(f)
        self.degenerate.extend(degenerate)
        self.saddle.extend(saddle)
        self.lattice.extend([lattice] * len(f))
        self.labels.extend(labels)

    def psi(self) -> np.ndarray:
        return batched_kron([np.array(x) for x in self.factors])


def _manifold_search(family, rho, search):
    parties = _parties(family, rho)
    dims = [p.dim for p in parties]
    rho_mat = _rho_for(family, rho)
    func = ProductFunctional(rho_mat, parties)
    rng = np.random.default_rng(search.seed)
    n_parties = len(parties)
    starts = search.starts if search.starts is not None else 50 * n_parties
    warnings = []
    spin = parties[0].kind == "spin"
    real = parties[0].kind == "real"
    pool = _Pool(parties)
    stats = {"failed": 0, "total": 0}

    def run(batch, labels=None):
        """Newton from every start; lattice starts that stay put are canonical."""
        cand, ok = func.newton(batch, max_iter=search.newton_iter)
        f, _, hess = func.derivatives(cand)
        lam = np.linalg.eigvalsh(hess) if hess.shape[1] else np.zeros((cand.size, 0))
        flat = 1e-7 * np.maximum(1.0, np.abs(lam).max(axis=1, initial=0.0))
        deg = (np.abs(lam) < flat[:, None]).any(axis=1)
        sad = (lam < -flat[:, None]).any(axis=1) & (lam > flat[:, None]).any(axis=1)
        on_lat = ok & _unmoved(batch, cand) if labels is not None else np.zeros(cand.size, bool)
        free = ok & ~on_lat
        if on_lat.any():
            pool.add(cand.take(on_lat), f[on_lat], deg[on_lat], sad[on_lat], True,
                     [labels[i] for i in np.flatnonzero(on_lat)])
        if free.any():
            pool.add(cand.take(free), f[free], deg[free], sad[free], False, [None] * int(free.sum()))
        if labels is None:
            stats["failed"] += int((~ok).sum())
            stats["total"] += ok.size

    lattice, lat_labels = _lattice(parties, 0)
    run(lattice, lat_labels)
    if spin and n_parties == 1:
        nt, nph = search.spin_grid
        th = (np.arange(nt) + 0.5) * np.pi / nt
        ph = np.arange(nph) * 2 * np.pi / nph
        T, P = np.meshgrid(th, ph, indexing="ij")
        grid = ProductBatch(parties, [spin_frame(dims[0] - 1, T.ravel(), P.ravel())])
        run(grid.take(_grid_seeds(func, grid, (nt, nph))))
    else:
        run(ProductBatch(parties, _random_factors(rng, parties, starts)))
    if not spin:
        # alternating iteration on both extremal branches plus basis starts
        idx = list(np.ndindex(*dims))
        basis_factors = [np.array([np.eye(dims[j], dtype=complex)[c[j]] for c in idx])
                         for j in range(n_parties)]
        nonconv = 0
        for branch in ("max", "min"):
            init = _random_factors(rng, parties, starts)
            init = [np.concatenate([a, b]) for a, b in zip(init, basis_factors)]
            vecs, _, ok = _alternating(rho_mat, dims, init, branch, search.max_sweeps,
                                       search.tol_g, real)
            nonconv += int((~ok).sum())
            run(ProductBatch(parties, [v[ok] for v in vecs]))
        if nonconv:
            log.info("%d alternating starts did not converge", nonconv)
    if not pool.f:
        raise NonConvergenceError("no start converged to a stationary point")
    partial = stats["failed"] > 0.5 * max(stats["total"], 1)
    if partial:
        warnings.append(f"{stats['failed']} of {stats['total']} starts did not converge")

    target = _achievable_residual(rho_mat, parties)
    accepted, psi = _select(pool, search.tol_fidelity)
    level = 0
    # refinement only pays off for states whose symmetry puts stationary points on the lattice
    symmetric = any(pool.lattice)
    while (symmetric and level < MAX_LATTICE_LEVEL
           and _span_residual(psi[accepted], rho_mat) > target + SPAN_TOL):
        level += 1
        batch, labels = _lattice(parties, level)
        run(batch, labels)
        accepted, psi = _select(pool, search.tol_fidelity)
    if level:
        log.info("canonical lattice refined to level %d", level)
    if _span_residual(psi[accepted], rho_mat) > target + SPAN_TOL:
        more, psi = _select(pool, search.tol_fidelity, keep_all_degenerate=True)
        if _span_residual(psi[more], rho_mat) < _span_residual(psi[accepted], rho_mat) - SPAN_TOL:
            accepted = more

    # Symmetric states can carry large orbits of isolated saddles that a finite
    # multistart only samples. When the canonical points already span rho as
    # well as everything found, keep them alone: deterministic and sufficient.
    lat = np.array(pool.lattice)
    on_lat = [i for i in accepted if lat[i]]
    if on_lat and len(on_lat) < len(accepted):
        if _span_residual(psi[on_lat], rho_mat) <= _span_residual(psi[accepted], rho_mat) + 1e-10:
            log.info("canonical lattice spans rho; dropping %d off-lattice points",
                     len(accepted) - len(on_lat))
            accepted = on_lat
    deg = np.array(pool.degenerate)
    if any(not lat[i] and deg[i] for i in accepted):
        warnings.append("stationary continuum not covered by the canonical lattice; "
                        "representatives are seed dependent")

    states, labels, params = [], [], []
    for i in accepted:
        st, lab, par = _member_entry(parties, [np.asarray(pool.factors[j][i]) for j in range(n_parties)])
        states.append(st)
        labels.append(pool.labels[i] or lab)
        params.append(par)
    return _finish(states, labels, params, rho_mat, family, rho,
                   degenerate=[bool(deg[i]) for i in accepted], warnings=warnings,
                   partial=partial)


def _member_entry(parties, fac):
    """(state, label, params) for a family member given its local factors."""
    if parties[0].kind == "spin":
        angles, factors = [], []
        for p, v in zip(parties, fac):
            th, ph = bloch_angles(p.dim - 1, v[None, :])
            angles.append((float(th[0]), float(ph[0])))
            factors.append(spin_coherent_vectors(p.dim - 1, th, ph)[0])
        label = " ⊗ ".join(_angle_label(*a) for a in angles)
        par = angles[0] if len(parties) == 1 else [x for a in angles for x in a]
    else:
        real = parties[0].kind == "real"
        factors = [_canonical_phase(v) for v in fac]
        if real:
            factors = [v.real.astype(complex) for v in factors]
        label = _product_label(factors)
        par = [PureState.from_vector(v, real_only=real) for v in factors]
    vec = factors[0]
    for v in factors[1:]:
        vec = np.kron(vec, v)
    return PureState.from_vector(vec, real_only=parties[0].kind == "real"), label, par


def with_members(d: StationarySet, family: ClassicalFamily, rho: HermitianOperator,
                 vectors: Sequence[np.ndarray]) -> StationarySet:
    """Extend a stationary set by further family members (flagged non-stationary)."""
    parties = _parties(family, rho)
    dims = [p.dim for p in parties]
    states, labels, params = list(d.states), list(d.labels), list(d.params)
    flags = list(d.stationary if d.stationary is not None else np.ones(len(d), bool))
    have = np.array([s.amplitudes for s in states])
    for v in vectors:
        if len(have) and np.max(np.abs(have.conj() @ v) ** 2) >= 1 - 1e-12:
            continue
        t = np.asarray(v).reshape(dims)
        fac = [np.linalg.svd(np.moveaxis(t, j, 0).reshape(dims[j], -1))[0][:, 0]
               for j in range(len(dims))]
        st, lab, par = _member_entry(parties, fac)
        states.append(st)
        labels.append(lab)
        params.append(par)
        flags.append(False)
        have = np.vstack([have, st.amplitudes]) if len(have) else st.amplitudes[None, :]
    deg = list(d.degenerate if d.degenerate is not None else np.zeros(len(d), bool))
    deg += [False] * (len(states) - len(deg))
    return _finish(states, labels, params, _rho_for(family, rho), family, rho, degenerate=deg,
                   warnings=d.warnings, partial=d.partial, stationary=flags)


def _grid_seeds(func: ProductFunctional, grid: ProductBatch, shape, extra: int = 64) -> np.ndarray:
    """Grid cells whose gradient norm is minimal among their 8 neighbours.

    Every stationary point lies next to such a cell once the grid resolves
    the function, so Newton only needs to start there.
    """
    _, grad, _ = func.derivatives(grid, hessian=False)
    gn = np.linalg.norm(grad, axis=1).reshape(shape)
    padded = np.pad(gn, ((1, 1), (0, 0)), mode="edge")
    local = np.ones(shape, bool)
    for di in (-1, 0, 1):
        for dj in (-1, 0, 1):
            if di or dj:
                nb = np.roll(padded, dj, axis=1)[1 + di:1 + di + shape[0]]
                local &= gn <= nb
    idx = set(np.flatnonzero(local.ravel()).tolist())
    idx.update(np.argsort(gn.ravel())[:extra].tolist())
    return np.array(sorted(idx))


def _select(pool: _Pool, tol_fidelity: float, keep_all_degenerate: bool = False):
    """Deduplicated candidate indices: lattice first, then regular, then degenerate."""
    psi = pool.psi()
    f = np.array(pool.f)
    lat = np.array(pool.lattice)
    deg = np.array(pool.degenerate)
    sad = np.array(pool.saddle)
    accepted: list[int] = []
    acc = np.zeros((0, psi.shape[1]), complex)

    def try_add(i, cluster=False):
        nonlocal acc
        if acc.shape[0]:
            fid = np.abs(acc.conj() @ psi[i]) ** 2
            if np.any(fid >= 1 - tol_fidelity):
                return False
            if cluster and np.any((np.abs(f[accepted] - f[i]) <= 1e-9) & (fid >= 1 - 1e-4)):
                return False
        accepted.append(i)
        acc = np.vstack([acc, psi[i]])
        return True

    for i in np.flatnonzero(lat):
        try_add(i)
    regular = np.flatnonzero(~lat & ~deg)
    for i in regular[np.argsort(-f[regular], kind="stable")]:
        try_add(i)
    covered = f[accepted].copy()
    degen = np.flatnonzero(~lat & deg)
    dropped = clustered = 0
    for i in degen[np.argsort(-f[degen], kind="stable")]:
        if not keep_all_degenerate and (sad[i] or np.any(np.abs(covered - f[i]) <= 1e-9)):
            dropped += 1
            continue
        if not try_add(i, cluster=True):
            clustered += 1
    if dropped or clustered:
        log.debug("degenerate stationary points: %d dropped, %d clustered", dropped, clustered)
    return accepted, psi


def _achievable_residual(rho: np.ndarray, parties) -> float:
    """Distance from rho to the span of all family projectors.

    Complex and spin-coherent projectors span every Hermitian operator. Real
    product projectors span the real operators that are symmetric under each
    partial transpose.
    """
    if parties[0].kind != "real":
        return 0.0
    dims = [p.dim for p in parties]
    n = len(dims)
    t = rho.real.reshape(tuple(dims) * 2)
    for j in range(n):
        t = (t + np.swapaxes(t, j, n + j)) / 2
    return float(np.linalg.norm(rho - t.reshape(rho.shape)))


def _span_residual(vecs: np.ndarray, rho: np.ndarray) -> float:
    """HS distance from rho to the real span of the projectors |v><v|."""
    proj = np.einsum("ki,kj->kij", vecs, vecs.conj()).reshape(len(vecs), -1)
    a = np.concatenate([proj.real, proj.imag], axis=1).T
    b = np.concatenate([rho.real.ravel(), rho.imag.ravel()])
    x, *_ = np.linalg.lstsq(a, b, rcond=None)
    return float(np.linalg.norm(a @ x - b))


def _unmoved(a: ProductBatch, b: ProductBatch) -> np.ndarray:
    fa = batched_kron(a.vectors())
    fb = batched_kron(b.vectors())
    return np.abs(np.einsum("si,si->s", fa.conj(), fb)) ** 2 >= 1 - 1e-12


def _product_label(factors) -> str:
    parts = []
    for v in factors:
        if v.shape[0] == 2:
            x = 2 * (v[0].conjugate() * v[1]).real
            y = 2 * (v[0].conjugate() * v[1]).imag
            z = abs(v[0]) ** 2 - abs(v[1]) ** 2
            parts.append(f"n=({x:+.4f},{y:+.4f},{z:+.4f})")
        else:
            parts.append("[" + ",".join(f"{c.real:+.4f}{c.imag:+.4f}i" for c in v) + "]")
    return " ⊗ ".join(parts)


# --------------------------------------------------------------------------
# stationarity defect


def _spin_angle_gradient(rho_mat, two_s_list, angles) -> np.ndarray:
    """Gradient of <theta,phi|rho|theta,phi> in the angles of every party."""
    vecs, dth, dph = [], [], []
    for two_s, (th, ph) in zip(two_s_list, angles):
        sx, sy, sz = spin_matrices(two_s)
        v = spin_coherent_vectors(two_s, np.array([th]), np.array([ph]))[0]
        # d/dphi acts as -i S_z; d/dtheta as -i S_y in the frame before the z rotation
        rz = spin_frame(two_s, np.array([0.0]), np.array([ph]))[0]
        base = spin_frame(two_s, np.array([th]), np.array([0.0]))[0][:, 0]
        vecs.append(rz @ base)
        dth.append(rz @ (-1j * sy @ base))
        dph.append(-1j * sz @ (rz @ base))
    full = vecs[0]
    for v in vecs[1:]:
        full = np.kron(full, v)
    phi = rho_mat @ full
    grad = []
    for j in range(len(vecs)):
        for dv in (dth[j], dph[j]):
            parts = vecs[:j] + [dv] + vecs[j + 1:]
            x = parts[0]
            for p in parts[1:]:
                x = np.kron(x, p)
            grad.append(2 * np.vdot(phi, x).real)
    return np.array(grad)


def factorize_product(state: PureState, dims: Sequence[int]) -> list[PureState]:
    """Split a product vector into its factors; raises NotInFamilyError otherwise."""
    t = state.amplitudes.reshape(dims)
    factors = []
    for j in range(len(dims)):
        m = np.moveaxis(t, j, 0).reshape(dims[j], -1)
        u, sv, _ = np.linalg.svd(m)
        factors.append(u[:, 0])
    vec = factors[0]
    for f in factors[1:]:
        vec = np.kron(vec, f)
    if abs(np.vdot(vec, state.amplitudes)) ** 2 < 1 - 1e-8:
        raise NotInFamilyError("state is not a product state")
    return [PureState.from_vector(_canonical_phase(f)) for f in factors]


def stationarity_defect(family: ClassicalFamily, rho: HermitianOperator, state) -> float:
    """Euclidean norm of the derivative of (rho|Gamma(t)) at a family member.

    ``state`` is a PureState, an angle tuple for spin families (theta, phi per
    party), an azimuth for the ternary family, or a list of factors for
    product families. Isolated family members have defect 0.
    """
    k = family.kind
    mat = rho.entries
    if k == FamilyKind.ALL_PURE:
        v = state.amplitudes
        r = mat @ v
        return float(2 * np.linalg.norm(r - np.vdot(v, r) * v))
    if k == FamilyKind.ORTHONORMAL_BASIS:
        for b in family.basis_vectors(rho.dim):
            if abs(np.vdot(b, state.amplitudes)) ** 2 >= 1 - 1e-8:
                return 0.0
        raise NotInFamilyError("state is not a basis vector")
    if k == FamilyKind.TERNARY_QUBIT:
        if isinstance(state, PureState):
            a = state.amplitudes
            if abs(a[0]) ** 2 >= 1 - 1e-8 or abs(a[1]) ** 2 >= 1 - 1e-8:
                return 0.0
            if abs(abs(a[0]) ** 2 - 0.5) > 1e-8:
                raise NotInFamilyError("state is neither a pole nor an equatorial state")
            state = float(np.angle(a[1] / a[0]))
        # d/dphi [1/2 + Re(e^{-i phi} rho_10)]
        return float(abs(np.imag(np.exp(-1j * state) * mat[1, 0])))
    if k == FamilyKind.SPIN_COHERENT:
        two_s = rho.dim - 1
        if isinstance(state, PureState):
            th, ph = bloch_angles(two_s, state.amplitudes[None, :])
            ref = spin_coherent_vectors(two_s, th, ph)[0]
            if abs(np.vdot(ref, state.amplitudes)) ** 2 < 1 - 1e-8:
                raise NotInFamilyError("state is not a spin coherent state")
            state = (float(th[0]), float(ph[0]))
        return float(np.linalg.norm(_spin_angle_gradient(mat, [two_s], [tuple(state)])))
    if k == FamilyKind.SPIN_COHERENT_PRODUCT:
        dims = family.subsystem_dims()
        two_s = [d - 1 for d in dims]
        if isinstance(state, PureState):
            factors = factorize_product(state, dims)
            angles = []
            for ts, fct in zip(two_s, factors):
                th, ph = bloch_angles(ts, fct.amplitudes[None, :])
                ref = spin_coherent_vectors(ts, th, ph)[0]
                if abs(np.vdot(ref, fct.amplitudes)) ** 2 < 1 - 1e-8:
                    raise NotInFamilyError("factor is not a spin coherent state")
                angles.append((float(th[0]), float(ph[0])))
        else:
            flat = list(state)
            angles = [(flat[2 * j], flat[2 * j + 1]) for j in range(len(dims))]
        return float(np.linalg.norm(_spin_angle_gradient(mat, two_s, angles)))
    # complex / real products: Riemannian gradient in orthonormal tangent coordinates
    dims = family.subsystem_dims(rho)
    real = k == FamilyKind.PRODUCT_REAL
    if isinstance(state, PureState):
        state = factorize_product(state, dims)
    if real and any(np.abs(s.amplitudes.imag).max() > 1e-8 for s in state):
        raise NotInFamilyError("state has complex amplitudes")
    parties = _parties(family, rho)
    func = ProductFunctional(_rho_for(family, rho), parties)
    factors = [(s.amplitudes.real.astype(complex) if real else s.amplitudes)[None, :] for s in state]
    _, grad, _ = func.derivatives(ProductBatch(parties, factors), hessian=False)
    return float(np.linalg.norm(grad[0]))
