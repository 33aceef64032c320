"""Gram system, nonnegative solvability and the full decomposition pipeline.

For stationary states c_k the weights solve G p = g with
G_jk = |<c_j|c_k>|^2 and g_j = <c_j|rho|c_j>. A nonnegative solution means
rho minus its residual is a statistical mixture of classical states.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from scipy.optimize import linprog

from .families import (ClassicalFamily, SearchConfig, StationarySet, _achievable_residual,
                       _parties, stationary_points, with_members)
from .lp import LPError, least_distance, simplex
from .membership import CONTINUOUS, certify_membership
from .operators import HermitianOperator

log = logging.getLogger(__name__)

SOLVED_TOL = 1e-8
INSUFFICIENT_TOL = 1e-6
PSD_TOL = 1e-10
TRACE_TOL = 1e-12
SMALL_LP = 20  # states; above this the LP goes to HiGHS


class Verdict(str, Enum):
    CLASSICAL = "Classical"
    NEGATIVE = "NegativeQuasiprobability"
    RESIDUAL = "ResidualNonzero"
    BOTH = "Both"


class ValidationError(ValueError):
    pass


@dataclass(frozen=True)
class Tolerances:
    tol_neg: float = 1e-9
    tol_res: float = 1e-8


@dataclass
class GramSystem:
    gram: np.ndarray
    target: np.ndarray
    states: StationarySet


@dataclass
class Decomposition:
    weights: np.ndarray
    states: StationarySet
    residual: HermitianOperator
    residual_norm: float
    negativity: float
    verdict: Verdict
    consistency_defect: float
    feasible: bool
    consistency: str = "solved"  # solved | marginal | insufficient
    warnings: list[str] = field(default_factory=list)
    membership: str | None = None  # hull search outcome: member | nonmember | undecided

    @property
    def labels(self) -> list[str]:
        return self.states.labels

    def weight_of(self, label: str) -> float:
        return float(self.weights[self.states.labels.index(label)])

    def to_json(self) -> dict:
        return {
            "weights": [{"label": lab, "p": float(p), "state": st.to_json()}
                        for lab, p, st in zip(self.states.labels, self.weights, self.states.states)],
            "residual": self.residual.to_json(),
            "residual_norm": float(self.residual_norm),
            "negativity": float(self.negativity),
            "verdict": self.verdict.value,
            "consistency_defect": float(self.consistency_defect),
        }


def build_gram(d: StationarySet, rho: HermitianOperator) -> GramSystem:
    if len(d) == 0:
        raise ValueError("empty stationary set")
    a = np.array([s.amplitudes for s in d.states])
    if a.shape[1] != rho.dim:
        raise ValueError(f"states have dim {a.shape[1]}, operator has dim {rho.dim}")
    gram = np.abs(a.conj() @ a.T) ** 2
    gram = (gram + gram.T) / 2
    np.fill_diagonal(gram, 1.0)
    target = np.einsum("ki,ij,kj->k", a.conj(), rho.entries, a).real
    return GramSystem(gram, target, d)


def _reduced_system(gram, target):
    """Full-row-rank system M p = b equivalent to G p = g on the range of G."""
    lam, vec = np.linalg.eigh(gram)
    cut = 1e-10 * len(lam) * max(lam.max(initial=0.0), 1.0)
    keep = lam > cut
    lam, vec = lam[keep], vec[:, keep]
    m = np.sqrt(lam)[:, None] * vec.T
    b = (vec.T @ target) / np.sqrt(lam)
    return m, b, lam, vec


def solve_nonneg(sys: GramSystem, tol_neg: float = 1e-9) -> tuple[np.ndarray, bool]:
    """Canonical solution of G p = g and whether it is nonnegative.

    Invertible G: the unique solution. Otherwise the minimal-negativity
    solution (simplex on p = p+ - p-), tie-broken by the smallest norm on the
    optimal face.
    """
    gram, target = sys.gram, sys.target
    k = len(target)
    m, b, lam, vec = _reduced_system(gram, target)
    if lam.size == k:
        p = vec @ ((vec.T @ target) / lam)
        return p, bool(p.min() >= -tol_neg)

    a = np.hstack([m, -m])
    n_star, p_vertex = _min_negativity(a, b, k)

    # min ||p|| on {M p = b, sum(p-) <= N*}; inequality form for least_distance
    slack = 1e-10 * max(1.0, n_star)
    rows = np.vstack([a, -a, np.eye(2 * k), np.concatenate([np.zeros(k), -np.ones(k)])[None, :]])
    h = np.concatenate([b, -b, np.zeros(2 * k), [-(n_star + slack)]])
    y = least_distance(rows, h)
    p = p_vertex if y is None else _polish(m, b, y[:k] - y[k:], p_vertex)
    feasible = bool(n_star <= tol_neg) and p.min() >= -max(tol_neg, 1e-9)
    if n_star <= tol_neg:
        p = np.where(p < 0, np.maximum(p, -tol_neg), p)
    return p, feasible


def _min_negativity(a, b, k):
    """min sum(p-) s.t. M (p+ - p-) = b; returns (optimum, p).

    Small systems use the in-house tableau simplex (fast, exact vertices);
    larger or numerically awkward ones go to HiGHS.
    """
    c = np.concatenate([np.zeros(k), np.ones(k)])
    tol = 1e-9 * max(1.0, np.linalg.norm(b))
    if k <= SMALL_LP:
        try:
            res = simplex(c, a, b)
            if np.linalg.norm(a @ res.x - b) <= tol:
                return max(res.value, 0.0), res.x[:k] - res.x[k:]
        except LPError as exc:
            log.info("tableau simplex failed (%s); using HiGHS", exc)
    res = linprog(c, A_eq=a, b_eq=b, bounds=(0, None), method="highs")
    if res.status != 0:
        raise LPError(f"HiGHS: {res.message}")
    return max(float(res.fun), 0.0), res.x[:k] - res.x[k:]


def _polish(m, b, p, fallback):
    """Re-solve on the sign pattern of p to remove NNLS round-off."""
    scale = max(1.0, np.abs(p).max())
    zero = np.abs(p) <= 1e-9 * scale
    sub = np.flatnonzero(~zero)
    q = np.zeros_like(p)
    if sub.size:
        q[sub], *_ = np.linalg.lstsq(m[:, sub], b, rcond=None)
    ok = np.all(np.sign(q[sub]) == np.sign(p[sub])) and np.linalg.norm(m @ q - b) <= 1e-11 * max(1.0, np.linalg.norm(b))
    if ok and np.abs(q - p).max() <= 1e-6 * scale:
        return q
    if np.linalg.norm(m @ p - b) <= 1e-8 * max(1.0, np.linalg.norm(b)):
        return p
    return fallback


def residual(rho: HermitianOperator, d: StationarySet, p: np.ndarray) -> HermitianOperator:
    """rho - sum_k p_k |c_k><c_k|."""
    a = np.array([s.amplitudes for s in d.states])
    if len(p) != len(a):
        raise ValueError("weight vector length differs from the stationary set")
    mix = np.einsum("k,ki,kj->ij", np.asarray(p, float), a, a.conj())
    return HermitianOperator(rho.entries - mix, rho.subsystem_dims)


def validate_state(rho: HermitianOperator) -> None:
    if abs(rho.trace - 1) > TRACE_TOL * max(1, rho.dim) * 10:
        raise ValidationError(f"trace is {rho.trace!r}, expected 1")
    lo = rho.min_eigenvalue()
    if lo < -PSD_TOL:
        raise ValidationError(f"operator is not positive semidefinite (min eigenvalue {lo:.3e})")


def verdict_of(feasible: bool, residual_norm: float, tol_res: float) -> Verdict:
    small = residual_norm <= tol_res
    if feasible:
        return Verdict.CLASSICAL if small else Verdict.RESIDUAL
    return Verdict.NEGATIVE if small else Verdict.BOTH


def decompose(rho: HermitianOperator, family: ClassicalFamily, search: SearchConfig | None = None,
              tolerances: Tolerances | None = None, validate_psd: bool = True,
              certify: bool = True) -> Decomposition:
    """stationary points -> Gram system -> canonical weights -> residual -> verdict.

    For continuous families a non-Classical verdict is cross-checked by a
    convex-hull search (``certify``). If that finds a classical mixture its
    members are appended to the stationary set and the Gram system is
    re-solved; otherwise the stationary-set result stands.
    """
    tol = tolerances or Tolerances()
    search = search or SearchConfig()
    if validate_psd:
        validate_state(rho)
    d = stationary_points(family, rho, search)
    out = _solve(rho, d, tol)
    if (certify and out.verdict != Verdict.CLASSICAL and family.kind in CONTINUOUS
            and _achievable_residual(rho.entries, _parties(family, rho)) <= tol.tol_res):
        m = certify_membership(family, rho, initial=d.states, seed=search.seed)
        if m.member:
            out = _hull_mixture(rho, with_members(d, family, rho, [v.amplitudes for v in m.states]),
                                m, tol)
        else:
            out.membership = "nonmember" if m.member is False else "undecided"
            if m.member is None:
                out.warnings.append("hull search undecided; verdict rests on the stationary set")
    for w in out.warnings:
        log.warning(w)
    return out


def _hull_mixture(rho, d: StationarySet, m, tol: Tolerances) -> Decomposition:
    """Decomposition carrying the nonnegative weights found by the hull search."""
    p = np.zeros(len(d))
    amps = np.array([s.amplitudes for s in d.states])
    for v, w in zip(m.states, m.weights):
        p[int(np.argmax(np.abs(amps.conj() @ v.amplitudes)))] += w
    sys = build_gram(d, rho)
    res = residual(rho, d, p)
    rnorm = res.hs_norm()
    warnings = list(d.warnings) + [
        f"stationary set incomplete; {len(m.states)} mixture members found by hull search were added"]
    defect = float(np.linalg.norm(sys.gram @ p - sys.target))
    return Decomposition(
        weights=p, states=d, residual=res, residual_norm=rnorm, negativity=0.0,
        verdict=verdict_of(True, rnorm, tol.tol_res), consistency_defect=defect, feasible=True,
        consistency=_consistency(defect, warnings), warnings=warnings, membership="member")


def _consistency(defect: float, warnings: list[str]) -> str:
    if defect <= SOLVED_TOL:
        return "solved"
    if defect <= INSUFFICIENT_TOL:
        warnings.append(f"Gram system solved only to {defect:.2e}")
        return "marginal"
    warnings.append(f"Gram system inconsistent ({defect:.2e}); stationary set may not be exhaustive")
    return "insufficient"


def _solve(rho: HermitianOperator, d: StationarySet, tol: Tolerances) -> Decomposition:
    sys = build_gram(d, rho)
    p, feasible = solve_nonneg(sys, tol.tol_neg)
    defect = float(np.linalg.norm(sys.gram @ p - sys.target))
    warnings = list(d.warnings)
    status = _consistency(defect, warnings)
    res = residual(rho, d, p)
    rnorm = res.hs_norm()
    negativity = float(np.maximum(0.0, -p).sum())
    return Decomposition(
        weights=p, states=d, residual=res, residual_norm=rnorm,
        negativity=negativity if negativity > tol.tol_neg or not feasible else 0.0,
        verdict=verdict_of(feasible, rnorm, tol.tol_res), consistency_defect=defect,
        feasible=feasible, consistency=status, warnings=warnings)
