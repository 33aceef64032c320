"""Command-line front end.

    qcohere decompose  --state spin-cat:s=1 --family '{"kind": "SpinCoherent"}'
    qcohere stationary --state pauli:rx=0.75,ry=-0.75,rz=0.75 --family ProductComplex
    qcohere sweep sweep.json --out region.csv
    qcohere catalog list

Exit codes of ``decompose``: 0 Classical, 10 NegativeQuasiprobability,
11 ResidualNonzero, 12 Both, 2 on any error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import catalog
from .decomposition import Decomposition, Tolerances, ValidationError, Verdict, decompose
from .families import ClassicalFamily, FamilyKind, SearchConfig, stationary_points
from .operators import HermitianOperator

log = logging.getLogger("qcohere")

EXIT_CODES = {Verdict.CLASSICAL: 0, Verdict.NEGATIVE: 10, Verdict.RESIDUAL: 11, Verdict.BOTH: 12}
EXIT_ERROR = 2
QUANTITIES = ("min_weight", "negativity", "residual_norm", "verdict")


class UsageError(ValueError):
    pass


# ---------- loading ----------
def _json_arg(text: str | None):
    """Inline JSON, a path to a JSON file, or None."""
    if text is None:
        return None
    t = text.strip()
    if t.startswith("{") or t.startswith("["):
        return json.loads(t)
    p = Path(text)
    if p.exists():
        return json.loads(p.read_text(encoding="utf-8"))
    return None


def load_state(ref: str) -> HermitianOperator:
    """Catalog name (``pauli:rx=0.5``) or path to an operator JSON file."""
    p = Path(ref)
    if p.suffix == ".json" or p.exists():
        return HermitianOperator.from_json(json.loads(p.read_text(encoding="utf-8")))
    return catalog.build(ref)


def load_family(ref: str, rho: HermitianOperator | None = None) -> ClassicalFamily:
    """Family JSON (inline or file) or a bare kind name; spin s defaults from rho."""
    data = _json_arg(ref)
    if data is None:
        data = {"kind": ref.strip()}
    data = {"kind": data["kind"], "params": dict(data.get("params") or {})}
    kind = FamilyKind(data["kind"])
    params = data["params"]
    if rho is not None and "s" not in params:
        if kind == FamilyKind.SPIN_COHERENT:
            params["s"] = Fraction(rho.dim - 1, 2)
        elif kind == FamilyKind.SPIN_COHERENT_PRODUCT and rho.subsystem_dims:
            params["s"] = Fraction(rho.subsystem_dims[0] - 1, 2)
            params.setdefault("parties", len(rho.subsystem_dims))
    return ClassicalFamily.from_json(data)


def load_search(ref: str | None, seed: int | None) -> SearchConfig:
    data = _json_arg(ref) if ref else {}
    if ref and data is None:
        raise UsageError(f"cannot read search config {ref!r}")
    cfg = SearchConfig.from_json(data)
    if seed is not None:
        cfg.seed = seed
    return cfg


def _write(text: str, out: str | None) -> None:
    if out in (None, "-"):
        sys.stdout.write(text)
        if not text.endswith("\n"):
            sys.stdout.write("\n")
    else:
        Path(out).write_text(text, encoding="utf-8")


# ---------- sweep ----------
@dataclass
class SweepSpec:
    family: dict
    state: str  # catalog template, e.g. "pauli:rx={rx},ry={ry},rz=0"
    axes: list  # [(name, lo, hi, steps), ...]
    quantity: str = "verdict"
    search: dict = field(default_factory=dict)
    tolerances: dict = field(default_factory=dict)

    def __post_init__(self):
        self.axes = [(str(a[0]), float(a[1]), float(a[2]), int(a[3])) for a in self.axes]
        if not 1 <= len(self.axes) <= 3:
            raise UsageError("a sweep needs 1 to 3 axes")
        if any(a[3] < 2 for a in self.axes):
            raise UsageError("every axis needs at least 2 steps")
        if self.quantity not in QUANTITIES:
            raise UsageError(f"quantity must be one of {QUANTITIES}")

    @classmethod
    def from_json(cls, data: dict) -> "SweepSpec":
        known = {k: v for k, v in data.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    def points(self) -> list[tuple[float, ...]]:
        """Grid points in row-major order (last axis fastest)."""
        grids = [np.linspace(lo, hi, n) for _, lo, hi, n in self.axes]
        return [tuple(float(x) for x in pt) for pt in itertools.product(*grids)]


def quantity_of(dec: Decomposition, name: str):
    if name == "min_weight":
        return float(np.min(dec.weights))
    if name == "negativity":
        return dec.negativity
    if name == "residual_norm":
        return dec.residual_norm
    return dec.verdict.value


def _sweep_point(args):
    spec, point = args
    names = [a[0] for a in spec.axes]
    try:
        rho = catalog.build(spec.state.format(**dict(zip(names, point))))
        family = load_family(json.dumps(spec.family), rho)
        dec = decompose(rho, family, SearchConfig.from_json(spec.search),
                        Tolerances(**spec.tolerances))
    except (catalog.CatalogError, ValidationError) as exc:
        return point, "", "invalid", str(exc)
    return point, quantity_of(dec, spec.quantity), dec.verdict.value, ""


def run_sweep(spec: SweepSpec, workers: int | None = None) -> str:
    """Evaluate every grid point and return the CSV text (deterministic order)."""
    if workers is None:
        workers = int(os.environ.get("QCOHERE_THREADS", os.cpu_count() or 1))
    jobs = [(spec, pt) for pt in spec.points()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_point, jobs, chunksize=8))
    else:
        rows = [_sweep_point(j) for j in jobs]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([a[0] for a in spec.axes] + [spec.quantity, "verdict", "note"])
    for point, value, verdict, note in rows:
        value = repr(value) if isinstance(value, float) else value
        w.writerow([repr(x) for x in point] + [value, verdict, note])
    return buf.getvalue()


# ---------- commands ----------
def _tolerances(args) -> Tolerances:
    t = Tolerances()
    return Tolerances(tol_neg=t.tol_neg if args.tol_neg is None else args.tol_neg,
                      tol_res=t.tol_res if args.tol_res is None else args.tol_res)


def cmd_decompose(args) -> int:
    rho = load_state(args.state)
    family = load_family(args.family, rho)
    dec = decompose(rho, family, load_search(args.search, args.seed), _tolerances(args),
                    validate_psd=not args.no_validate_psd)
    out = dec.to_json()
    out["warnings"] = dec.warnings
    out["membership"] = dec.membership
    _write(json.dumps(out, indent=2), args.out)
    print(f"verdict: {dec.verdict.value}  residual_norm={dec.residual_norm:.3e}  "
          f"negativity={dec.negativity:.6g}", file=sys.stderr)
    return EXIT_CODES[dec.verdict]


def cmd_stationary(args) -> int:
    rho = load_state(args.state)
    if not args.no_validate_psd:
        from .decomposition import validate_state
        validate_state(rho)
    family = load_family(args.family, rho)
    d = stationary_points(family, rho, load_search(args.search, args.seed))
    _write(json.dumps(d.to_json(), indent=2), args.out)
    return 0


def cmd_sweep(args) -> int:
    data = _json_arg(args.spec)
    if data is None:
        raise UsageError(f"cannot read sweep spec {args.spec!r}")
    spec = SweepSpec.from_json(data)
    if args.seed is not None:
        spec.search = {**spec.search, "seed": args.seed}
    if args.tol_neg is not None or args.tol_res is not None:
        spec.tolerances = {**spec.tolerances, **{
            k: v for k, v in (("tol_neg", args.tol_neg), ("tol_res", args.tol_res)) if v is not None}}
    _write(run_sweep(spec), args.out)
    return 0


def cmd_catalog(args) -> int:
    for e in catalog.CATALOG.values():
        params = ",".join(f"{p}=..." for p in e.params)
        print(f"{e.name + (':' + params if params else ''):40s} {e.description}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qcohere", description="Quasiprobability decomposition of quantum states.")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, state=True):
        if state:
            p.add_argument("--state", required=True, help="catalog name or operator JSON path")
            p.add_argument("--family", required=True, help="family kind, inline JSON or JSON path")
        p.add_argument("--search", help="SearchConfig JSON (inline or path)")
        p.add_argument("--out", help="output path (default stdout)")
        p.add_argument("--seed", type=int)
        p.add_argument("--tol-neg", type=float)
        p.add_argument("--tol-res", type=float)
        p.add_argument("--no-validate-psd", action="store_true")

    p = sub.add_parser("decompose", help="decompose a state and report its verdict")
    common(p)
    p.set_defaults(func=cmd_decompose)
    p = sub.add_parser("stationary", help="print the stationary set")
    common(p)
    p.set_defaults(func=cmd_stationary)
    p = sub.add_parser("sweep", help="evaluate a parameter grid into CSV")
    p.add_argument("spec", help="sweep spec JSON (inline or path)")
    common(p, state=False)
    p.set_defaults(func=cmd_sweep)
    p = sub.add_parser("catalog", help="named states")
    p.add_argument("action", choices=["list"])
    p.set_defaults(func=cmd_catalog)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (OSError, ValueError, KeyError, RuntimeError, json.JSONDecodeError) as exc:
        print(f"qcohere: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    raise SystemExit(main())
