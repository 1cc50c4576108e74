"""Command-line front end: JSON configs in, CSV evidence and JSON verdicts out.

Exit codes: 0 positive verdict, 3 negative verdict, 4 inconclusive, 2 usage or
schema error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .bundle_geom import DEFAULT_ANGLES, DEFAULT_H, DEFAULT_RADII
from .classify import (CURVATURE_TOL, HIGHER_TOL, RATIO_TOL, SIM_BOUND, SIM_RADII, SIM_TOL,
                       full_invariant_equiv, invariant_report, similarity_test, unitary_equiv_ofb)
from .homogeneity import (CertificateRefused, ConsistencyError, MobiusElement, weakhom_certificate,
                          weakhom_witness)
from .intertwine import ConstructionError, reduce_to_ofb
from .kernel_space import DEFAULT_TRUNCATION, KernelSpace, WeightSequence, power_weights
from .op_model import FlagOperator, FlagViolation, assemble_flag

EXIT_OK, EXIT_USAGE, EXIT_NEGATIVE, EXIT_INCONCLUSIVE = 0, 2, 3, 4

TOLERANCE_KEYS = {"curvature": CURVATURE_TOL, "ratio": RATIO_TOL, "higher": HIGHER_TOL,
                  "bound": SIM_BOUND, "subharmonic": SIM_TOL, "h": DEFAULT_H}


class ConfigError(ValueError):
    """All schema violations of a configuration, each with a JSON path."""

    def __init__(self, violations: List[str]):
        super().__init__("\n".join(violations))
        self.violations = list(violations)


@dataclass
class OperatorConfig:
    truncation: int
    blocks: List[WeightSequence]
    couplings: list                       # coefficient arrays or explicit matrices
    condition_a: Dict[Tuple[int, int], np.ndarray]
    radii: Tuple[float, ...]
    angles: int
    psi_radii: Tuple[float, ...]
    tolerances: Dict[str, float]
    source: str = ""
    digest: str = ""

    @property
    def n(self) -> int:
        return len(self.blocks)


@dataclass
class RunReport:
    command: str
    inputs: Dict[str, str]
    verdicts: Dict[str, object]
    evidence: List[str] = field(default_factory=list)
    wall_time: float = 0.0
    grid: Dict[str, object] = field(default_factory=dict)
    tolerances: Dict[str, float] = field(default_factory=dict)
    notes: List[str] = field(default_factory=list)
    exit_code: int = EXIT_OK


# ---------------------------------------------------------------- parsing

def _complex(v, path: str, errs: List[str]) -> complex:
    if isinstance(v, bool):
        errs.append(f"{path}: expected a number or [re, im] pair")
        return 0j
    if isinstance(v, (int, float)):
        return complex(v)
    if isinstance(v, list) and len(v) == 2 and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(v[0], v[1])
    errs.append(f"{path}: expected a number or [re, im] pair")
    return 0j


def _poly(v, path: str, errs: List[str]) -> Optional[np.ndarray]:
    if not isinstance(v, list) or not v:
        errs.append(f"{path}: expected a non-empty coefficient list")
        return None
    n0 = len(errs)
    c = np.array([_complex(x, f"{path}[{k}]", errs) for k, x in enumerate(v)])
    return c if len(errs) == n0 else None


def read_matrix_csv(path: Path, shape: Tuple[int, int]) -> np.ndarray:
    """Read ``row,col,re,im`` (zero-based) into a dense complex array."""
    M = np.zeros(shape, dtype=complex)
    with open(path, newline="") as fh:
        rd = csv.reader(fh)
        head = next(rd, None)
        if head is None or [h.strip() for h in head] != ["row", "col", "re", "im"]:
            raise ValueError(f"{path}: header must be row,col,re,im")
        for ln, row in enumerate(rd, start=2):
            if not row:
                continue
            if len(row) != 4:
                raise ValueError(f"{path}:{ln}: expected 4 fields")
            r, c = int(row[0]), int(row[1])
            if not (0 <= r < shape[0] and 0 <= c < shape[1]):
                raise ValueError(f"{path}:{ln}: index ({r},{c}) outside {shape}")
            M[r, c] = complex(float(row[2]), float(row[3]))
    return M


def _weights(spec, N: int, path: str, errs: List[str]) -> Optional[WeightSequence]:
    if not isinstance(spec, dict):
        errs.append(f"{path}: expected an object")
        return None
    kind = spec.get("type")
    if kind == "power":
        lam = spec.get("lambda")
        if isinstance(lam, bool) or not isinstance(lam, (int, float)):
            errs.append(f"{path}.lambda: missing or not a number")
            return None
        if not lam > 0:
            errs.append(f"{path}.lambda: must be positive, got {lam}")
            return None
        return power_weights(lam, N) if N >= 2 else None
    if kind == "explicit":
        w = spec.get("weights")
        if not isinstance(w, list) or not w:
            errs.append(f"{path}.weights: missing or empty")
            return None
        bad = False
        for k, x in enumerate(w):
            if isinstance(x, bool) or not isinstance(x, (int, float)):
                errs.append(f"{path}.weights[{k}]: not a number")
                bad = True
            elif not x > 0 or not np.isfinite(x):
                errs.append(f"{path}.weights[{k}]: non-positive weight {x}")
                bad = True
        if len(w) < N:
            errs.append(f"{path}.weights: {len(w)} weights for truncation {N}")
            bad = True
        return None if bad else WeightSequence(np.asarray(w[:N], dtype=float), "explicit")
    errs.append(f"{path}.type: expected 'power' or 'explicit', got {kind!r}")
    return None


def parse_config_data(doc, base_dir: Path = Path("."), source: str = "<memory>") -> OperatorConfig:
    """Validate a decoded JSON document; raises :class:`ConfigError` listing every violation."""
    errs: List[str] = []
    if not isinstance(doc, dict):
        raise ConfigError(["$: expected a JSON object"])
    known = {"truncation", "blocks", "couplings", "conditionA", "grid", "tolerances"}
    for k in sorted(set(doc) - known):
        errs.append(f"$.{k}: unknown field")
    N = doc.get("truncation", DEFAULT_TRUNCATION)
    if isinstance(N, bool) or not isinstance(N, int) or N < 2:
        errs.append(f"$.truncation: expected an integer >= 2, got {N!r}")
        N = DEFAULT_TRUNCATION
    blocks_raw = doc.get("blocks")
    blocks: List[Optional[WeightSequence]] = []
    if not isinstance(blocks_raw, list) or not blocks_raw:
        errs.append("$.blocks: missing or empty (need at least one block)")
        blocks_raw = []
    for i, b in enumerate(blocks_raw):
        blocks.append(_weights(b, N, f"$.blocks[{i}]", errs))
    n = len(blocks_raw)
    cpl_raw = doc.get("couplings", [])
    if not isinstance(cpl_raw, list):
        errs.append("$.couplings: expected a list")
        cpl_raw = []
    if n and len(cpl_raw) != n - 1:
        errs.append(f"$.couplings: {n} blocks need exactly {n - 1} couplings, got {len(cpl_raw)}")
    couplings = []
    for i, c in enumerate(cpl_raw):
        p = f"$.couplings[{i}]"
        if isinstance(c, dict) and "poly" in c:
            poly = _poly(c["poly"], f"{p}.poly", errs)
            if poly is not None:
                if np.all(poly == 0):
                    errs.append(f"{p}.poly: coupling symbol is zero")
                elif poly.size > N:
                    errs.append(f"{p}.poly: degree exceeds truncation")
            couplings.append(poly)
        elif isinstance(c, dict) and "matrix" in c:
            ref = c["matrix"]
            if not isinstance(ref, str):
                errs.append(f"{p}.matrix: expected a file path")
                couplings.append(None)
                continue
            try:
                couplings.append(read_matrix_csv(base_dir / ref, (N, N)))
            except (OSError, ValueError) as exc:
                errs.append(f"{p}.matrix: {exc}")
                couplings.append(None)
        else:
            errs.append(f"{p}: expected {{\"poly\": [...]}} or {{\"matrix\": \"file.csv\"}}")
            couplings.append(None)
    cond = {}
    ca = doc.get("conditionA", {})
    if not isinstance(ca, dict):
        errs.append("$.conditionA: expected an object")
        ca = {}
    for key in sorted(ca):
        p = f"$.conditionA[\"{key}\"]"
        try:
            i, j = (int(x) for x in str(key).split(","))
        except ValueError:
            errs.append(f"{p}: key must look like \"i,j\"")
            continue
        if not (1 <= i and j <= n and j - i >= 2):
            errs.append(f"{p}: need 1 <= i, j <= {n} and j - i >= 2")
            continue
        poly = _poly(ca[key], p, errs)
        if poly is not None:
            cond[(i, j)] = poly
    grid = doc.get("grid", {})
    if not isinstance(grid, dict):
        errs.append("$.grid: expected an object")
        grid = {}
    radii = grid.get("radii", list(DEFAULT_RADII))
    if (not isinstance(radii, list) or not radii
            or not all(isinstance(r, (int, float)) and not isinstance(r, bool) and 0 <= r < 0.99 for r in radii)):
        errs.append("$.grid.radii: expected a non-empty list of radii in [0, 0.99)")
        radii = list(DEFAULT_RADII)
    angles = grid.get("angles", DEFAULT_ANGLES)
    if isinstance(angles, bool) or not isinstance(angles, int) or angles < 1:
        errs.append("$.grid.angles: expected a positive integer")
        angles = DEFAULT_ANGLES
    psi_radii = grid.get("psi_radii", list(SIM_RADII))
    if (not isinstance(psi_radii, list) or len(psi_radii) < 5
            or not all(isinstance(r, (int, float)) and not isinstance(r, bool) and 0 <= r < 0.99 for r in psi_radii)):
        errs.append("$.grid.psi_radii: expected at least 5 radii in [0, 0.99)")
        psi_radii = list(SIM_RADII)
    for k in sorted(set(grid) - {"radii", "angles", "psi_radii"}):
        errs.append(f"$.grid.{k}: unknown field")
    tol_raw = doc.get("tolerances", {})
    tols = dict(TOLERANCE_KEYS)
    if not isinstance(tol_raw, dict):
        errs.append("$.tolerances: expected an object")
        tol_raw = {}
    for k, v in sorted(tol_raw.items()):
        if k not in TOLERANCE_KEYS:
            errs.append(f"$.tolerances.{k}: unknown tolerance (known: {', '.join(sorted(TOLERANCE_KEYS))})")
        elif isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
            errs.append(f"$.tolerances.{k}: expected a positive number")
        else:
            tols[k] = float(v)
    if errs:
        raise ConfigError(errs)
    return OperatorConfig(N, blocks, couplings, cond, tuple(float(r) for r in radii), int(angles),
                          tuple(float(r) for r in psi_radii), tols, source)


def parse_config(path) -> OperatorConfig:
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"])
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ConfigError([f"{path}: not valid JSON ({exc})"])
    cfg = parse_config_data(doc, path.parent, str(path))
    cfg.digest = hashlib.sha256(raw).hexdigest()
    return cfg


def build_operator(cfg: OperatorConfig) -> FlagOperator:
    spaces = [KernelSpace(w, cfg.truncation) for w in cfg.blocks]
    return assemble_flag(spaces, cfg.couplings, cfg.condition_a)


# ---------------------------------------------------------------- output

def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _num(x) -> str:
    return repr(float(x))


def _csv_text(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([v if isinstance(v, str) else (str(v) if isinstance(v, int) else _num(v)) for v in r])
    return buf.getvalue()


def _grid_rows(radii, angles, values):
    values = np.asarray(values)
    for i, r in enumerate(radii):
        for j, a in enumerate(angles):
            v = values[i, j]
            if np.iscomplexobj(values):
                yield r, a, v.real, v.imag
            else:
                yield r, a, v


def matrix_csv(M: np.ndarray) -> str:
    """Non-zero entries as ``row,col,re,im`` in row-major order."""
    r, c = np.nonzero(M)
    return _csv_text(["row", "col", "re", "im"],
                     ((int(i), int(j), M[i, j].real, M[i, j].imag) for i, j in zip(r, c)))


class _Out:
    def __init__(self, root: Path, prefix: str):
        self.root, self.prefix, self.files = root, prefix, []

    def csv(self, name: str, header, rows) -> None:
        self.text(f"{name}.csv", _csv_text(header, rows))

    def text(self, name: str, text: str) -> None:
        p = self.root / f"{self.prefix}_{name}"
        atomic_write(p, text)
        self.files.append(str(p))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (complex, np.complexfloating)):
        return [float(x.real), float(x.imag)]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _finish(rep: RunReport, out: _Out, t0: float) -> int:
    rep.wall_time = time.perf_counter() - t0
    rep.evidence = list(out.files) + [str(out.root / f"{out.prefix}_report.json")]
    atomic_write(out.root / f"{out.prefix}_report.json",
                 json.dumps(_jsonable(asdict(rep)), indent=2, sort_keys=True) + "\n")
    print(json.dumps({"command": rep.command, "verdicts": _jsonable(rep.verdicts),
                      "exit_code": rep.exit_code}, sort_keys=True))
    return rep.exit_code


def _grid_info(cfg: OperatorConfig) -> Dict[str, object]:
    return {"radii": list(cfg.radii), "angles": cfg.angles, "truncation": cfg.truncation}


# ---------------------------------------------------------------- commands

def cmd_describe(cfg: OperatorConfig, out_dir: Path) -> int:
    t0 = time.perf_counter()
    T = build_operator(cfg)
    rep_ = invariant_report(T, cfg.radii, cfg.angles, cfg.tolerances["h"])
    out = _Out(out_dir, "describe")
    R, A = rep_.radii, rep_.angles
    out.csv("curvature", ["radius", "angle", "curvature"], _grid_rows(R, A, rep_.curvature))
    for i, v in enumerate(rep_.norms, start=1):
        out.csv(f"norm_{i}", ["radius", "angle", "norm"], _grid_rows(R, A, v))
    for i, v in enumerate(rep_.coupling_ratios, start=1):
        out.csv(f"coupling_ratio_{i}", ["radius", "angle", "coupling_ratio"], _grid_rows(R, A, v))
    for i, v in enumerate(rep_.sff, start=1):
        out.csv(f"sff_{i}", ["radius", "angle", "sff"], _grid_rows(R, A, v))
    for (i, j), v in sorted(rep_.higher.items()):
        out.csv(f"higher_{i}_{j}", ["radius", "angle", "re", "im"], _grid_rows(R, A, v))
    rep = RunReport("describe", {"config": cfg.digest},
                    {"verdict": "described", "blocks": T.n, "valid_fraction": rep_.valid_fraction,
                     "excluded_points": rep_.excluded},
                    grid=_grid_info(cfg), tolerances=dict(cfg.tolerances))
    return _finish(rep, out, t0)


def cmd_equiv(cfa: OperatorConfig, cfb: OperatorConfig, mode: str, out_dir: Path) -> int:
    t0 = time.perf_counter()
    if mode == "ofb" and (cfa.condition_a or cfb.condition_a):
        print("error: bidiagonal mode needs configs without conditionA entries; "
              "use --mode=full", file=sys.stderr)
        return EXIT_USAGE
    A, B = build_operator(cfa), build_operator(cfb)
    tol = cfa.tolerances
    if mode == "ofb":
        v = unitary_equiv_ofb(A, B, cfa.radii, cfa.angles, tol["curvature"], tol["ratio"], tol["h"])
    else:
        v = full_invariant_equiv(A, B, cfa.radii, cfa.angles, tol["curvature"], tol["higher"], tol["h"])
    out = _Out(out_dir, "equiv")
    if v.ratio_grids:
        R, Ang = np.asarray(cfa.radii), np.arange(cfa.angles) * (2 * np.pi / cfa.angles)
        for i, g in enumerate(v.ratio_grids, start=1):
            out.csv(f"ratio_{i}", ["radius", "angle", "ratio"], _grid_rows(R, Ang, g))
    code = {"equivalent": EXIT_OK, "inconclusive": EXIT_INCONCLUSIVE}.get(v.verdict, EXIT_NEGATIVE)
    rep = RunReport("equiv", {"config_a": cfa.digest, "config_b": cfb.digest},
                    {"verdict": v.verdict, "mode": mode, "evidence": v.evidence,
                     "valid_fraction": v.valid_fraction, "reasons": list(v.reasons)},
                    grid=_grid_info(cfa), tolerances=v.tolerances, exit_code=code)
    return _finish(rep, out, t0)


def cmd_similar(cfa: OperatorConfig, cfb: OperatorConfig, phis, orders, out_dir: Path) -> int:
    t0 = time.perf_counter()
    A, B = build_operator(cfa), build_operator(cfb)
    tol = cfa.tolerances
    v = similarity_test(A, B, cfa.psi_radii, tol["bound"], tol["subharmonic"], phis=phis, orders=orders)
    out = _Out(out_dir, "similar")
    out.csv("psi0", ["radius", "angle", "psi0"], v.profile_rows())
    code = {"similar": EXIT_OK, "not-similar": EXIT_NEGATIVE}.get(v.verdict, EXIT_INCONCLUSIVE)
    rep = RunReport("similar", {"config_a": cfa.digest, "config_b": cfb.digest},
                    {"verdict": v.label, "sup_abs_psi0": v.sup, "min_laplacian": v.min_laplacian,
                     "divergent": v.divergent, "trend_slope": v.trend_slope,
                     "witness_residual": v.witness_residual, "witness_condition": v.witness_condition,
                     "preconditions": v.preconditions, "reasons": list(v.reasons)},
                    grid={"psi_radii": list(cfa.psi_radii), "truncation": cfa.truncation},
                    tolerances={"bound": v.bound, "subharmonic": v.tol}, exit_code=code)
    return _finish(rep, out, t0)


def cmd_intertwine(cfg: OperatorConfig, out_dir: Path) -> int:
    t0 = time.perf_counter()
    Tt = build_operator(cfg)
    notes = []
    out = _Out(out_dir, "intertwine")
    try:
        T, W = reduce_to_ofb(Tt)
    except ConstructionError as exc:
        rep = RunReport("intertwine", {"config": cfg.digest},
                        {"verdict": "construction-failed", "level": exc.level, "residual": exc.residual},
                        exit_code=EXIT_NEGATIVE)
        return _finish(rep, out, t0)
    if Tt.is_ofb:
        notes.append("input has no higher entries; the witness commutes with the operator")
    out.text("witness.csv", matrix_csv(W.X))
    prov = {"construction": W.provenance, "level_residuals": W.level_residuals,
            "commutation": {f"{i},{j}": r for (i, j), r in sorted(W.commutation.items())}}
    out.text("provenance.json", json.dumps(_jsonable(prov), indent=2, sort_keys=True) + "\n")
    rep = RunReport("intertwine", {"config": cfg.digest},
                    {"verdict": "witness", "residual": W.residual,
                     "inverse_residual": W.inverse_residual()},
                    tolerances={"residual": 1e-9}, notes=notes, exit_code=EXIT_OK)
    return _finish(rep, out, t0)


def cmd_weakhom(cfg: OperatorConfig, alpha: Optional[complex], theta: float, out_dir: Path) -> int:
    t0 = time.perf_counter()
    T = build_operator(cfg)
    out = _Out(out_dir, "weakhom")
    if T.higher:
        T = reduce_to_ofb(T)[0]
    cert = weakhom_certificate(T)
    verdicts = {"verdict": cert.verdict, "assumed": list(cert.assumptions),
                "symbols": [{"level": s.level, "verdict": s.verdict, "diagnosis": s.diagnosis,
                             "min_root_modulus": s.min_root_modulus,
                             "grid_min_modulus": s.grid_min_modulus,
                             "closed_form_roots": s.closed_form_roots} for s in cert.symbols]}
    notes = []
    if alpha is not None and cert.positive:
        phi = MobiusElement(alpha, theta)
        try:
            wit = weakhom_witness(T, phi)
            verdicts["witness_residual"] = wit.residual
            out.text("witness.csv", matrix_csv(wit.X))
        except ConsistencyError as exc:
            verdicts["witness_residual"] = exc.discrepancy
            notes.append("witness residual above tolerance: truncation shortfall, certificate kept")
    elif alpha is not None:
        notes.append("certificate negative; no witness attempted")
    code = EXIT_OK if cert.positive else EXIT_NEGATIVE
    rep = RunReport("weakhom", {"config": cfg.digest}, verdicts, notes=notes,
                    tolerances={"boundary": 1e-9, "witness": 1e-5}, exit_code=code)
    return _finish(rep, out, t0)


# ---------------------------------------------------------------- entry point

def _parse_complex(s: str) -> complex:
    return complex(s.replace(" ", "").replace("i", "j"))


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="flagbundle", description=__doc__.splitlines()[0])
    p.add_argument("--out", default="flagbundle-out", help="directory for CSV and JSON output")
    sub = p.add_subparsers(dest="command", required=True)
    d = sub.add_parser("describe", help="invariant grids of one operator")
    d.add_argument("config")
    e = sub.add_parser("equiv", help="unitary equivalence of two operators")
    e.add_argument("config_a")
    e.add_argument("config_b")
    e.add_argument("--mode", choices=("ofb", "full"), default="ofb")
    s = sub.add_parser("similar", help="similarity heuristic")
    s.add_argument("config_a")
    s.add_argument("config_b")
    s.add_argument("--phi", help="JSON list of ratio-matching polynomials, one per level")
    s.add_argument("--orders", help="JSON list of required hypercontraction orders")
    i = sub.add_parser("intertwine", help="unipotent witness to the bidiagonal part")
    i.add_argument("config")
    w = sub.add_parser("weakhom", help="weak homogeneity certificate")
    w.add_argument("config")
    w.add_argument("--alpha", help="automorphism zero, e.g. 0.3 or 0.3+0.2j")
    w.add_argument("--theta", type=float, default=0.0)
    return p


def _json_arg(raw: Optional[str], name: str, errs: List[str]):
    if raw is None:
        return None
    try:
        return json.loads(raw)
    except json.JSONDecodeError as exc:
        errs.append(f"--{name}: not valid JSON ({exc})")
        return None


def main(argv: Optional[Sequence[str]] = None) -> int:
    try:
        args = _parser().parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    out = Path(args.out)
    try:
        if args.command == "describe":
            return cmd_describe(parse_config(args.config), out)
        if args.command == "intertwine":
            return cmd_intertwine(parse_config(args.config), out)
        if args.command == "weakhom":
            alpha = None
            if args.alpha is not None:
                try:
                    alpha = _parse_complex(args.alpha)
                except ValueError:
                    raise ConfigError([f"--alpha: cannot read {args.alpha!r} as a complex number"])
            return cmd_weakhom(parse_config(args.config), alpha, args.theta, out)
        errs: List[str] = []
        cfgs = []
        for c in (args.config_a, args.config_b):
            try:
                cfgs.append(parse_config(c))
            except ConfigError as exc:
                errs.extend(exc.violations)
        if args.command == "equiv":
            if errs:
                raise ConfigError(errs)
            return cmd_equiv(cfgs[0], cfgs[1], args.mode, out)
        phis = _json_arg(args.phi, "phi", errs)
        orders = _json_arg(args.orders, "orders", errs)
        if errs:
            raise ConfigError(errs)
        return cmd_similar(cfgs[0], cfgs[1], phis, orders, out)
    except ConfigError as exc:
        for v in exc.violations:
            print(f"config error: {v}", file=sys.stderr)
        return EXIT_USAGE
    except (FlagViolation, CertificateRefused, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
