"""Command-line interface: analyze, invariants, check, operators.

Exit codes: 0 pass, 1 check failure, 2 input error, 3 precision exhaustion.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable

from . import __version__
from .ancestor import (CHECK_TOLERANCE, AncestorContext, CheckReport, ExtractionError, check_homogeneity,
                       check_lemma_residue, check_prop32_identities, r_matrix)
from .catalog import CatalogError, by_name, reference_operators, t_window, transport_map
from .curve import CurveData, CurveError, CurveSpec, validate
from .descendent import (DescendentError, TransportError, boundary_rows, check_descendent_correlator_identity,
                         check_prop41_residue, correlator_context, descendent_tensor, descendent_virasoro,
                         offending_poles, transport_operator, validate_condition)
from .recursion import Recursion
from .scalars import FieldError, FieldSpec
from .series import PrecisionError

EXIT_OK, EXIT_FAIL, EXIT_INPUT, EXIT_PRECISION = 0, 1, 2, 3
CACHE_ENV = "TRVIRASORO_CACHE_DIR"
IDENTITIES = ("lemma", "prop32", "prop41", "descendent", "symplectic", "homogeneity")
FAMILIES = ("airy", "egdd", "r_bessel")


class InputError(ValueError):
    pass


@dataclass
class RunConfig:
    curve: str
    params: dict = field(default_factory=dict)
    backend: str | None = None
    g_max: int = 2
    n_max: int = 3
    degree: int = 12
    series_order: int = 12
    K: int = 6
    cache_dir: str | None = None
    fmt: str = "json"
    tol: float = CHECK_TOLERANCE
    workers: int = 1

    def __post_init__(self):
        for name in ("degree", "series_order", "K", "workers"):
            if getattr(self, name) < 1:
                raise InputError(f"{name} must be positive")
        if self.g_max < 0 or self.n_max < 0:
            raise InputError("g_max and n_max must be non-negative")
        if self.fmt not in ("json", "csv"):
            raise InputError("format must be json or csv")
        if self.cache_dir:
            try:
                os.makedirs(self.cache_dir, exist_ok=True)
            except OSError as exc:
                raise InputError(f"cache directory {self.cache_dir!r} is not writable: {exc}") from exc
            if not os.access(self.cache_dir, os.W_OK):
                raise InputError(f"cache directory {self.cache_dir!r} is not writable")

    @property
    def family(self) -> str | None:
        return self.curve if self.curve in FAMILIES else None


# --- curve loading ---

def load_spec(cfg: RunConfig) -> CurveSpec:
    if cfg.curve in FAMILIES or cfg.curve == "egdd_symbolic":
        params = dict(cfg.params)
        if cfg.backend and cfg.curve == "egdd":
            params["backend"] = cfg.backend
        spec = by_name(cfg.curve, params)
        if cfg.backend and cfg.curve in ("airy",) and cfg.backend != spec.field.backend:
            spec = _override_backend(spec, cfg.backend)
        return spec
    path = Path(cfg.curve)
    if not path.exists():
        raise InputError(f"{cfg.curve!r} is neither a catalog curve {FAMILIES} nor a spec file")
    try:
        doc = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read spec file: {exc}") from exc
    if not isinstance(doc, dict):
        raise InputError("spec file must hold a JSON object")
    spec = CurveSpec.from_json(doc)
    if cfg.backend and cfg.backend != spec.field.backend:
        spec = _override_backend(spec, cfg.backend)
    return spec


def _override_backend(spec: CurveSpec, backend: str) -> CurveSpec:
    if backend == "bigfloat" and (spec.field.generator or spec.field.parameters):
        raise InputError("only purely rational specs can be moved to the bigfloat backend")
    if backend == "exact" and spec.field.backend == "bigfloat":
        raise InputError("a bigfloat spec cannot be promoted to the exact backend")
    return replace(spec, field=FieldSpec(backend=backend))


def build(cfg: RunConfig) -> tuple[CurveData, Recursion]:
    data = validate(load_spec(cfg))
    return data, Recursion(data, workers=cfg.workers, cache_dir=cfg.cache_dir)


# --- emission ---

def _emit_json(doc: Any, out) -> None:
    out.write(json.dumps(doc, sort_keys=True) + "\n")


def _emit_csv(rows: list[dict], out) -> None:
    if not rows:
        return
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    w.writeheader()
    for r in rows:
        w.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v for k, v in r.items()})
    out.write(buf.getvalue())


# --- commands ---

def cmd_analyze(cfg: RunConfig, out=sys.stdout) -> int:
    data = validate(load_spec(cfg))
    F = data.F
    crit = []
    for beta, p in enumerate(data.critical):
        try:
            slope = F.render(data.eta_slope(beta))
        except FieldError:
            slope = None
        crit.append({"point": p.render(F), "x": F.render(data.xcrit[beta]), "sigma": data.sigma[beta],
                     "eta_slope": slope})
    bds = []
    for row, b in zip(boundary_rows(data, 1), data.boundaries):
        bds.append({"point": b.point.render(F), "r": b.r, "scale": F.render(b.scale),
                    "branch": F.render(b.branch), "v": [F.render(c) for c in row.v]})
    hyp = {str(m): {"holds": validate_condition(data, m), "poles": offending_poles(data, m)} for m in range(-1, 4)}
    doc = {"name": data.spec.name, "field": data.spec.field.to_json(), "critical_points": crit,
           "boundaries": bds, "hypothesis": hyp}
    try:
        eu = check_homogeneity(data, cfg.K)
        js = eu.to_json(F)
        doc["homogeneous"] = eu.homogeneous
        doc["curve_homogeneous"] = eu.curve_homogeneous
        doc["mu"] = js["mu"] if eu.curve_homogeneous else None
        doc["delta"] = js["delta"]
        doc["r_homogeneity_checked_to"] = eu.r_homogeneity_checked_to
    except FieldError as exc:
        doc["homogeneous"] = None
        doc["homogeneity_note"] = f"not decidable on this field: {exc}"
    if cfg.fmt == "csv":
        _emit_csv([{"key": k, "value": v} for k, v in sorted(doc.items())], out)
    else:
        _emit_json(doc, out)
    return EXIT_OK


def cmd_invariants(cfg: RunConfig, kind: str, g: int, n: int, out=sys.stdout) -> int:
    data, eng = build(cfg)
    F = data.F
    if kind == "ancestor":
        if 2 * g - 2 + n <= 0:
            raise InputError(f"(g,n)=({g},{n}) is unstable; ancestor tensors need 2g-2+n > 0")
        T = eng.tensor(g, n)
        rows = [{"g": g, "n": n, "labels": [list(l) for l in k], "value": F.render(v)} for k, v in T.items()]
        doc = T.to_json()
    elif kind == "descendent":
        if g < 0 or n < 1 or 2 * g - 2 + n < 0:
            raise InputError(f"(g,n)=({g},{n}) has no descendent table")
        T = descendent_tensor(eng, g, n, cfg.degree)
        rows = T.rows()
        doc = T.to_json()
    else:
        raise InputError(f"unknown kind {kind!r}")
    if cfg.fmt == "csv":
        _emit_csv(rows, out)
    else:
        _emit_json({"curve": data.spec.name, "kind": kind, **doc}, out)
    return EXIT_OK


def parse_range(text: str) -> list[int]:
    """'a..b', 'a', or 'a,b,c'."""
    text = text.strip()
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            lo, hi = int(a), int(b)
            if hi < lo:
                raise InputError(f"empty range {text!r}")
            return list(range(lo, hi + 1))
        return [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise InputError(f"bad range {text!r}") from exc


def parse_gn(items: Iterable[str]) -> list[tuple[int, int]]:
    out = []
    for it in items:
        try:
            g, n = (int(t) for t in it.split(","))
        except ValueError as exc:
            raise InputError(f"bad (g,n) pair {it!r}; use g,n") from exc
        out.append((g, n))
    return out


def default_gn(identity: str, chi: int) -> list[tuple[int, int]]:
    """(g, n) pairs in the checker's own convention with 2g-2+n (+1 for lemma) <= chi."""
    out = []
    for g in range(0, chi + 2):
        for n in range(0, chi + 3):
            if identity == "lemma":
                if n + 1 >= 1 and 0 < 2 * g - 2 + n + 1 <= chi:
                    out.append((g, n))
            elif (g, n) not in ((0, 0), (0, 1)) and 2 * g - 2 + n <= chi:
                out.append((g, n))
    return sorted(out, key=lambda t: (2 * t[0] + t[1], t[0]))


def run_checks(cfg: RunConfig, identity: str, ms: list[int], gns: list[tuple[int, int]]) -> list[CheckReport]:
    data, eng = build(cfg)
    tol = cfg.tol
    reports: list[CheckReport] = []
    if identity == "lemma":
        for g, n in gns:
            reports += check_lemma_residue(eng, ms, g, n, tol=tol)
    elif identity == "prop32":
        ctx = AncestorContext(data, cfg.series_order, 3, max(max(ms), 0))
        for m in ms:
            reports += check_prop32_identities(data, m, K=cfg.series_order, ctx=ctx, tol=tol)
    elif identity == "prop41":
        for g, n in gns:
            for m in ms:
                reports.append(check_prop41_residue(eng, m, g, n, tol=tol))
    elif identity == "descendent":
        valid = [m for m in ms if validate_condition(data, m)]
        ctx = correlator_context(eng, valid, cfg.degree) if valid else None
        for g, n in gns:
            for m in ms:
                reports.append(check_descendent_correlator_identity(eng, m, g, n, max_degree=cfg.degree,
                                                                    corr=ctx, tol=tol))
    elif identity == "symplectic":
        try:
            R = r_matrix(data, cfg.K, consistency=cfg.K, tol=tol)
            bad = None
        except ExtractionError as exc:
            R, bad = None, str(exc)
        ok = bad is None
        reports.append(CheckReport("symplectic", None, None, None, "exact" if ok and data.F.exact else
                                   ("pass" if ok else "fail"), "" if ok else bad, ok, [],
                                   {"order": cfg.K}))
    elif identity == "homogeneity":
        eu = check_homogeneity(data, cfg.K, tol=tol)
        reports.append(CheckReport("homogeneity", None, None, None, "pass" if eu.homogeneous else "fail", "",
                                   eu.homogeneous, [], eu.to_json(data.F)))
    else:
        raise InputError(f"unknown identity {identity!r}")
    return reports


def cmd_check(cfg: RunConfig, identity: str, ms: list[int], gns: list[tuple[int, int]], out=sys.stdout) -> int:
    reports = run_checks(cfg, identity, ms, gns)
    if cfg.fmt == "csv":
        _emit_csv([{"identity": r.identity, "m": r.m, "g": r.g, "n": r.n, "status": r.status,
                    "defect": r.defect, "passed": r.passed,
                    "reason": r.details.get("reason", "") if r.skipped else ""} for r in reports], out)
    else:
        for r in reports:
            _emit_json(r.to_json(), out)
        _emit_json({"summary": {"identity": identity, "reports": len(reports),
                                "passed": sum(r.passed and not r.skipped for r in reports),
                                "skipped": sum(r.skipped for r in reports),
                                "failed": sum(not r.passed for r in reports)}}, out)
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


def _keep_tr(family: str, r: int):
    if family == "airy":
        return lambda v: v[1] % 2 == 1
    if family == "r_bessel":
        return lambda v: v[1] % r != 0
    return None


def cmd_operators(cfg: RunConfig, side: str, m: int, transport: bool = False, reference: bool = False,
                  out=sys.stdout) -> int:
    data = validate(load_spec(cfg))
    F = data.F
    fam = cfg.family
    K = cfg.degree
    params = {k: v for k, v in cfg.params.items() if k in ("u", "v", "r", "eps")}
    report_only = fam == "r_bessel"
    if (transport or reference or side == "geometric") and fam is None:
        raise InputError("reference tables exist only for the catalog curves airy, egdd and r_bessel")
    status = EXIT_OK
    if side == "geometric" and not transport:
        ref = reference_operators(fam, m, "geometric", cutoff=K, F=F, params=params)
        doc = ref.to_json(F)
    elif side == "tr" or transport:
        op = descendent_virasoro(data, m, K)
        doc = {"side": "tr", **op.to_json(F)}
        if reference:
            ref = reference_operators(fam, m, "tr", cutoff=K, F=F, params=params)
            diff = op.table.diff(ref.table, F, _keep_tr(fam, data.boundaries[0].r))
            doc["reference_diff"] = diff
            if diff and not report_only:
                status = EXIT_FAIL
        if transport:
            tmap = transport_map(fam, F, K, params)
            tr = transport_operator(op, tmap, F)
            geo = reference_operators(fam, m, "geometric", cutoff=K, F=F, params=params)
            Kt = t_window(fam, K, params)
            diff = tr.diff(geo.table, F, lambda v: v[1] <= Kt)
            doc = {"side": "geometric", "transported": tr.to_json(F), "map": tmap.to_json(F), "window": Kt,
                   "diff": diff, "mode": "report-only" if report_only else "compare"}
            if diff and not report_only:
                status = EXIT_FAIL
    else:
        raise InputError(f"unknown side {side!r}")
    if cfg.fmt == "csv":
        rows = []
        for blk in ("constant", "linear"):
            for key, val in (doc.get(blk) or {}).items():
                rows.append({"block": f"{blk}:{key}", "entries": val})
        _emit_csv(rows or [{"block": "document", "entries": doc}], out)
    else:
        _emit_json(doc, out)
    return status


# --- argument handling ---

def _params(items: Iterable[str]) -> dict:
    out = {}
    for it in items or ():
        if "=" not in it:
            raise InputError(f"--param expects key=value, got {it!r}")
        k, v = it.split("=", 1)
        out[k.strip()] = v.strip()
    return out


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trvirasoro", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--curve", required=True, help="catalog name (airy, egdd, r_bessel) or spec file path")
    common.add_argument("--param", action="append", default=[], help="catalog parameter key=value")
    common.add_argument("--backend", choices=("exact", "bigfloat"))
    common.add_argument("--degree", type=int, default=12, help="descendent total-degree cutoff")
    common.add_argument("--series-order", type=int, default=12)
    common.add_argument("-K", type=int, default=6, help="order for R-matrix and vacuum work")
    common.add_argument("--cache-dir", default=None, help=f"tensor cache (default ${CACHE_ENV})")
    common.add_argument("--format", choices=("json", "csv"), default="json")
    common.add_argument("--tol", type=float, default=CHECK_TOLERANCE, help="relative tolerance on bigfloat")
    common.add_argument("--workers", type=int, default=1)
    sub = p.add_subparsers(dest="command", required=True)
    sub.add_parser("analyze", parents=[common])
    inv = sub.add_parser("invariants", parents=[common])
    inv.add_argument("--kind", choices=("ancestor", "descendent"), required=True)
    inv.add_argument("-g", type=int, required=True)
    inv.add_argument("-n", type=int, required=True)
    chk = sub.add_parser("check", parents=[common])
    chk.add_argument("--identity", choices=IDENTITIES, required=True)
    chk.add_argument("-m", "--m-range", dest="m_range", default="0..2", help="a..b, a or a,b,c")
    chk.add_argument("--gn", action="append", default=[], help="g,n pair (repeatable)")
    chk.add_argument("--chi-max", type=int, default=1, help="default (g,n) set: 2g-2+n <= chi-max")
    ops = sub.add_parser("operators", parents=[common])
    ops.add_argument("--side", choices=("tr", "geometric"), default="tr")
    ops.add_argument("-m", type=int, required=True)
    ops.add_argument("--transport", action="store_true", help="push through the catalog map and diff")
    ops.add_argument("--reference", action="store_true", help="diff the TR operator against the table")
    return p


def _glue_negative(argv: list[str]) -> list[str]:
    """Let '-m -1..3' through argparse by gluing the value to the flag."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a in ("-m", "--m-range") and i + 1 < len(argv) and argv[i + 1].startswith("-"):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def _error(kind: str, exc: BaseException, code: int, out) -> int:
    _emit_json({"error": {"kind": kind, "message": str(exc)}}, out)
    return code


def main(argv: list[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    argv = _glue_negative(list(sys.argv[1:] if argv is None else argv))
    try:
        ns = _parser().parse_args(argv)
    except SystemExit as exc:
        # --help and --version exit 0; usage errors are input errors
        return EXIT_OK if not exc.code else EXIT_INPUT
    try:
        cfg = RunConfig(curve=ns.curve, params=_params(ns.param), backend=ns.backend, degree=ns.degree,
                        series_order=ns.series_order, K=ns.K,
                        cache_dir=ns.cache_dir or os.environ.get(CACHE_ENV) or None,
                        fmt=ns.format, tol=ns.tol, workers=ns.workers)
        if ns.command == "analyze":
            return cmd_analyze(cfg, out)
        if ns.command == "invariants":
            return cmd_invariants(cfg, ns.kind, ns.g, ns.n, out)
        if ns.command == "check":
            ms = parse_range(ns.m_range)
            gns = parse_gn(ns.gn) or default_gn(ns.identity, ns.chi_max)
            return cmd_check(cfg, ns.identity, ms, gns, out)
        if ns.command == "operators":
            return cmd_operators(cfg, ns.side, ns.m, ns.transport, ns.reference, out)
    except PrecisionError as exc:
        return _error("precision", exc, EXIT_PRECISION, out)
    except ExtractionError as exc:
        return _error(type(exc).__name__, exc, EXIT_FAIL, out)
    except (InputError, CurveError, CatalogError, FieldError, DescendentError, TransportError) as exc:
        return _error(type(exc).__name__, exc, EXIT_INPUT, out)
    return EXIT_INPUT
