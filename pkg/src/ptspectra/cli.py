"""pt-spectra command line: spectrum, zeros, regions, ortho, verify, stokes.

Exit codes: 0 = success / all verifications pass, 2 = violations found,
1 = operational error (bad config, missing input, solver failure).
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import analysis, ortho, persist
from .config import ConfigError, RunConfig, load_config
from .grid import GridMismatchError, build_grid
from .ode import IntegrationError
from .spectrum import (EigenvalueRecord, conjugation_defect, scan, sector_bound, verify_sector)
from .stokes import critical_angles, cubic_turning_points
from .zeros import ZeroFindingError, ZeroKind, find_zeros

log = logging.getLogger("pt_spectra")

EXIT_OK, EXIT_ERROR, EXIT_VIOLATIONS = 0, 1, 2

# printed members of the orthogonality family, as exact text
NAMED_MEMBERS = {
    "p3": "x^3 - 3*x*y^2 - b",
    "p7": "x^7 - 9*x^5*y^2 - 5*x^4*b + 18*x^3*y^4 + 18*x^2*y^2*b + 4*x*(b^2 - 3*y)",
    "p8": "2*x^8 - 16*x^6*y^2 - 7*x^5*b + 30*x^4*y^4 + 25*x^3*y^2*b + 5*x^2*(b^2 - 12*y) + 10*y^3 - 10*a",
    "p9": "2*x^9 - 15*x^7*y^2 - 6*x^6*b + 27*x^5*y^4 + 4*x^3*(b^2 - 27*y) + 24*x*y^3 + 21*x^4*y^2*b - 24*x*a",
    "p10": "20*x^10 - 144*x^8*y^2 - 55*x^7*b + 252*x^6*y^4 + 189*x^5*y^2*b - 35*x^4*(48*y - b^2)"
           " + 420*x^2*(y^3 - a) - 210",
}


class UsageError(RuntimeError):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _apply_overrides(cfg: RunConfig, args) -> RunConfig:
    p, s, g = cfg.potential, cfg.solver, cfg.grid
    for attr, target, name in (("n", p, "n"), ("coeffs_a", p, "a"), ("coeffs_b", p, "b"), ("g", p, "g"),
                               ("shift_imag", p, "shift_imag"), ("box", s, "box"), ("tol", s, "tol"),
                               ("L", s, "L"), ("max_eigenvalues", s, "max_eigenvalues"),
                               ("rect", g, "rect"), ("nx", g, "nx"), ("ny", g, "ny")):
        val = getattr(args, attr, None)
        if val is not None:
            setattr(target, name, val)
    if getattr(args, "no_sector_prune", False):
        s.sector_prune = False
    if getattr(args, "out", None):
        cfg.output.directory = args.out
    if getattr(args, "suites", None):
        cfg.verification.suites = args.suites
    return cfg.validate()


def _outdir(cfg: RunConfig) -> Path:
    return Path(cfg.output.directory)


def _record(cfg: RunConfig, args) -> EigenvalueRecord:
    if getattr(args, "lam", None) is not None:
        re, im = args.lam
        return EigenvalueRecord(complex(re, im), math.nan, math.nan)
    path = getattr(args, "eigenvalues", None)
    if path is None:
        raise UsageError("no eigenvalue input: run `pt-spectra spectrum` first and pass --eigenvalues "
                         "<dir>/eigenvalues.json (or give --lambda RE IM)")
    records, _ = persist.load_eigenvalues(path)
    idx = cfg.verification.eigen_index if args.index is None else args.index
    match = [r for r in records if r.index == idx]
    if not match:
        raise UsageError(f"{path}: no eigenvalue with index {idx}")
    return match[0]


def _report(cfg: RunConfig, command: str, body: dict, timings: dict) -> dict:
    return {"kind": "report", "command": command, "config": cfg.to_dict(), **body, "timings": timings}


# --- subcommands -------------------------------------------------------------

def cmd_spectrum(cfg: RunConfig, args) -> int:
    spec = cfg.potential.spec()
    t0 = time.perf_counter()
    res = scan(spec, cfg.solver.search_box(), L=cfg.solver.L, count_tol=cfg.solver.count_tol,
               refine_tol=cfg.solver.tol, sector_prune=cfg.solver.sector_prune, slack=cfg.solver.slack,
               max_eigenvalues=cfg.solver.max_eigenvalues)
    elapsed = time.perf_counter() - t0
    bound = sector_bound(spec.n)
    rows = []
    print(f"{'index':>5} {'Re lambda':>22} {'Im lambda':>12} {'|arg|':>10} {'margin':>10} {'residual':>9}")
    for r in sorted(res.records, key=lambda r: r.index):
        rep = verify_sector(r, spec.n)
        rows.append({"index": r.index, "abs_arg": rep.abs_arg, "bound": bound, "margin": rep.margin,
                     "violated": rep.violated, "real": abs(r.lam.imag) < 1e-8 * abs(r.lam)})
        print(f"{r.index:5d} {r.lam.real:22.15g} {r.lam.imag:12.3e} {rep.abs_arg:10.3e} {rep.margin:10.6f} "
              f"{r.wronskian_residual:9.1e}{'  SECTOR VIOLATION' if rep.violated else ''}")
    print(f"{len(res.records)} eigenvalue(s), winding count {res.total_count}, bound pi/{2 * spec.n + 3}, "
          f"{elapsed:.1f} s")
    out = _outdir(cfg)
    meta = {"potential": cfg.potential.__dict__, "L": res.L}
    if "json" in cfg.output.formats:
        persist.save_eigenvalues(res.records, out / "eigenvalues.json", meta)
        persist.dump_json(_report(cfg, "spectrum", {"eigenvalues": res.records, "sector": rows,
                                                    "winding_count": res.total_count,
                                                    "failures": res.failures}, {"scan_s": elapsed}),
                          out / "spectrum_report.json")
    if "csv" in cfg.output.formats:
        persist.write_table_csv(["index", "lambda_re", "lambda_im", "residual", "sector_margin"],
                                [(r.index, r.lam.real, r.lam.imag, r.wronskian_residual, r.sector_margin)
                                 for r in res.records], out / "eigenvalues.csv")
    for f in res.failures:
        log.error("solver: %s", f)
    if any(r["violated"] for r in rows):
        return EXIT_VIOLATIONS
    return EXIT_ERROR if res.failures else EXIT_OK


def _main_grid(cfg: RunConfig, rec: EigenvalueRecord):
    g = cfg.grid
    return build_grid(cfg.potential.spec(), rec, tuple(g.rect), (g.nx, g.ny), tol=cfg.solver.tol)


def cmd_zeros(cfg: RunConfig, args) -> int:
    rec = _record(cfg, args)
    t0 = time.perf_counter()
    grid = _main_grid(cfg, rec)
    zeros = find_zeros(grid, ZeroKind.U) + find_zeros(grid, ZeroKind.DU)
    elapsed = time.perf_counter() - t0
    for z in zeros:
        print(f"{z.which.value:>10} {z.z.real:+.12f} {z.z.imag:+.12f}i  winding {z.winding}"
              f"  {z.a_region.value if z.a_region else ''} {z.b_region.value if z.b_region else ''}")
    out = _outdir(cfg)
    if "csv" in cfg.output.formats:
        persist.write_zeros_csv(zeros, out / "zeros.csv")
        persist.write_field_csv(grid, out / "field.csv")
    if "json" in cfg.output.formats:
        persist.dump_json(_report(cfg, "zeros", {"lambda": rec.lam, "zeros": zeros}, {"zeros_s": elapsed}),
                          out / "zeros.json")
    return EXIT_OK


def cmd_regions(cfg: RunConfig, args) -> int:
    rec = _record(cfg, args)
    x0, x1, y0, y1 = cfg.grid.rect
    x = np.linspace(x0, x1, cfg.grid.nx)
    y = np.linspace(y0, y1, cfg.grid.ny)
    lines = analysis.region_polylines(x, y, rec.lam)
    tp = cubic_turning_points(rec.lam)
    out = _outdir(cfg)
    if "csv" in cfg.output.formats:
        persist.write_polylines_csv(lines, out / "regions.csv")
    if "json" in cfg.output.formats:
        persist.dump_json(_report(cfg, "regions", {"lambda": rec.lam, "turning_points": list(tp)}, {}),
                          out / "regions.json")
    for z in tp:
        print(f"turning point {z.real:+.10f} {z.imag:+.10f}i")
    print(f"{sum(len(v) for v in lines.values())} level-curve polylines")
    return EXIT_OK


def _ortho_grid(cfg: RunConfig, rec: EigenvalueRecord):
    v = cfg.verification
    return build_grid(cfg.potential.spec(), rec, tuple(v.convexity_rect), (v.convexity_nx, v.convexity_ny),
                      tol=cfg.solver.tol)


def _ortho_members(args) -> list[tuple[str, ortho.BivariatePoly]]:
    members = [(name, ortho.BivariatePoly.parse(t)) for name, t in NAMED_MEMBERS.items()]
    for script in args.rules or []:
        members.append((script, ortho.apply_rules(script)))
    if args.depth:
        members += [(m.label, m.poly) for m in ortho.enumerate_family(args.depth, args.degree_cap)]
    return members


def cmd_ortho(cfg: RunConfig, args) -> int:
    members = _ortho_members(args)
    ys = args.y_values if args.y_values is not None else cfg.verification.y_values
    has_lambda = args.eigenvalues is not None or args.lam is not None
    grid = _ortho_grid(cfg, _record(cfg, args)) if has_lambda else None
    entries = []
    worst = 0.0
    for name, p in members:
        e = {"name": name, "text": p.to_text(), "degree": p.degree()}
        if grid is not None:
            e["residuals"] = ortho.orthogonality_test(p, grid, y_values=ys)
            worst = max(worst, max(e["residuals"]))
        entries.append(e)
        res = "" if grid is None else "  max residual %.2e" % max(e["residuals"])
        print(f"{name:>16}  deg {p.degree():2d}{res}")
        if args.show:
            print(f"    {p.to_text()}")
    if "json" in cfg.output.formats:
        persist.dump_json(_report(cfg, "ortho", {"y_values": ys, "members": entries}, {}),
                          _outdir(cfg) / "ortho.json")
    if grid is not None and worst >= 1e-5:
        return EXIT_VIOLATIONS
    return EXIT_OK


def _entry(rep: analysis.CheckReport, suite: str) -> dict:
    d = rep.to_dict()
    return {"suite": suite, "id": d.pop("name"), "checked": d.pop("samples"), **d}


def _value_entry(suite: str, name: str, value: float, limit: float, checked: int = 1,
                 applicable: bool = True, note: str = "") -> dict:
    bad = applicable and not (value <= limit)
    return {"suite": suite, "id": name, "checked": checked, "violations": int(bad),
            "worst_margin": limit - value, "value": value, "limit": limit, "applicable": applicable,
            "note": note, "passed": not bad}


def run_verification(cfg: RunConfig, rec: EigenvalueRecord, records=None) -> tuple[list[dict], dict]:
    spec = cfg.potential.spec()
    v = cfg.verification
    suites = set(v.suites)
    cubic = analysis._is_cubic(spec)
    entries: list[dict] = []
    timings: dict[str, float] = {}
    # a numerically real eigenvalue (|Im| < 1e-8 |lambda|) is checked against the real-lambda statements
    real = abs(rec.lam.imag) < 1e-8 * abs(rec.lam)
    if real and rec.lam.imag != 0:
        rec = EigenvalueRecord(complex(rec.lam.real, 0.0), rec.wronskian_residual, rec.sector_margin,
                               rec.index, rec.iterations)
    t = time.perf_counter()
    grid = _main_grid(cfg, rec)
    timings["grid_s"] = time.perf_counter() - t

    if "symmetry" in suites:
        try:
            err, _ = analysis.pt_symmetry_error(grid)
            entries.append(_value_entry("symmetry", "pt_reflection", err, 1e-6, grid.nx * grid.ny, real,
                                        "u(z) = e^{i phi} conj(u(-conj z))"))
        except ValueError as exc:
            entries.append(_value_entry("symmetry", "pt_reflection", math.nan, 1e-6, 0, False, str(exc)))
        if records:
            entries.append(_value_entry("symmetry", "conjugate_closure", conjugation_defect(records), 1e-8,
                                        len(records)))
    if "sign" in suites:
        if cubic and rec.lam.real > 0:
            entries += [_entry(r, "sign") for r in analysis.verify_sign_theorems(grid, rec)]
        entries.append(_entry(analysis.real_axis_report(grid), "sign"))
    if "monotonicity" in suites:
        entries += [_entry(r, "monotonicity") for r in analysis.verify_monotonicity(grid)]
    if "zeros" in suites and cubic:
        t = time.perf_counter()
        zu, zd = find_zeros(grid, ZeroKind.U), find_zeros(grid, ZeroKind.DU)
        bad = analysis.zeros_in_certified_regions(zu + zd, rec.lam)
        entries.append({"suite": "zeros", "id": "zeros_in_certified_regions", "checked": len(zu) + len(zd),
                        "violations": len(bad), "worst_margin": None, "applicable": True,
                        "note": "", "passed": not bad})
        sep = min((abs(a.z - b.z) for a in zu for b in zd), default=math.inf)
        entries.append(_value_entry("zeros", "u_du_separation", -sep, -1e-6, len(zu) * len(zd)))
        taller = None
        if real:
            h0, h1 = v.census_heights
            win = [build_grid(spec, rec, (-0.5, 0.5, 0.5, 0.5 + h), (21, int(round(h / 0.02)) + 1),
                              tol=cfg.solver.tol) for h in (h0, h1)]
            short, taller = find_zeros(win[0]), find_zeros(win[1])
            zu_all = zu + short
        else:
            zu_all = zu
        census = analysis.zero_census(zu_all + zd, rec.lam, taller)
        entries.append({"suite": "zeros", "id": "census", "checked": len(zu_all) + len(zd),
                        "violations": len(census.offenders) + (census.growth_ok is False),
                        "worst_margin": None, "applicable": True, "counts": census.counts,
                        "axis_counts": census.axis_counts, "note": "growth proxy: taller window has "
                        "strictly more imaginary-axis zeros", "passed": census.passed})
        timings["zeros_s"] = time.perf_counter() - t
    if "green" in suites:
        worst = 0.0
        for path in analysis.random_paths(grid, v.green_paths, v.seed):
            r = analysis.green_residual(grid, path)
            worst = max(worst, r.real_residual, r.im_residual)
        entries.append(_value_entry("green", "random_paths", worst, v.green_limit, v.green_paths))
    if "convexity" in suites or "ortho" in suites:
        t = time.perf_counter()
        cgrid = _ortho_grid(cfg, rec)
        timings["convexity_grid_s"] = time.perf_counter() - t
        if "convexity" in suites:
            c = analysis.convexity_check(cgrid)
            entries.append(_value_entry("convexity", "second_differences", -c.worst_relative, 1e-8,
                                        len(c.second_differences)))
            entries.append(_value_entry("convexity", "second_derivative_identity", c.fpp_rel_error, 1e-4,
                                        len(c.fpp_fd)))
            fits = analysis.decay_fit(cgrid)
            bad = sum(1 for f in fits if not (f.c2 > 0 and math.isfinite(f.c1)))
            entries.append({"suite": "convexity", "id": "decay_fit", "checked": len(fits), "violations": bad,
                            "worst_margin": None, "applicable": True, "passed": bad == 0,
                            "note": "C1 exp(-|x|^C2) envelope per row",
                            "c2_range": [min(f.c2 for f in fits), max(f.c2 for f in fits)]})
        if "ortho" in suites and cubic:
            named = [(k, ortho.BivariatePoly.parse(s)) for k, s in NAMED_MEMBERS.items()]
            worst = max(max(ortho.orthogonality_test(p, cgrid, y_values=v.y_values)) for _, p in named)
            entries.append(_value_entry("ortho", "named_members", worst, 1e-6, len(named) * len(v.y_values)))
            fam = ortho.enumerate_family(v.ortho_depth, v.ortho_degree_cap)
            worst = max(max(ortho.orthogonality_test(m.poly, cgrid, y_values=v.y_values)) for m in fam)
            entries.append(_value_entry("ortho", "generated_members", worst, 1e-5, len(fam) * len(v.y_values)))
    return entries, timings


def cmd_verify(cfg: RunConfig, args) -> int:
    rec = _record(cfg, args)
    records = persist.load_eigenvalues(args.eigenvalues)[0] if args.eigenvalues else None
    t0 = time.perf_counter()
    entries, timings = run_verification(cfg, rec, records)
    timings["total_s"] = time.perf_counter() - t0
    violations = sum(e["violations"] for e in entries if e.get("applicable", True))
    for e in entries:
        status = "n/a " if not e.get("applicable", True) else ("PASS" if e["violations"] == 0 else "FAIL")
        print(f"{status}  {e['suite']:>12}  {e['id']:<32} checked {e['checked']:>7}  violations {e['violations']}")
    print(f"total violations: {violations}")
    if "json" in cfg.output.formats:
        persist.dump_json(_report(cfg, "verify", {"lambda": rec.lam, "checks": entries,
                                                  "violations": violations}, timings),
                          _outdir(cfg) / "verify.json")
    return EXIT_VIOLATIONS if violations else EXIT_OK


def cmd_stokes(cfg: RunConfig, args) -> int:
    n = cfg.potential.n
    ang = critical_angles(n)
    rows = [(j, float(a), float(a / math.pi)) for j, a in enumerate(ang)]
    for j, a, f in rows:
        print(f"theta_{j} = {f:.6f} pi")
    out = _outdir(cfg)
    if "csv" in cfg.output.formats:
        persist.write_table_csv(["j", "theta", "theta_over_pi"], rows, out / "stokes_angles.csv")
        if n == 1 and (args.eigenvalues is not None or args.lam is not None):
            rec = _record(cfg, args)
            x0, x1, y0, y1 = cfg.grid.rect
            lines = analysis.region_polylines(np.linspace(x0, x1, cfg.grid.nx),
                                              np.linspace(y0, y1, cfg.grid.ny), rec.lam)
            persist.write_polylines_csv(lines, out / "regions.csv")
    return EXIT_OK


# --- argument parsing -------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pt-spectra", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, lam=False):
        p.add_argument("--config", help="JSON run configuration (flags override it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--threads", type=int, help="worker cap (sets PT_SPECTRA_THREADS)")
        p.add_argument("--n", type=int)
        p.add_argument("--coeffs-a", type=_floats)
        p.add_argument("--coeffs-b", type=_floats)
        p.add_argument("--g", type=float)
        p.add_argument("--shift-imag", type=float)
        p.add_argument("--tol", type=float)
        p.add_argument("--L", type=float)
        if lam:
            p.add_argument("--eigenvalues", help="eigenvalues.json written by `spectrum`")
            p.add_argument("--index", type=int, help="which eigenvalue (by |lambda| rank, 0 = ground state)")
            p.add_argument("--lambda", dest="lam", type=float, nargs=2, metavar=("RE", "IM"))
            p.add_argument("--rect", type=_floats, help="x_lo,x_hi,y_lo,y_hi")
            p.add_argument("--nx", type=int)
            p.add_argument("--ny", type=int)
        return p

    p = common(sub.add_parser("spectrum", help="count and refine eigenvalues in a box"))
    p.add_argument("--box", type=_floats, help="re_lo,im_lo,re_hi,im_hi")
    p.add_argument("--max-eigenvalues", type=int)
    p.add_argument("--no-sector-prune", action="store_true", help="contour every box, even outside the sector")
    p.set_defaults(func=cmd_spectrum)

    common(sub.add_parser("zeros", help="zeros of u and u' on the configured grid"), lam=True).set_defaults(
        func=cmd_zeros)
    common(sub.add_parser("regions", help="A/B level curves and turning points"), lam=True).set_defaults(
        func=cmd_regions)

    p = common(sub.add_parser("ortho", help="orthogonality family: build, print, test"), lam=True)
    p.add_argument("--rules", action="append", help="composition script, e.g. 'iii,iv' or 'ii:2,iii'")
    p.add_argument("--y-values", type=_floats)
    p.add_argument("--depth", type=int, default=0, help="also enumerate compositions up to this depth")
    p.add_argument("--degree-cap", type=int, default=16)
    p.add_argument("--show", action="store_true", help="print polynomial text")
    p.set_defaults(func=cmd_ortho)

    p = common(sub.add_parser("verify", help="run the verification suites"), lam=True)
    p.add_argument("--suites", type=lambda s: [t.strip() for t in s.split(",") if t.strip()])
    p.set_defaults(func=cmd_verify)

    common(sub.add_parser("stokes", help="critical angles (and cubic region curves)"), lam=True).set_defaults(
        func=cmd_stokes)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.threads is not None:
        os.environ["PT_SPECTRA_THREADS"] = str(max(1, args.threads))
    try:
        cfg = _apply_overrides(load_config(args.config), args)
        return args.func(cfg, args)
    except (ConfigError, persist.SchemaError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except (GridMismatchError, IntegrationError, ZeroFindingError, analysis.ConvexityError,
            ortho.OrthogonalityError, ValueError, RuntimeError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
