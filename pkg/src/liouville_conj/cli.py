"""Command-line interface: ``liouville-conj {validate,trace,conjugate,suite}``.

Exit codes: 0 pass, 1 invariant/classification failure, 2 usage or I/O error.
Outputs go to ``<out>/<run id>/`` (config.json, report.json and command files);
report.json is written with sorted keys and carries no timestamps.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import conjugate as cj
from . import geodesic as geo
from . import quadrature as quad
from . import suites
from .config import RunConfig, SuiteSizes
from .conjugate import ClassifyTolerances
from .errors import LiouvilleError
from .geodesic import IntegrationOptions
from .integrals import covector_from_u
from .manifold import base_point, general_base_point, load_config, manifold_from_config

log = logging.getLogger("liouville_conj")

EXIT_PASS, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


class UsageError(Exception):
    """Bad arguments or unreadable inputs (exit code 2)."""


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _dump(obj):
    return json.dumps(cj._jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n"


def run_dir(cfg: RunConfig):
    rid = cfg.run_id
    if rid is None:
        digest = hashlib.sha256(_dump({**cfg.to_dict(), "out": None}).encode()).hexdigest()
        rid = f"{cfg.command}-{digest[:10]}"
    path = Path(cfg.out) / rid
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise UsageError(f"cannot create output directory {path}: {exc}") from exc
    return path


def _write(path, text):
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise UsageError(f"cannot write {path}: {exc}") from exc


def load_manifold(cfg: RunConfig):
    spec = cfg.manifold
    if spec is None:
        raise UsageError("--spec is required")
    try:
        M = manifold_from_config(spec)
    except LiouvilleError:
        raise
    except (ValueError, TypeError, KeyError) as exc:
        raise UsageError(f"invalid manifold spec: {exc}") from exc
    bp = spec.get("base_point")
    if bp is None:
        p0 = general_base_point(M)
    elif "x" in bp:
        p0 = base_point(M, np.asarray(bp["x"], dtype=float))
    else:
        p0 = general_base_point(M, bp["fractions"])
    return M, p0


def _read_spec(path):
    if path is None:
        return None
    try:
        spec = load_config(path)
    except (OSError, ValueError) as exc:
        raise UsageError(f"cannot read spec {path}: {exc}") from exc
    if not isinstance(spec, dict) or "a" not in spec:
        raise UsageError(f"spec {path} has no spectrum 'a'")
    return spec


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------


def cmd_validate(cfg: RunConfig):
    M, _ = load_manifold(cfg)
    rep = M.spec.condition_report
    out = run_dir(cfg)
    ok = rep.passes or rep.round_sphere
    report = {"command": "validate", "seed": cfg.seed, "spec": M.spec.to_dict(),
              "condition_report": rep.to_dict(), "alphas": list(M.alphas), "pass": ok}
    _write(out / "config.json", _dump(cfg.to_dict()))
    _write(out / "report.json", _dump(report))
    for w in rep.warnings:
        log.warning(w)
    return (EXIT_PASS if ok else EXIT_FAIL), report, out


def _direction(cfg, n):
    if cfg.u is not None:
        u = np.asarray(cfg.u, dtype=float)
        if u.size != n - 1:
            raise UsageError(f"--u needs {n - 1} angles")
        return u
    return suites.random_generic_u(n, np.random.default_rng(cfg.seed))


def cmd_trace(cfg: RunConfig):
    M, p0 = load_manifold(cfg)
    n = M.n
    u = _direction(cfg, n)
    s0 = covector_from_u(p0, u)
    trace = geo.integrate_geodesic(M, s0, cfg.horizon, cfg.integration)
    bundle = geo.jacobi_from_u(M, p0, u, T=cfg.horizon, stop_zeros=None, opts=cfg.integration)
    ts = trace.sample_times()
    Y = trace.dense(ts)
    y = bundle.y(ts)
    out = run_dir(cfg)
    rows = [["t"] + [f"x{k+1}" for k in range(n)] + [f"xi{k+1}" for k in range(n)]
            + [f"f{k+1}" for k in range(n)] + [f"y{k+1}" for k in range(n - 1)]]
    for t, yy, jj in zip(ts, Y, y):
        rows.append([repr(float(v)) for v in [t, *yy[: 3 * n], *jj]])
    try:
        with open(out / "trace.csv", "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    ev = geo.event_times(trace)
    zeros = geo.find_zeros(bundle, max_zeros=8)
    orbit = {}
    for name, coef, monic in (("G=1", (1.0,), False),
                              ("monic", tuple([0.0] * (n - 1) + [1.0]), True)):
        try:
            chk = quad.orbit_quadrature_check(trace, None, coef, monic=monic)
            orbit[name] = {"value": chk.value, "target": chk.target, "residual": chk.residual}
        except LiouvilleError as exc:
            orbit[name] = {"error": f"{type(exc).__name__}: {exc}"}
    ok = not trace.ledger["breach"]
    report = {"command": "trace", "seed": cfg.seed, "u": u.tolist(), "x0": p0.x_array.tolist(),
              "xi0": s0.xi.tolist(), "horizon": cfg.horizon, "b": trace.spectral.b.tolist(),
              "ledger": trace.ledger, "events": ev.to_dict(),
              "jacobi_zeros": {str(k): v.tolist() for k, v in zeros.items()},
              "orbit_quadrature": orbit, "pass": ok}
    _write(out / "events.json", _dump(ev.to_dict()))
    _write(out / "config.json", _dump(cfg.to_dict()))
    _write(out / "report.json", _dump(report))
    return (EXIT_PASS if ok else EXIT_FAIL), report, out


def _field_csv(field_, i, path):
    n = field_.n
    grads = [field_.gradient(i, k) for k in range(1, n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([f"u{k}" for k in range(1, n)] + [f"r{i}"] + [f"dr{i}_du{k}" for k in range(1, n)]
                   + (["r2_second"] if field_.r2 is not None and i == n - 1 else []) + ["cells"])
        for idx in np.ndindex(field_.shape):
            row = [repr(float(v)) for v in field_.u[idx]] + [repr(float(field_.r[idx + (i - 1,)]))]
            row += [repr(float(g[idx])) for g in grads]
            if field_.r2 is not None and i == n - 1:
                row.append(repr(float(field_.r2[idx])))
            row.append(";".join(sorted(field_.labels[idx])))
            w.writerow(row)


def cmd_conjugate(cfg: RunConfig):
    M, p0 = load_manifold(cfg)
    n = M.n
    round_sphere = M.spec.profile.kind == "constant"
    tol = cfg.tolerances
    if cfg.grid is not None:
        if len(cfg.grid) != n - 1:
            raise UsageError(f"--grid needs {n - 1} counts")
        grid = cj.GridSpec(tuple(int(g) for g in cfg.grid))
    else:
        grid = cj.default_grid(n)
    field_ = cj.r_field(M, p0, grid, second=True, opts=cfg.integration)
    out = run_dir(cfg)
    report = {"command": "conjugate", "seed": cfg.seed, "n": n, "grid": list(grid.counts),
              "x0": p0.x_array.tolist(), "hole_rate": field_.hole_rate(),
              "failures": field_.failures[:20], "round_sphere": round_sphere}
    checks = {"holes": field_.hole_rate() <= 0.01}
    ordering = cj.ordering_report(field_, tol)
    report["ordering"] = ordering.to_dict()
    checks["ordering"] = ordering.passed
    report["kth_conjugate"] = cj.kth_conjugate_check(field_).to_dict()
    report["continuity"] = {str(i): field_.continuity_constant(i) for i in range(1, n)}
    indices = [cfg.i] if cfg.i is not None else list(range(1, n))
    classify = cfg.classify and not round_sphere
    labels_summary = {}
    for i in indices:
        samples = cj.locus_samples(field_, i, classify=classify, tol=tol)
        counts = {}
        for s in samples:
            counts[s.label.tag] = counts.get(s.label.tag, 0) + 1
        labels_summary[str(i)] = counts
        _field_csv(field_, i, out / f"field_{i}.csv")
        cj.export_geometry(samples, out / f"locus_{i}.json", "json")
        try:
            cj.export_geometry(samples, out / f"locus_{i}.obj", "obj", shape=field_.shape)
        except LiouvilleError as exc:
            report.setdefault("export_notes", []).append(f"locus_{i}.obj: {exc}")
        if classify:
            cells = [s for s in samples
                     if {f"C{i}-", f"C{i}+"} & cj.classify_cell(np.asarray(s.u))
                     and s.label.tag != "D4PlusCandidate" and np.isfinite(s.r)]
            good = sum(s.label.tag == "CuspidalEdge" for s in cells)
            rate = good / len(cells) if cells else 1.0
            report.setdefault("cusp_fits", {})[str(i)] = {
                "samples": len(cells), "cuspidal_edge": good, "rate": rate,
                "failed": [s.label.evidence for s in cells if s.label.tag != "CuspidalEdge"][:5]}
            checks[f"cusp_fits_{i}"] = rate >= 0.95
            bd = [s for s in samples if any(lab in cj.classify_cell(np.asarray(s.u))
                                            for lab in (f"dC{i}+", f"dC{i+1}+"))]
            if bd:
                d4 = sum(s.label.tag == "D4PlusCandidate" for s in bd)
                report.setdefault("d4", {})[str(i)] = {"samples": len(bd), "candidates": d4}
                checks[f"d4_{i}"] = d4 == len(bd)
    report["labels"] = labels_summary
    if n == 2:
        try:
            cc = cj.count_cusps_2d(M, p0, opts=cfg.integration)
            report["cusp_count"] = cc.to_dict()
            checks["cusp_count"] = cc.degenerate if round_sphere else cc.count == 4
        except LiouvilleError as exc:
            report["cusp_count"] = {"error": f"{type(exc).__name__}: {exc}"}
            checks["cusp_count"] = False
    if round_sphere:
        samples = cj.first_conjugate_locus(field_, classify=False)
        diam = cj.locus_diameter(samples, M)
        spread = float(np.nanmax(field_.r) - np.nanmin(field_.r))
        report["round_sphere_locus"] = {"diameter": diam, "r_spread": spread}
        checks["point_locus"] = diam < 1e-5 and spread < 1e-6
    report["checks"] = checks
    report["pass"] = all(checks.values())
    _write(out / "config.json", _dump(cfg.to_dict()))
    _write(out / "report.json", _dump(report))
    return (EXIT_PASS if report["pass"] else EXIT_FAIL), report, out


def cmd_suite(cfg: RunConfig):
    if cfg.manifold is not None:
        load_manifold(cfg)  # a corrupted spec is a usage error
    sizes = SuiteSizes.quick() if cfg.quick else cfg.sizes
    verdicts = suites.run_all(cfg.seed, sizes)
    report = {"command": "suite", "seed": cfg.seed, "sizes": sizes.__dict__, "suites": verdicts,
              "pass": all(v["pass"] for v in verdicts.values())}
    out = run_dir(cfg)
    _write(out / "config.json", _dump(cfg.to_dict()))
    _write(out / "report.json", _dump(report))
    return (EXIT_PASS if report["pass"] else EXIT_FAIL), report, out


COMMANDS = {"validate": cmd_validate, "trace": cmd_trace, "conjugate": cmd_conjugate,
            "suite": cmd_suite}


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _floats(text):
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers: {text}") from exc


def _ints(text):
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers: {text}") from exc


_TOL_FIELDS = [(IntegrationOptions, "integration", f.name) for f in fields(IntegrationOptions)
               if f.type in ("float", float)]
_TOL_FIELDS += [(ClassifyTolerances, "tolerances", f.name) for f in fields(ClassifyTolerances)]


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--spec", help="manifold config (JSON or TOML)")
    common.add_argument("--out", default="runs", help="output root directory")
    common.add_argument("--run-id", help="run directory name (default: config hash)")
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--horizon", type=float, default=20.0, help="integration horizon T")
    common.add_argument("--i", type=int, help="locus index i")
    common.add_argument("--j", type=int, help="boundary-cell index j")
    common.add_argument("--grid", type=_ints, help="samples per u-circle, e.g. 96,96")
    common.add_argument("--u", type=_floats, help="direction angles u_1,...,u_{n-1}")
    common.add_argument("--no-classify", action="store_true", help="skip singularity labels")
    common.add_argument("--quick", action="store_true", help="small suite sizes")
    common.add_argument("-v", "--verbose", action="store_true")
    for _, group, name in _TOL_FIELDS:
        common.add_argument(f"--tol-{name.replace('_', '-')}", type=float, dest=f"tol_{group}_{name}",
                            help=f"override {group}.{name}")
    p = argparse.ArgumentParser(prog="liouville-conj", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="cmd", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMANDS[name].__doc__)
    return p


def config_from_args(args):
    integ, tols = {}, {}
    for _, group, name in _TOL_FIELDS:
        v = getattr(args, f"tol_{group}_{name}")
        if v is not None:
            (integ if group == "integration" else tols)[name] = v
    try:
        return RunConfig(
            command=args.cmd, spec_path=args.spec, manifold=_read_spec(args.spec), out=args.out,
            run_id=args.run_id, seed=args.seed, horizon=args.horizon, i=args.i, j=args.j,
            grid=args.grid, u=args.u, classify=not args.no_classify, quick=args.quick,
            integration=replace(IntegrationOptions(), **integ),
            tolerances=replace(ClassifyTolerances(), **tols))
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = config_from_args(args)
        code, report, out = COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LiouvilleError as exc:
        print(f"failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    print(f"{cfg.command}: {'pass' if code == EXIT_PASS else 'FAIL'} -> {out / 'report.json'}")
    return code


if __name__ == "__main__":
    sys.exit(main())
