"""Command-line entry point: ``degenop <subcommand> --config FILE --out DIR``.

Exit codes: 0 success, 2 invalid config, 3 structural condition violated,
4 singular system, 5 no contraction, 1 anything else.
"""

from __future__ import annotations

import argparse
import hashlib
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .boundary import NonlocalBC, bc_from_dict, validate_conditions
from .calculus import GridFunction, GridSpec
from .config import RunConfig, SchemaError, parse_config
from .elliptic import (CoefficientField, assemble, coercivity_scan, manufactured_forcing,
                       random_forcings, solve)
from .errors import (BCError, ConditionError, DomainError, NoContraction, SingularSystem,
                     ValidationError)
from .io import RunManifest, write_json, write_rows, write_snapshot_csv
from .nonlinear import NonlinearControls, linear_coefficients, solve_nonlinear, toy_quadratic_model
from .norms import NormSpec, lp_values
from .parabolic import ParabolicProblem, maximal_regularity_ratio, step_scheme
from .pollutant import controls_from_config, model_from_config, run_demo, to_abstract
from .sector import SectorSpec, positivity_scan

log = logging.getLogger("degenop")

EXIT_CODES = [
    (SchemaError, 2),
    (ValidationError, 2),
    (BCError, 2),
    (ConditionError, 3),
    (SingularSystem, 4),
    (NoContraction, 5),
    (DomainError, 2),
]

COMMAND_KINDS = {
    "elliptic-solve": ("elliptic",),
    "resolvent-scan": ("resolvent-scan", "elliptic"),
    "coercivity-scan": ("elliptic", "resolvent-scan"),
    "parabolic-run": ("parabolic",),
    "nonlinear-run": ("nonlinear",),
    "pollutant-demo": ("pollutant-demo",),
    "validate": tuple(),
}


def exit_code(exc: BaseException) -> int:
    for cls, code in EXIT_CODES:
        if isinstance(exc, cls):
            return code
    return 1


def _cplx(z) -> complex:
    return complex(z[0], z[1]) if isinstance(z, list) else complex(z)


def _coef(v):
    """Number or ``[re, im]`` pair; a list of rows is a matrix."""
    if isinstance(v, list) and v and isinstance(v[0], list):
        return np.array([[_cplx(z) for z in row] for row in v])
    return _cplx(v)


def grid_from(cfg: RunConfig) -> GridSpec:
    g = cfg["grid"]
    n = len(g["n_cells"])
    return GridSpec.build(g["alpha"], g.get("lengths", [1.0] * n), g["n_cells"])


def bc_from(cfg: RunConfig, ndim: int) -> NonlocalBC:
    bc = cfg["bc"]
    return NonlocalBC.uniform(bc, ndim) if isinstance(bc, str) else bc_from_dict(bc)


def coeffs_from(cfg: RunConfig, grid: GridSpec) -> CoefficientField:
    c = cfg.get("coefficients", {})
    a = c.get("a", -1.0)
    a = [_cplx(v) for v in a] if isinstance(a, list) else _cplx(a)
    first = cfg.get("first_order")
    first = [_coef(v) for v in first] if first is not None else None
    return CoefficientField.build(grid, cfg.get("m", 1), a=a, A=_coef(c.get("A", 0.0)), A_first=first)


def norm_from(cfg: RunConfig) -> NormSpec:
    n = cfg.get("norm", {})
    return NormSpec(n.get("p", 2.0), n.get("p0", 2.0))


def sector_from(cfg: RunConfig) -> SectorSpec:
    s = cfg.get("sector", {})
    phi = s.get("phi", 2 * np.pi / 3)
    n_rays = s.get("n_rays", 9)
    if "moduli" in s:
        return SectorSpec(phi, tuple(s["moduli"]), tuple(np.linspace(-phi, phi, n_rays)),
                          s.get("include_zero", False))
    return SectorSpec.default(phi, tuple(s.get("decades", (0, 4))), n_rays, s.get("include_zero", False))


def forcing_from(cfg: RunConfig, grid: GridSpec, coeffs: CoefficientField, lam, mask, seed: int):
    """Forcing grid function and the exact solution when one is known."""
    spec = cfg.get("forcing", {"type": "manufactured"})
    kind = spec["type"]
    if kind == "manufactured":
        u, f = manufactured_forcing(grid, coeffs, lam)
        return f, u
    if kind == "constant":
        f = GridFunction(grid, np.where(mask, _cplx(spec.get("value", 1.0)), 0.0))
        return f, None
    return random_forcings(grid, coeffs.m, 1, spec.get("seed", seed), mask, norm_from(cfg).p)[0], None


def _run_elliptic(cfg, out: Path, seed, threads, files):
    grid = grid_from(cfg)
    bc, coeffs = bc_from(cfg, grid.ndim), coeffs_from(cfg, grid)
    lam = _cplx(cfg.get("lambda", 0.0))
    report = validate_conditions(coeffs, bc, grid, norm_from(cfg).p)
    write_json(out / "conditions.json", report.to_dict())
    files.append("conditions.json")
    op = assemble(coeffs, bc, grid, lam)
    f, exact = forcing_from(cfg, grid, coeffs, lam, op.interior_mask(), seed)
    u = solve(op, f)
    write_snapshot_csv(out / "solution.csv", grid, u.values)
    grid.write_csv(out / "grid.csv")
    files += ["solution.csv", "grid.csv"]
    summary = {"lambda": [lam.real, lam.imag], "n_dof": op.shape[0]}
    if exact is not None:
        p = norm_from(cfg).p
        summary["relative_error"] = lp_values(u.values - exact.values, grid, p) / lp_values(exact.values, grid, p)
    write_json(out / "summary.json", summary)
    files.append("summary.json")
    if "scan" in cfg.data:
        _write_scan(cfg, out, seed, threads, files, grid, bc, coeffs)


def _write_scan(cfg, out, seed, threads, files, grid=None, bc=None, coeffs=None):
    if grid is None:
        grid = grid_from(cfg)
        bc, coeffs = bc_from(cfg, grid.ndim), coeffs_from(cfg, grid)
    trials = cfg.get("scan", {}).get("trials", 5)
    recs = coercivity_scan(coeffs, bc, grid, sector_from(cfg), trials, norm_from(cfg).p, seed, threads)
    write_rows(out / "scan.csv",
               ["re_lambda", "im_lambda", "abs_lambda", "arg_lambda", "ratio", "residual", "status"],
               [(r.lam.real, r.lam.imag, abs(r.lam), float(np.angle(r.lam)), r.ratio, r.residual, r.status)
                for r in recs])
    files.append("scan.csv")


def _run_coercivity(cfg, out, seed, threads, files):
    _write_scan(cfg, out, seed, threads, files)


def _run_resolvent(cfg, out, seed, threads, files):
    grid = grid_from(cfg)
    bc, coeffs = bc_from(cfg, grid.ndim), coeffs_from(cfg, grid)
    rep = positivity_scan(coeffs, bc, grid, sector_from(cfg), norm_from(cfg).p, seed, threads)
    write_rows(out / "resolvent.csv",
               ["re_lambda", "im_lambda", "resolvent_norm", "weighted_norm", "status"],
               [(s.lam.real, s.lam.imag, s.resolvent_norm, s.weighted_norm, s.status) for s in rep.samples])
    m_hat = rep.M_hat
    (out / "resolvent_summary.txt").write_text(f"M_hat={'nan' if m_hat is None else '%.17g' % m_hat}\n")
    files += ["resolvent.csv", "resolvent_summary.txt"]


def _write_steps(cfg, out, grid, snapshots, files):
    """``solution.csv`` holds the final step; ``time.save`` selects extra ``step_XXXX.csv`` dumps."""
    write_snapshot_csv(out / "solution.csv", grid, snapshots[-1])
    files.append("solution.csv")
    save = cfg.get("time", {}).get("save", "final")
    steps = range(len(snapshots)) if save == "all" else ([] if save == "final" else sorted(set(save)))
    for s in steps:
        name = f"step_{s:04d}.csv"
        write_snapshot_csv(out / name, grid, snapshots[s])
        files.append(name)


def _run_parabolic(cfg, out, seed, threads, files):
    grid = grid_from(cfg)
    bc, coeffs = bc_from(cfg, grid.ndim), coeffs_from(cfg, grid)
    t = cfg["time"]
    mask = assemble(coeffs, bc, grid, 0.0).interior_mask()
    f, _ = forcing_from(cfg, grid, coeffs, 0.0, mask, seed)
    problem = ParabolicProblem(coeffs, bc, grid, t.get("d", 0.0), t.get("T", 1.0), t.get("steps", 10),
                               lambda _t: f)
    sol = step_scheme(problem, t.get("scheme", "implicit-euler"))
    spec = norm_from(cfg)
    diag = sol.diagnostics(spec)
    try:
        diag["ratio"] = maximal_regularity_ratio(sol, spec)
    except (DomainError, ZeroDivisionError) as exc:
        log.warning("ratio unavailable: %s", exc)
        diag["ratio"] = None
    _write_steps(cfg, out, grid, sol.snapshots, files)
    write_json(out / "diagnostics.json", diag)
    grid.write_csv(out / "grid.csv")
    files += ["diagnostics.json", "grid.csv"]


def _nonlinear_parts(cfg):
    grid = grid_from(cfg)
    bc = bc_from(cfg, grid.ndim)
    m = cfg["model"]
    model = toy_quadratic_model(m.get("eps", 0.1), m.get("a0", 1.0), m.get("source", 1.0),
                                m.get("a", -1.0), m.get("m", 1))
    t, nl = cfg.get("time", {}), cfg.get("nonlinear", {})
    controls = NonlinearControls(
        r=nl.get("r", 1e6), T=t.get("T", 1.0), n_steps=t.get("steps", 20),
        max_outer=nl.get("max_outer", 50), tol=nl.get("tol", 1e-10), d=t.get("d", 0.0),
        scheme=t.get("scheme", "implicit-euler"), norm=norm_from(cfg),
        max_shrinks=nl.get("max_shrinks", 0))
    return grid, bc, model, controls


def _run_nonlinear(cfg, out, seed, threads, files, auto_shrink=False):
    from dataclasses import replace
    grid, bc, model, controls = _nonlinear_parts(cfg)
    if auto_shrink and controls.max_shrinks == 0:
        controls = replace(controls, max_shrinks=4)
    try:
        sol, report = solve_nonlinear(model, controls, grid, bc)
    except NoContraction as exc:
        if exc.report is not None:
            write_json(out / "report.json", exc.report.to_dict())
            files.append("report.json")
        raise
    _write_steps(cfg, out, grid, sol.snapshots, files)
    write_json(out / "report.json", report.to_dict())
    files.append("report.json")


def _run_pollutant(cfg, out, seed, threads, files, auto_shrink=False):
    data = dict(cfg.data)
    if auto_shrink:
        data["nonlinear"] = dict(data.get("nonlinear", {}), max_shrinks=data.get("nonlinear", {}).get("max_shrinks") or 4)
    summary = run_demo(data, out)
    files += summary["files"]


def _run_validate(cfg, out, seed, threads, files):
    if cfg.kind == "pollutant-demo":
        form = to_abstract(model_from_config(cfg.data))
        grid, bc, coeffs = form.grid, form.bc, form.coeffs
        controls_from_config(cfg.data)
    elif cfg.kind == "nonlinear":
        grid, bc, model, _ = _nonlinear_parts(cfg)
        coeffs = linear_coefficients(model, grid)
    else:
        grid = grid_from(cfg)
        bc, coeffs = bc_from(cfg, grid.ndim), coeffs_from(cfg, grid)
    p = norm_from(cfg).p if cfg.kind != "pollutant-demo" else 2.0
    report = validate_conditions(coeffs, bc, grid, p)
    write_json(out / "validation.json", report.to_dict())
    files.append("validation.json")
    for f in report.messages:
        log.info("%s [%s] %s", f.severity, f.code, f.message)
    if not report.ok:
        raise ConditionError("; ".join(f.message for f in report.errors), report)


RUNNERS = {
    "elliptic-solve": _run_elliptic,
    "resolvent-scan": _run_resolvent,
    "coercivity-scan": _run_coercivity,
    "parabolic-run": _run_parabolic,
    "nonlinear-run": _run_nonlinear,
    "pollutant-demo": _run_pollutant,
    "validate": _run_validate,
}


def run(config: RunConfig, out_dir, command: str | None = None, seed: int | None = None,
        threads: int = 1, auto_shrink: bool = False) -> RunManifest:
    """Dispatch ``config`` to its runner, write outputs and the manifest.

    Errors are recorded in the manifest rather than raised; the exit code is
    ``manifest.exit_status``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    command = command or {"elliptic": "elliptic-solve", "resolvent-scan": "resolvent-scan",
                          "parabolic": "parabolic-run", "nonlinear": "nonlinear-run",
                          "pollutant-demo": "pollutant-demo"}[config.kind]
    manifest = RunManifest(hashlib.sha256(config.canonical().encode()).hexdigest(), __version__, command)
    seed = config.get("seed", 0) if seed is None else seed
    files: list = []
    try:
        allowed = COMMAND_KINDS[command]
        if allowed and config.kind not in allowed:
            raise SchemaError([("kind", f"{command} expects kind in {list(allowed)}, got {config.kind!r}")])
        runner = RUNNERS[command]
        kwargs = {"auto_shrink": auto_shrink} if command in ("nonlinear-run", "pollutant-demo") else {}
        runner(config, out, seed, threads, files, **kwargs)
    except Exception as exc:
        manifest.exit_status = exit_code(exc)
        manifest.error = f"{type(exc).__name__}: {exc}"
        log.debug("%s", manifest.error)
    for name in files:
        manifest.add(name)
    manifest.write(out)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="YAML or JSON run configuration")
    common.add_argument("--out", default="run", help="output directory (default: ./run)")
    common.add_argument("--seed", type=int, default=None, help="overrides the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for scans")
    common.add_argument("--auto-shrink", action="store_true",
                        help="halve T and retry when the Picard map does not contract")
    common.add_argument("-v", "--verbose", action="store_true")
    parser = argparse.ArgumentParser(prog="degenop", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in RUNNERS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    out = Path(args.out)
    try:
        config = parse_config(args.config)
    except (SchemaError, OSError) as exc:
        code = 2
        errs = exc.errors if isinstance(exc, SchemaError) else [("<file>", str(exc))]
        for path, msg in errs:
            print(f"config error at {path}: {msg}", file=sys.stderr)
        raw = Path(args.config).read_bytes() if Path(args.config).is_file() else b""
        manifest = RunManifest(hashlib.sha256(raw).hexdigest(), __version__, args.command,
                               exit_status=code, error=f"{type(exc).__name__}: {exc}")
        manifest.write(out)
        return code
    manifest = run(config, out, args.command, args.seed, max(1, args.threads), args.auto_shrink)
    if manifest.exit_status:
        print(manifest.error, file=sys.stderr)
    return manifest.exit_status


if __name__ == "__main__":
    sys.exit(main())
