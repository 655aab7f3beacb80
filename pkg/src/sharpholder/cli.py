"""Command-line front end: ``sharpholder {alpha,wirtinger,sharp,solve,measure}``.

Each run reads one JSON config, applies flag overrides, and writes
``report.json`` plus CSV artifacts into ``--out``.  Exit codes: 1 for config
errors, 2 for validation errors, 3 for numerical failures.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import sys
from pathlib import Path

import numpy as np

from . import alpha_bound, coeff_field, fem_solver, holder_meter, sharp_example, wirtinger
from .coeff_field import TWO_PI, AngularField, AngularProfile, IdentityField, field_from_spec
from .errors import ConfigError, InvalidProfile, NumericalError, SharpHolderError, ValidationError

EXIT_CONFIG = 1
EXIT_VALIDATION = 2
EXIT_NUMERICAL = 3

FIT_REL_TOL = 0.05


def tolerances() -> dict:
    """Every tolerance a run may use, embedded verbatim in each report."""
    return {
        "det_tol_exact": coeff_field.DET_TOL_EXACT,
        "det_tol_grid": coeff_field.DET_TOL_GRID,
        "wirtinger_quad_tol": wirtinger.QUAD_TOL,
        "wirtinger_constraint_tol": wirtinger.CONSTRAINT_TOL,
        "eig_rtol": wirtinger.EIG_RTOL,
        "eig_maxiter": wirtinger.EIG_MAXITER,
        "phase_grid": wirtinger.PHASE_GRID,
        "cg_rtol": fem_solver.CG_RTOL,
        "mesh_min_area": fem_solver.MIN_AREA,
        "mesh_angular_floor": fem_solver.ANGULAR_FLOOR,
        "weak_residual_inner_cutoff": sharp_example.INNER_CUTOFF,
        "fd_step": sharp_example.FD_STEP,
        "energy_inner_cutoff": holder_meter.ANALYTIC_CUTOFF,
        "fem_monotonicity_rtol": holder_meter.FEM_MONOTONICITY_RTOL,
        "fit_rel_tol": FIT_REL_TOL,
    }


# -- config handling -----------------------------------------------------------

def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from exc
    try:
        cfg = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError("config must be a JSON object")
    return cfg


def apply_overrides(cfg: dict, pairs) -> dict:
    """``key=value`` overrides; values are parsed as JSON when possible."""
    cfg = dict(cfg)
    for item in pairs or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, raw = item.split("=", 1)
        try:
            cfg[key] = json.loads(raw)
        except json.JSONDecodeError:
            cfg[key] = raw
    return cfg


def config_hash(cfg: dict) -> str:
    blob = json.dumps(cfg, sort_keys=True, separators=(",", ":")).encode()
    return hashlib.sha256(blob).hexdigest()


def _field(cfg: dict):
    spec = cfg.get("field")
    if spec is None and "variant" in cfg:
        spec = cfg
    if spec is None:
        raise ConfigError("config needs a 'field' entry")
    return field_from_spec(spec)


def _profile(cfg: dict) -> AngularProfile:
    """Profile from ``profile`` or from an angular field spec."""
    if "profile" in cfg:
        try:
            return AngularProfile.from_dict(cfg["profile"])
        except InvalidProfile:
            raise
        except (KeyError, TypeError, ValueError, AttributeError) as exc:
            raise ConfigError(f"bad profile: {exc}") from exc
    field = _field(cfg)
    if not isinstance(field, AngularField):
        raise ConfigError("this command needs an angular profile")
    return field.profile


def _get(cfg: dict, key: str, default, kind=float):
    val = cfg.get(key, default)
    try:
        if kind is list:
            return [float(v) for v in val]
        return kind(val)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key!r}: {val!r}") from exc


def _clean(obj):
    """JSON-safe copy: numpy scalars to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if np.isfinite(x) else repr(x)
    return obj


def write_report(out: Path, command: str, cfg: dict, seed: int, result: dict) -> Path:
    report = {
        "command": command,
        "config": cfg,
        "config_hash": config_hash(cfg),
        "seed": seed,
        "tolerances": tolerances(),
        "result": result,
    }
    path = out / "report.json"
    path.write_text(json.dumps(_clean(report), sort_keys=True, indent=2) + "\n")
    return path


def _write_rows(path: Path, header, rows) -> Path:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) for v in row])
    return path


def _mesh_for(field, h, cfg):
    cap = _get(cfg, "cap_radius", 0.0) if cfg.get("cap_radius") is not None else None
    # align mesh edges with the jump rays of a piecewise profile centered at the mesh center
    if (isinstance(field, AngularField) and not field.profile.is_smooth
            and tuple(field.center) == tuple(field.domain.center)):
        return fem_solver.build_mesh(field.domain, h, sectors=field.profile.n_sectors, cap_radius=cap)
    return fem_solver.build_mesh(field.domain, h, cap_radius=cap)


def _default_radii(R, h, n=24):
    return np.geomspace(max(h, 1e-3 * R), 0.9 * R, n)


# -- commands --------------------------------------------------------------------

def cmd_alpha(cfg, out, seed, threads):
    field = _field(cfg)
    report, table = alpha_bound.exponent_report(
        field,
        center_grid_n=_get(cfg, "center_grid_n", 17, int),
        radius_grid_n=_get(cfg, "radius_grid_n", 16, int),
        quad_n=_get(cfg, "quad_n", 128, int),
        sample_n=_get(cfg, "sample_n", 32, int),
        isotropic=bool(cfg.get("isotropic", False)),
        threads=threads,
    )
    _write_rows(out / "averages.csv", ["center_x", "center_y", "r", "average"], table.rows())
    return report.to_dict()


def cmd_wirtinger(cfg, out, seed, threads):
    a = _profile(cfg)
    n = _get(cfg, "n", 1024, int)
    C = _get(cfg, "C", 1.0)
    phi = _get(cfg, "phi", 0.0)
    const = wirtinger.wirtinger_constant(a)
    res = wirtinger.rayleigh_minimize(a, n)
    w = wirtinger.minimizer(a, C, phi, n)
    slack = wirtinger.check_inequality(a, w)
    mismatch, best_phase = wirtinger.minimizer_mismatch(a, res.minimizer)
    t = w.thetas
    _write_rows(out / "minimizer.csv", ["theta", "w_closed", "w_discrete"],
                zip(t, w.values, res.minimizer.values))
    return {
        "profile": a.to_dict(),
        "n": n,
        "constant": const,
        "discrete_constant": res.constant,
        "relative_error": abs(res.constant - const) / const,
        "iterations": res.iterations,
        "minimizer_quotient": wirtinger.quotient(a, w),
        "minimizer_slack": slack,
        "discrete_amplitude": res.amplitude,
        "discrete_phase": res.phase,
        "minimizer_mismatch": mismatch,
        "aligned_phase": best_phase,
    }


def _polar_samples(ex, out, n_rho=32, n_theta=64):
    rho = np.linspace(0.0, 1.0, n_rho + 1)[1:]
    th = np.arange(n_theta) * (TWO_PI / n_theta)
    rr, tt = np.meshgrid(rho, th, indexing="ij")
    u = ex.value(np.stack([rr * np.cos(tt), rr * np.sin(tt)], axis=-1))
    _write_rows(out / "solution_polar.csv", ["rho", "theta", "u"],
                zip(rr.ravel(), tt.ravel(), u.ravel()))


def cmd_sharp(cfg, out, seed, threads):
    k = _profile(cfg)
    h = _get(cfg, "h", 0.02)
    test_n = _get(cfg, "test_n", 8, int)
    rmin = _get(cfg, "fit_rmin", max(2.5 * h, 0.05))
    rmax = _get(cfg, "fit_rmax", 0.3)
    radii = np.asarray(_get(cfg, "radii", _default_radii(1.0, h).tolist(), list))
    ex = sharp_example.build(k)
    field = ex.field
    coeff_field.validate(field)
    ab = ex.alpha_bar

    resid = sharp_example.weak_residual(field, ex.solution, test_n)
    mesh = _mesh_for(field, h, cfg)
    sol = fem_solver.solve_dirichlet(field, mesh, ex.value)
    l2 = fem_solver.l2_error(sol, ex.value)

    tr_fem = holder_meter.energy_profile(field, sol, (0.0, 0.0), radii)
    tr_an = holder_meter.energy_profile(field, ex.solution, (0.0, 0.0), radii)
    fit_fem = holder_meter.fit_exponent(tr_fem, rmin=rmin, rmax=rmax)
    fit_an = holder_meter.fit_exponent(tr_an)

    _polar_samples(ex, out)
    fem_solver.write_mesh_csv(mesh, out)
    fem_solver.write_solution_csv(sol, out / "solution.csv")
    tr_fem.write_csv(out / "trace_fem.csv", ab)
    tr_an.write_csv(out / "trace_analytic.csv", ab)
    return {
        "profile": k.to_dict(),
        "alpha_bar": ab,
        "inverse_alpha_bar_max_formula": sharp_example.max_formula_inverse_alpha_bar(k),
        "weak_residual": resid,
        "fem": {"h": h, "n_vertices": mesh.n_vertices, "n_triangles": mesh.n_triangles,
                "relative_l2_error": l2, **sol.info},
        "fit_fem": {**fit_fem._asdict(), "rmin": rmin, "rmax": rmax,
                    "relative_error": abs(fit_fem.exponent - ab) / ab},
        "fit_analytic": {**fit_an._asdict(), "relative_error": abs(fit_an.exponent - ab) / ab},
        "monotonicity_analytic": holder_meter.monotonicity_check(tr_an, ab),
        "monotonicity_fem": holder_meter.monotonicity_check(tr_fem, ab),
        "monotonicity_fem_tolerance": holder_meter.fem_monotonicity_tolerance(tr_fem),
    }


def _boundary(cfg, field):
    bnd = cfg.get("boundary", {"kind": "coordinate"})
    if not isinstance(bnd, dict) or "kind" not in bnd:
        raise ConfigError("boundary must be an object with a 'kind'")
    kind = bnd["kind"]
    if kind not in ("coordinate", "harmonic-2theta", "exact-sharp"):
        raise ConfigError(f"unknown boundary kind {kind!r}")
    ex = None
    exact = None
    if kind == "exact-sharp":
        if not isinstance(field, AngularField) or tuple(field.center) != (0.0, 0.0) \
                or tuple(field.domain.center) != (0.0, 0.0) or field.domain.radius != 1.0:
            raise ConfigError("exact-sharp data needs an angular field centered in the unit disk")
        ex = sharp_example.build(field.profile)
        exact = ex.value
    elif isinstance(field, IdentityField):
        # both data sets are harmonic, so they are also the exact solutions
        exact = fem_solver.boundary_data(kind)
    return kind, fem_solver.boundary_data(kind, ex), exact, ex


def cmd_solve(cfg, out, seed, threads):
    field = _field(cfg)
    coeff_field.validate(field)
    h = _get(cfg, "h", 0.05)
    kind, g, exact, _ = _boundary(cfg, field)
    mesh = _mesh_for(field, h, cfg)
    sol = fem_solver.solve_dirichlet(field, mesh, g)
    fem_solver.write_mesh_csv(mesh, out)
    fem_solver.write_solution_csv(sol, out / "solution.csv")
    result = {"boundary": kind, "h": h, "n_vertices": mesh.n_vertices,
              "n_triangles": mesh.n_triangles, "energy": sol.energy(), **sol.info}
    if exact is not None:
        result["relative_l2_error"] = fem_solver.l2_error(sol, exact)
    return result


def cmd_measure(cfg, out, seed, threads):
    field = _field(cfg)
    coeff_field.validate(field)
    h = _get(cfg, "h", 0.02)
    kind, g, exact, ex = _boundary(cfg, field)
    source = cfg.get("source", "fem")
    center = _get(cfg, "center", field.domain.center, list)
    if len(center) != 2:
        raise ConfigError("center must have two coordinates")
    dist = float(field.domain.dist_to_boundary(np.asarray(center)))
    radii = np.asarray(_get(cfg, "radii", _default_radii(dist, h).tolist(), list))
    if source == "analytic":
        if ex is None:
            raise ConfigError("analytic measurement needs exact-sharp boundary data")
        u = ex.solution
    elif source == "fem":
        u = fem_solver.solve_dirichlet(field, _mesh_for(field, h, cfg), g)
    else:
        raise ConfigError(f"unknown source {source!r}")
    if "alpha" in cfg:
        alpha = _get(cfg, "alpha", 1.0)
    elif ex is not None:
        alpha = ex.alpha_bar
    else:
        alpha = alpha_bound.alpha_estimate(field, threads=threads)
    trace = holder_meter.energy_profile(field, u, center, radii)
    default_rmin = 2.5 * h if source == "fem" else None
    rmin = cfg.get("fit_rmin", default_rmin)
    rmax = cfg.get("fit_rmax")
    fit = holder_meter.fit_exponent(trace, rmin=rmin, rmax=rmax)
    trace.write_csv(out / "trace.csv", min(alpha, 1.0))
    compact_r = 0.5 * dist
    compact = coeff_field.DiskDomain(tuple(center), compact_r)
    result = {
        "source": source,
        "boundary": kind,
        "center": center,
        "alpha": alpha,
        "fit": {**fit._asdict(), "rmin": rmin, "rmax": rmax},
        "monotonicity": holder_meter.monotonicity_check(trace, min(alpha, 1.0)),
        "sampled_seminorm": holder_meter.pointwise_holder(
            u, compact, min(alpha, 1.0), _get(cfg, "sample_n", 200, int), seed=seed),
    }
    if source == "fem":
        result["monotonicity_tolerance"] = holder_meter.fem_monotonicity_tolerance(trace)
    return result


COMMANDS = {
    "alpha": cmd_alpha,
    "wirtinger": cmd_wirtinger,
    "sharp": cmd_sharp,
    "solve": cmd_solve,
    "measure": cmd_measure,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="sharpholder", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sp = sub.add_parser(name, help=fn.__name__.replace("cmd_", "") + " experiment")
        sp.add_argument("--config", required=True, help="JSON run config")
        sp.add_argument("--out", required=True, help="output directory")
        sp.add_argument("--seed", type=int, default=None, help="RNG seed (overrides config)")
        sp.add_argument("--threads", type=int, default=None, help="worker threads (overrides config)")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry; VALUE is parsed as JSON when possible")
    return p


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args.set)
        if args.seed is not None:
            cfg["seed"] = args.seed
        if args.threads is not None:
            cfg["threads"] = args.threads
        seed = _get(cfg, "seed", 0, int)
        if not 0 <= seed < 2 ** 64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        threads = max(1, _get(cfg, "threads", 1, int))
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        result = COMMANDS[args.command](cfg, out, seed, threads)
        write_report(out, args.command, cfg, seed, result)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, InvalidProfile, SharpHolderError, ValueError) as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    return 0


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
