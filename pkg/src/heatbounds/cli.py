"""Command-line orchestration: config parsing, suite execution, deterministic
seeding, and CSV/JSON export.

Config files are flat `key = value` text (hash comments allowed); every key
must appear in the published schema (--print-schema), unknown keys are
rejected before any computation.  Command-line flags override file values.
All randomness flows from the single master seed; results are independent
of the thread count.

Exit codes: 0 all PASS, 2 any INCONCLUSIVE, 1 any FAIL or error.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import conformal as cf
from . import fields as fl
from . import geometry as geo
from . import semigroup as sg
from . import stochastic as st
from . import verify as vf
from .errors import HeatboundsError, InvalidParameterError
from .report import exit_code, write_summary

SCHEMA = {
    "seed": ("int", "master RNG seed (all randomness derives from it)"),
    "threads": ("int", "worker count; results are independent of it"),
    "paths": ("int", "Monte Carlo paths per estimate"),
    "dt": ("float", "path-clock step h"),
    "horizon": ("float", "simulation horizon (path clock)"),
    "t": ("float", "semigroup time for heat/spectrum operations"),
    "grid": ("int", "grid resolution per axis"),
    "out": ("str", "output directory"),
    "format": ("str", "csv or json"),
    "domain": ("str", "interval | box | ball | ball_complement | half_space"),
    "a": ("float", "interval left end"),
    "b": ("float", "interval right end"),
    "lo": ("floats", "box lower corner, comma separated"),
    "hi": ("floats", "box upper corner, comma separated"),
    "center": ("floats", "ball center, comma separated"),
    "radius": ("float", "ball radius"),
    "axis": ("int", "half-space axis"),
    "level": ("float", "half-space level"),
    "dim": ("int", "ambient dimension"),
    "x0": ("floats", "start point / flow start"),
    "y0": ("floats", "second flow start for the contraction check"),
    "from": ("floats", "geodesic endpoint"),
    "to": ("floats", "geodesic endpoint"),
    "vertices": ("int", "geodesic vertex count"),
    "psi": ("str", "conformal weight spec, e.g. log_radial(0,0;1) or convexification(0.05)"),
    "k": ("str", "interior curvature field spec, e.g. const(0)"),
    "ell": ("str", "boundary curvature field spec"),
    "f": ("str", "data field spec, e.g. cos(1,1) or linear(0,1)"),
    "eps": ("float", "convexification epsilon"),
    "check": ("str", "verify subcommand target: check name or 'all'"),
    "cantor_j": ("int", "cantor construction depth"),
    "tolerance_scale": ("float", "scales discretization allowances"),
    "trace": ("int", "dump a full trace of this path index"),
}

_CHECKS_HELP = ", ".join(sorted(vf.SUITE))


def parse_config_file(path):
    values = {}
    with open(path) as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise InvalidParameterError(f"{path}:{lineno}: expected key = value")
            key, val = (part.strip() for part in line.split("=", 1))
            if key not in SCHEMA:
                raise InvalidParameterError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = val
    return values


def _coerce_config(values):
    out = {}
    for key, val in values.items():
        kind = SCHEMA[key][0]
        try:
            if kind == "int":
                out[key] = int(val)
            elif kind == "float":
                out[key] = float(val)
            elif kind == "floats":
                out[key] = [float(v) for v in str(val).split(",")]
            else:
                out[key] = str(val)
        except ValueError as err:
            raise InvalidParameterError(f"config key {key}: {err}") from None
    return out


def print_schema(stream=None):
    stream = stream or sys.stdout
    for key in sorted(SCHEMA):
        kind, help_text = SCHEMA[key]
        stream.write(f"{key:<18} {kind:<8} {help_text}\n")
    stream.write(f"\nverify checks: {_CHECKS_HELP}\n")


def build_domain(cfg):
    kind = cfg.get("domain", "interval")
    if kind == "interval":
        return geo.Interval(cfg.get("a", 0.0), cfg.get("b", math.pi))
    if kind == "box":
        lo = cfg.get("lo", [0.0, 0.0])
        hi = cfg.get("hi", [1.0, 1.0])
        return geo.Box(tuple(lo), tuple(hi))
    if kind == "ball":
        return geo.Ball(tuple(cfg.get("center", [0.0, 0.0])), cfg.get("radius", 1.0))
    if kind == "ball_complement":
        return geo.BallComplement(tuple(cfg.get("center", [0.0, 0.0])), cfg.get("radius", 1.0))
    if kind == "half_space":
        return geo.HalfSpace(cfg.get("axis", 0), cfg.get("level", 0.0), dim=cfg.get("dim", 2))
    raise InvalidParameterError(f"unknown domain kind {kind!r}")


def parse_field(spec, dim, domain=None, cfg=None):
    """Field mini-syntax: name(arg, arg, ...); see --print-schema examples."""
    spec = spec.strip()
    if "(" in spec:
        name, rest = spec.split("(", 1)
        if not rest.endswith(")"):
            raise InvalidParameterError(f"malformed field spec {spec!r}")
        args = [float(v) for part in rest[:-1].split(";") for v in part.split(",") if v != ""]
    else:
        name, args = spec, []
    name = name.strip().lower()
    if name == "const":
        return fl.Constant(args[0] if args else 0.0, dim=dim)
    if name == "linear":
        return fl.Linear(tuple(args[:dim]))
    if name == "sin":
        return fl.sine(axis=0, amp=args[0] if args else 1.0, freq=args[1] if len(args) > 1 else 1.0, dim=dim)
    if name == "cos":
        return fl.cosine(axis=0, amp=args[0] if args else 1.0, freq=args[1] if len(args) > 1 else 1.0, dim=dim)
    if name == "radial_poly":
        return fl.RadialPoly(tuple(args), (0.0,) * dim)
    if name == "log_radial":
        center = tuple(args[:dim]) if len(args) >= dim else (0.0,) * dim
        r0 = args[dim] if len(args) > dim else 1.0
        return fl.LogRadial(center, r0)
    if name == "convexification":
        if domain is None:
            raise InvalidParameterError("convexification weight needs a domain")
        eps = args[0] if args else (cfg or {}).get("eps", 0.05)
        ell = geo.boundary_curvature_bound(domain)
        return cf.convexification_weight(domain, ell, eps)
    if name == "cantor":
        j = int(args[0]) if args else 1
        return fl.cantor_field(j, dim=dim)
    raise InvalidParameterError(f"unknown field spec {spec!r}")


def _outdir(cfg):
    out = cfg.get("out", "heatbounds_out")
    os.makedirs(out, exist_ok=True)
    return out


def cmd_simulate(cfg):
    domain = build_domain(cfg)
    rng = st.RngSpec(cfg.get("seed", 0))
    x0 = cfg.get("x0", [0.0] * domain.dim)
    horizon = cfg.get("horizon", 1.0)
    h = cfg.get("dt", 1e-3)
    psi = None
    if "psi" in cfg:
        psi = parse_field(cfg["psi"], domain.dim, domain, cfg)
    out = _outdir(cfg)
    if "trace" in cfg:
        path = st.simulate_reflected(domain, x0, horizon, h, rng, psi=psi, path_index=cfg["trace"])
        dest = os.path.join(out, f"trace_{cfg['trace']}.csv")
        path.to_csv(dest)
        print(f"wrote {dest}")
        return 0
    stats = st.run_paths(
        domain, x0, horizon, h, rng, cfg.get("paths", 1000),
        psi=psi, threads=cfg.get("threads", 1),
    )
    dest = os.path.join(out, "paths.csv")
    cols = [stats.localtime] + [stats.final[:, i] for i in range(domain.dim)]
    names = ["L"] + [f"x{i+1}" for i in range(domain.dim)]
    if stats.m_psi is not None:
        cols.append(stats.m_psi)
        names.append("Mpsi")
    np.savetxt(dest, np.column_stack(cols), delimiter=",", header=",".join(names), comments="")
    mean_L, se_L = st._mean_se(stats.localtime)
    print(f"E[L_T] = {mean_L:.6f} +- {se_L:.6f} ({stats.n_paths} paths, {stats.n_rejected} rejected)")
    print(f"wrote {dest}")
    return 0


def cmd_geodesic(cfg):
    dim = cfg.get("dim", 2)
    domain = build_domain(cfg) if "domain" in cfg else None
    psi = parse_field(cfg.get("psi", "const(0)"), dim, domain, cfg)
    x = cfg["from"]
    y = cfg["to"]
    g = cf.geodesic(psi, x, y, n_vertices=cfg.get("vertices", 129))
    out = _outdir(cfg)
    dest = os.path.join(out, "geodesic.csv")
    g.to_csv(dest, domain=domain, psi=psi)
    print(f"conformal length = {cf.conformal_length(psi, g):.8f}")
    print(f"wrote {dest}")
    return 0


def cmd_flow(cfg):
    dim = cfg.get("dim", 2)
    V = parse_field(cfg.get("f", "radial_poly(0,0.5)"), dim)
    x0 = cfg.get("x0", [1.0] * dim)
    T = cfg.get("horizon", 1.0)
    dt = cfg.get("dt", 0.01)
    out = _outdir(cfg)
    if "y0" in cfg:
        ell = parse_field(cfg.get("ell", "const(0)"), dim)
        rep = cf.contraction_report(V, ell, x0, cfg["y0"], T, dt)
        dest = os.path.join(out, "contraction.json")
        with open(dest, "w") as fh:
            fh.write(rep.to_json())
        print(f"{rep.verdict}: worst slack {rep.slack:.3e}")
        print(f"wrote {dest}")
        return exit_code([rep])
    times, traj = cf.evi_flow(V, x0, T, dt)
    dest = os.path.join(out, "flow.csv")
    header = ",".join(["t"] + [f"x{i+1}" for i in range(dim)])
    np.savetxt(dest, np.column_stack([times, traj]), delimiter=",", header=header, comments="")
    print(f"wrote {dest}")
    return 0


def cmd_heat(cfg):
    domain = build_domain(cfg)
    t = cfg.get("t", 0.1)
    n = cfg.get("grid", 257)
    if isinstance(domain, geo.Interval):
        grid = sg.IntervalGrid(domain.a, domain.b, n)
    elif isinstance(domain, geo.Box):
        grid = sg.BoxGrid(domain.lo, domain.hi, (n, n))
    else:
        raise InvalidParameterError("heat subcommand supports interval and box domains")
    f = parse_field(cfg.get("f", "cos(1,1)"), domain.dim, domain, cfg)
    u = sg.neumann_heat(grid, f(grid.nodes()), t)
    out = _outdir(cfg)
    dest = os.path.join(out, "heat.csv")
    sg.GridFunction(grid, u).to_csv(dest)
    print(f"wrote {dest}")
    return 0


def cmd_spectrum(cfg):
    kind = cfg.get("domain", "disc" if "radius" in cfg else "interval")
    out = _outdir(cfg)
    if kind in ("disc", "ball"):
        r = cfg.get("radius", 0.5)
        rep = vf.check_spectral_gap(r, n_r=cfg.get("grid", 128), n_theta=2 * cfg.get("grid", 128))
        payload = {
            "lambda1": rep.lhs,
            "bound": rep.rhs,
            "bessel_reference": rep.details["bessel_reference"],
            "verdict": rep.verdict,
        }
        dest = os.path.join(out, "spectrum.json")
        with open(dest, "w") as fh:
            json.dump(payload, fh, indent=2, sort_keys=True)
        print(json.dumps(payload, indent=2, sort_keys=True))
        return exit_code([rep])
    if kind == "interval":
        grid = sg.IntervalGrid(cfg.get("a", 0.0), cfg.get("b", math.pi), cfg.get("grid", 513))
    elif kind == "box":
        lo = cfg.get("lo", [0.0, 0.0])
        hi = cfg.get("hi", [math.pi, math.pi])
        grid = sg.BoxGrid(tuple(lo), tuple(hi), (cfg.get("grid", 65),) * 2)
    else:
        raise InvalidParameterError(f"spectrum does not support domain {kind!r}")
    lam = sg.spectral_gap(grid)
    print(json.dumps({"lambda1": lam}, indent=2))
    return 0


def cmd_verify(cfg, names):
    params = vf.SuiteParams(
        paths=cfg.get("paths", 4000),
        dt=cfg.get("dt", 2e-3),
        threads=cfg.get("threads", 1),
    )
    reports = vf.run_suite(names or cfg.get("check", "all"), cfg.get("seed", 0), params)
    out = _outdir(cfg)
    for i, rep in enumerate(reports):
        with open(os.path.join(out, f"report_{rep.check}_{i}.json"), "w") as fh:
            fh.write(rep.to_json())
        fit = rep.details.get("growth_fit") if rep.details else None
        if fit:
            # plot-ready decay curve: exponential local-time moments vs time
            np.savetxt(
                os.path.join(out, f"decay_curve_{rep.check}_{i}.csv"),
                np.column_stack([fit["times"], fit["log_moments"]]),
                delimiter=",",
                header="t,log_moment",
                comments="",
            )
    write_summary(reports, os.path.join(out, "summary.csv"))
    for rep in reports:
        print(f"{rep.check:<24} {rep.verdict:<12} slack={rep.slack:.6g}")
    code = exit_code(reports)
    print(f"summary written to {os.path.join(out, 'summary.csv')} (exit {code})")
    return code


def cmd_cantor(cfg):
    j = cfg.get("cantor_j", 4)
    field, rep = vf.cantor_weight(j)
    out = _outdir(cfg)
    xs = np.linspace(0.0, 1.0, 4097)[:, None]
    dest = os.path.join(out, f"cantor_{j}.csv")
    np.savetxt(
        dest,
        np.column_stack([xs[:, 0], field(xs), field.grad(xs)[:, 0], field.laplacian(xs)]),
        delimiter=",",
        header="x,phi,dphi,ddphi",
        comments="",
    )
    with open(os.path.join(out, f"cantor_{j}.json"), "w") as fh:
        fh.write(rep.to_json())
    print(f"{rep.verdict}: {rep.details}")
    print(f"wrote {dest}")
    return exit_code([rep])


def main(argv=None):
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value config file")
    common.add_argument("--seed", type=int, help="master seed")
    common.add_argument("--threads", type=int, help="worker count (or HEATBOUNDS_THREADS)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--format", choices=("csv", "json"), help="preferred artifact format")
    common.add_argument("--paths", type=int, help="Monte Carlo paths")
    common.add_argument("--dt", type=float, help="time step")
    common.add_argument("--grid", type=int, help="grid resolution")
    common.add_argument("--tolerance-scale", type=float, dest="tolerance_scale")
    common.add_argument("--print-schema", action="store_true", help="print config schema and exit")
    common.add_argument("--dry-run", action="store_true", help="validate config without computing")

    parser = argparse.ArgumentParser(
        prog="heatbounds",
        description="Verification engine for boundary-curvature gradient bounds of Neumann heat flows.",
        parents=[common],
    )
    sub = parser.add_subparsers(dest="command")

    p_sim = sub.add_parser("simulate", parents=[common], help="reflected paths with local time")
    p_sim.add_argument("--domain")
    p_sim.add_argument("--radius", type=float)
    p_sim.add_argument("--x0")
    p_sim.add_argument("--horizon", type=float)
    p_sim.add_argument("--psi")
    p_sim.add_argument("--trace", type=int)

    p_geo = sub.add_parser("geodesic", parents=[common], help="conformal geodesic between two points")
    p_geo.add_argument("--psi")
    p_geo.add_argument("--from", dest="from_")
    p_geo.add_argument("--to")
    p_geo.add_argument("--vertices", type=int)
    p_geo.add_argument("--domain")
    p_geo.add_argument("--radius", type=float)

    p_flow = sub.add_parser("flow", parents=[common], help="gradient flow / contraction check")
    p_flow.add_argument("--f")
    p_flow.add_argument("--ell")
    p_flow.add_argument("--x0")
    p_flow.add_argument("--y0")
    p_flow.add_argument("--horizon", type=float)

    p_heat = sub.add_parser("heat", parents=[common], help="Neumann heat flow on a grid")
    p_heat.add_argument("--domain")
    p_heat.add_argument("--f")
    p_heat.add_argument("--time", type=float, dest="t", help="semigroup time")

    p_spec = sub.add_parser("spectrum", parents=[common], help="Neumann spectral gap")
    p_spec.add_argument("--domain")
    p_spec.add_argument("--radius", type=float)

    p_ver = sub.add_parser("verify", parents=[common], help="run named checks or 'all'")
    p_ver.add_argument("checks", nargs="*", default=["all"], help=_CHECKS_HELP)

    p_can = sub.add_parser("cantor", parents=[common], help="cantor-type weight construction report")
    p_can.add_argument("-j", "--cantor-j", type=int, dest="cantor_j")

    args = parser.parse_args(argv)
    if args.print_schema:
        print_schema()
        return 0

    cfg = {}
    try:
        if args.config:
            cfg.update(_coerce_config(parse_config_file(args.config)))
        overrides = {
            "seed": args.seed,
            "threads": args.threads,
            "out": args.out,
            "format": args.format,
            "paths": args.paths,
            "dt": args.dt,
            "grid": args.grid,
            "tolerance_scale": args.tolerance_scale,
        }
        for key in ("domain", "radius", "x0", "horizon", "psi", "trace", "to",
                    "vertices", "f", "ell", "y0", "t", "cantor_j"):
            if hasattr(args, key):
                overrides[key] = getattr(args, key)
        if hasattr(args, "from_"):
            overrides["from"] = args.from_
        for key, val in overrides.items():
            if val is not None:
                if key in SCHEMA and SCHEMA[key][0] == "floats" and isinstance(val, str):
                    val = [float(v) for v in val.split(",")]
                cfg[key] = val
        if args.threads is None and "threads" not in cfg:
            env = os.environ.get("HEATBOUNDS_THREADS")
            if env:
                cfg["threads"] = int(env)

        if args.dry_run:
            print("config ok:", json.dumps(cfg, sort_keys=True, default=str))
            return 0
        if args.command == "simulate":
            return cmd_simulate(cfg)
        if args.command == "geodesic":
            return cmd_geodesic(cfg)
        if args.command == "flow":
            return cmd_flow(cfg)
        if args.command == "heat":
            return cmd_heat(cfg)
        if args.command == "spectrum":
            return cmd_spectrum(cfg)
        if args.command == "verify":
            return cmd_verify(cfg, args.checks)
        if args.command == "cantor":
            return cmd_cantor(cfg)
        parser.print_help()
        return 0
    except HeatboundsError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
