"""Batch experiment driver.

Every module is exposed as a subcommand with a JSON configuration,
``--set key=value`` overrides, and deterministic report output.  Exit code 0
on success, 2 for a "not Zoll" verdict of ``zoll-check``, 1 on errors.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import __version__, curves, diagnostics, flow, geometry, kernels, orbits
from . import reportio, variational
from .errors import ConfigError, ContinuationLost, InconclusiveScan, MagzollError

_COMMANDS = ("simulate", "closed-orbit", "zoll-check", "dichotomy", "waist",
             "continue", "drift", "diagnostics")

_ALLOWED_KEYS = {
    "": {"surface", "lambda", "simulate", "orbit", "zoll", "dichotomy",
         "waist", "continue", "drift", "diagnostics"},
    "simulate": {"start", "t_span", "tol", "max_step"},
    "orbit": {"start", "horizon", "tol", "integ_tol", "loop_points"},
    "zoll": {"grid", "horizon", "tol", "return_tol", "integ_tol", "classify",
             "detail"},
    "dichotomy": {"length", "self_int", "f_min", "f_max", "eps", "n"},
    "waist": {"seed", "gtol", "max_iter", "tau_min", "probe_radius",
              "probe_count"},
    "continue": {"lambda_target", "steps", "max_drift", "sweep", "seed",
                 "gtol", "max_iter", "tau_min", "probe_radius", "probe_count"},
    "drift": {"e", "L", "lambda_sweep", "loops", "tol", "eps", "c"},
    "diagnostics": {"constants", "constant_curvature", "constant_f"},
}


def _validate_keys(cfg, section):
    allowed = _ALLOWED_KEYS[section]
    unknown = set(cfg) - allowed
    if unknown:
        where = section or "top level"
        raise ConfigError(f"unknown keys at {where}: {sorted(unknown)} "
                          f"(allowed: {sorted(allowed)})")


def _parse_set(items):
    out = {}
    for item in items or []:
        if "=" not in item:
            raise ConfigError(f"--set needs key=value, got {item!r}")
        key, raw = item.split("=", 1)
        try:
            val = json.loads(raw)
        except json.JSONDecodeError:
            val = raw
        out[key.strip()] = val
    return out


def _apply_overrides(cfg, overrides):
    for key, val in overrides.items():
        parts = key.split(".")
        node = cfg
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"--set path {key!r} crosses a non-object value")
        node[parts[-1]] = val
    return cfg


def load_config(path, overrides):
    cfg = {}
    if path:
        try:
            with open(path) as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON in {path}: {exc}")
    _apply_overrides(cfg, overrides)
    _validate_keys(cfg, "")
    return cfg


def _surface(cfg):
    sc = cfg.get("surface")
    if sc is None:
        raise ConfigError("missing 'surface' section")
    return geometry.surface_from_config(sc)


def _lam(cfg):
    lam = cfg.get("lambda")
    if lam is None:
        raise ConfigError("missing 'lambda'")
    return geometry.SurfaceParams(float(lam)).lam


def _start_state(surface, spec):
    if spec is None:
        raise ConfigError("missing start state")
    q = spec.get("q")
    if q is None:
        raise ConfigError("start needs 'q': [x, y]")
    if "angle" in spec:
        return surface.state_from_angle(q, float(spec["angle"]))
    if "v" in spec:
        return surface.unit_state(q, spec["v"])
    raise ConfigError("start needs 'angle' or 'v'")


def _report_base(cfg, seed):
    return {"config": cfg, "version": __version__,
            "kernel": kernels.default_backend(), "seed": seed}


# ----------------------------------------------------------------------
# subcommands


def _cmd_simulate(cfg, out, args):
    sub = cfg.get("simulate", {})
    _validate_keys(sub, "simulate")
    surface = _surface(cfg)
    lam = _lam(cfg)
    start = _start_state(surface, sub.get("start"))
    t_span = sub.get("t_span", [0.0, 10.0])
    traj = flow.integrate(surface, lam, start, (float(t_span[0]), float(t_span[1])),
                          tol=float(sub.get("tol", flow.DEFAULT_TOL)),
                          max_step=sub.get("max_step"))
    traj.to_csv(os.path.join(out, "trajectory.csv"))
    report = _report_base(cfg, args.seed)
    report["samples"] = len(traj)
    report["t_final"] = traj.t1
    report["q_final"] = traj.qs[-1].tolist()
    report["step_stats"] = {"max_step": traj.step_stats.max_step,
                            "min_step": traj.step_stats.min_step,
                            "max_unit_deviation": traj.step_stats.max_unit_deviation}
    reportio.write_json(os.path.join(out, "simulate.json"), report)
    if args.svg:
        reportio.write_svg_polylines(os.path.join(out, "trajectory.svg"), [traj.qs])
    return 0


def _cmd_closed_orbit(cfg, out, args):
    sub = cfg.get("orbit", {})
    _validate_keys(sub, "orbit")
    surface = _surface(cfg)
    lam = _lam(cfg)
    start = _start_state(surface, sub.get("start"))
    horizon = sub.get("horizon")
    if horizon is None:
        horizon = orbits.default_horizon(surface, lam, start.q)
    kw = {}
    if sub.get("loop_points"):
        kw["loop_points"] = int(sub["loop_points"])
    orb = orbits.find_closed_orbit(surface, lam, start, float(horizon),
                                   tol=float(sub.get("tol", orbits.DEFAULT_RETURN_TOL)),
                                   integ_tol=float(sub.get("integ_tol", flow.DEFAULT_TOL)),
                                   **kw)
    report = _report_base(cfg, args.seed)
    report["found"] = orb is not None
    if orb is not None:
        report["orbit"] = orb.to_json_dict()
        if args.svg:
            reportio.write_svg_polylines(os.path.join(out, "orbit.svg"),
                                         [orb.loop.closed_points(surface)])
    reportio.write_json(os.path.join(out, "closed_orbit.json"), report)
    return 0


def _cmd_zoll(cfg, out, args):
    sub = cfg.get("zoll", {})
    _validate_keys(sub, "zoll")
    surface = _surface(cfg)
    lam = _lam(cfg)
    grid = tuple(sub.get("grid", (12, 12, 8)))
    try:
        rep = orbits.zoll_check(
            surface, lam, grid=grid, horizon=sub.get("horizon"),
            tol=float(sub.get("tol", 1e-6)),
            return_tol=float(sub.get("return_tol", orbits.DEFAULT_RETURN_TOL)),
            integ_tol=float(sub.get("integ_tol", flow.DEFAULT_TOL)),
            jobs=args.jobs, with_orbits=True)
    except InconclusiveScan as exc:
        report = _report_base(cfg, args.seed)
        report["verdict"] = "inconclusive"
        report["zoll"] = exc.report.to_json_dict() if exc.report else None
        reportio.write_json(os.path.join(out, "zoll.json"), report)
        print("inconclusive: horizon exhausted while still approaching closure",
              file=sys.stderr)
        return 1
    report = _report_base(cfg, args.seed)
    report["verdict"] = "zoll" if rep.is_zoll else "not-zoll"
    report["zoll"] = rep.to_json_dict()
    reportio.write_json(os.path.join(out, "zoll.json"), report)
    # orbit table: full detail (length, self-intersections, class) is computed
    # for the first `detail` starts; other rows repeat the period as the
    # length (unit-speed parametrization) and leave the rest blank
    detail = int(sub.get("detail", 0))
    classify = sub.get("classify")
    rows = []
    for i, ((q, ang), period) in enumerate(rep.orbits):
        if i < detail:
            start = surface.state_from_angle(q, ang)
            orb = orbits.find_closed_orbit(
                surface, lam, start, horizon=4 * period,
                tol=float(sub.get("return_tol", orbits.DEFAULT_RETURN_TOL)))
            cls = ""
            if orb is not None and classify:
                cls = orbits.classify_dichotomy(
                    orb, lam, float(classify["f_min"]), float(classify["f_max"]),
                    float(classify["eps"]), int(classify["n"])).value
            if orb is not None:
                rows.append((q[0], q[1], ang, orb.period, orb.length,
                             orb.self_int, cls))
                continue
        rows.append((q[0], q[1], ang, period, period, "", ""))
    reportio.write_csv(os.path.join(out, "orbits.csv"),
                       ["start_x", "start_y", "dir_angle", "period", "length",
                        "self_int", "class"], rows)
    print(f"is_zoll: {rep.is_zoll}" + (
        f", common_period: {rep.common_period:.9f}" if rep.common_period else ""))
    return 0 if rep.is_zoll else 2


def _cmd_dichotomy(cfg, out, args):
    sub = cfg.get("dichotomy", {})
    _validate_keys(sub, "dichotomy")
    lam = _lam(cfg)
    for key in ("length", "self_int", "f_min", "f_max", "eps", "n"):
        if key not in sub:
            raise ConfigError(f"dichotomy needs '{key}'")
    loop = variational.seed_circle((0.0, 0.0), sub["length"] / (2 * math.pi), n=64)
    orb = orbits.ClosedOrbit(loop, sub["length"], float(sub["length"]),
                             int(sub["self_int"]), None, None, None, lam)
    cls = orbits.classify_dichotomy(orb, lam, float(sub["f_min"]), float(sub["f_max"]),
                                    float(sub["eps"]), int(sub["n"]))
    report = _report_base(cfg, args.seed)
    report["class"] = cls.value
    reportio.write_json(os.path.join(out, "dichotomy.json"), report)
    print(cls.value)
    return 0


def _action_breakdown(loop, surface, lam):
    av = variational.action(loop, surface, lam)
    return {"value": av.value, "kinetic": av.kinetic, "magnetic": av.magnetic,
            "period_term": av.period_term}


def _waist_opts(sub, seed):
    return variational.WaistOptions(
        gtol=float(sub.get("gtol", 1e-8)),
        max_iter=int(sub.get("max_iter", 20000)),
        tau_min=float(sub.get("tau_min", 1e-4)),
        probe_radius=float(sub.get("probe_radius", 1e-2)),
        probe_count=int(sub.get("probe_count", 16)),
        seed=seed,
    )


def _cmd_waist(cfg, out, args):
    sub = cfg.get("waist", {})
    _validate_keys(sub, "waist")
    surface = _surface(cfg)
    lam = _lam(cfg)
    seed_loop = variational.seed_from_spec(surface, sub.get("seed", {}))
    res = variational.descend(surface, lam, seed_loop, _waist_opts(sub, args.seed))
    report = _report_base(cfg, args.seed)
    report["status"] = res.status
    report["iterations"] = res.iterations
    if res.waist is not None:
        report["waist"] = res.waist.to_json_dict()
        report["waist"]["action_breakdown"] = _action_breakdown(
            res.waist.loop, surface, lam)
        if args.svg:
            reportio.write_svg_polylines(os.path.join(out, "waist.svg"),
                                         [res.waist.loop.closed_points(surface)])
    reportio.write_json(os.path.join(out, "waist.json"), report)
    print(f"waist: {res.status}" + (
        f", length {res.waist.length:.9f}" if res.waist else ""))
    return 0 if res.status == "converged" else 1


def _cmd_continue(cfg, out, args):
    sub = cfg.get("continue", {})
    _validate_keys(sub, "continue")
    surface = _surface(cfg)
    seed_loop = variational.seed_from_spec(surface, sub.get("seed", {}))
    opts = _waist_opts(sub, args.seed)
    base = variational.descend(surface, 0.0, seed_loop, opts)
    report = _report_base(cfg, args.seed)
    if base.waist is None:
        report["status"] = f"seed-{base.status}"
        reportio.write_json(os.path.join(out, "continue.json"), report)
        return 1
    lam_target = float(sub.get("lambda_target", 0.0))
    steps = int(sub.get("steps", 10))
    max_drift = float(sub.get("max_drift", 1.0))
    if sub.get("sweep"):
        waist, reached = variational.continuation_sweep(
            surface, base.waist, lam_target, steps, opts, max_drift)
        report["status"] = "sweep"
        report["lambda_reached"] = reached
        report["waist"] = waist.to_json_dict()
        report["waist"]["action_breakdown"] = _action_breakdown(
            waist.loop, surface, waist.lam)
        reportio.write_json(os.path.join(out, "continue.json"), report)
        print(f"continuation sweep reached lambda {reached:g}")
        return 0
    try:
        waist = variational.continue_waist(surface, base.waist, lam_target,
                                           steps, opts, max_drift)
    except ContinuationLost as exc:
        report["status"] = "lost"
        report["lambda_reached"] = exc.lam_reached
        reportio.write_json(os.path.join(out, "continue.json"), report)
        print(f"continuation lost; reached lambda {exc.lam_reached:g}",
              file=sys.stderr)
        return 1
    report["status"] = "continued"
    report["waist"] = waist.to_json_dict()
    report["waist"]["action_breakdown"] = _action_breakdown(
        waist.loop, surface, waist.lam)
    reportio.write_json(os.path.join(out, "continue.json"), report)
    print(f"continued to lambda {lam_target:g}, length {waist.length:.9f}")
    return 0


def _cmd_drift(cfg, out, args):
    sub = cfg.get("drift", {})
    _validate_keys(sub, "drift")
    e = float(sub.get("e", 1.0))
    L = float(sub.get("L", 1.0))
    loops = int(sub.get("loops", 50))
    tol = float(sub.get("tol", flow.DEFAULT_TOL))
    c = float(sub.get("c", 2.0))
    lams = sub.get("lambda_sweep")
    if lams is None:
        lams = [_lam(cfg)]
    rows = []
    results = []
    for lam in lams:
        lam = float(lam)
        m = diagnostics.measure_drift(lam, e, L, n_loops=loops, tol=tol)
        b = diagnostics.drift_bound(diagnostics.DriftSetup(e, L, lam,
                                                           float(sub.get("eps", 0.0))), c)
        ratio = m.dx_per_loop / b.bound if b.bound > 0 else math.inf
        rows.append((lam, m.dx_per_loop, b.bound, ratio))
        results.append({"lambda": lam, "measured_dx": m.dx_per_loop,
                        "bound_2delta": b.bound, "ratio": ratio,
                        "radii": {"r_lam": b.r_lam, "r0": b.r0, "r1": b.r1, "r2": b.r2},
                        "c_sensitivity": b.sensitivity})
        print(f"lambda={lam:g}: measured_dx={m.dx_per_loop:.7g} "
              f"bound_2delta={b.bound:.7g}")
    reportio.write_csv(os.path.join(out, "drift.csv"),
                       ["lambda", "measured_dx", "bound_2delta", "ratio"], rows)
    report = _report_base(cfg, args.seed)
    report["results"] = results
    reportio.write_json(os.path.join(out, "drift.json"), report)
    return 0


def _cmd_diagnostics(cfg, out, args):
    sub = cfg.get("diagnostics", {})
    _validate_keys(sub, "diagnostics")
    lam = _lam(cfg)
    if "constants" in sub:
        cc = sub["constants"]
        consts = diagnostics.SystemConstants.from_values(
            cc["area"], cc["euler"], cc["f_total"])
    else:
        consts = diagnostics.SystemConstants.from_surface(_surface(cfg))
    report = _report_base(cfg, args.seed)
    report["constants"] = {"area": consts.area, "euler": consts.euler,
                           "f_total": consts.f_total, "f_avg": consts.f_avg}
    report["avg_magnetic_curvature"] = diagnostics.avg_magnetic_curvature(consts, lam)
    out_vals = {}
    try:
        out_vals["helicity"] = diagnostics.helicity(consts, lam)
        out_vals["lambda_zero"] = diagnostics.lambda_zero(consts)
    except MagzollError as exc:
        out_vals["helicity_error"] = str(exc)
    try:
        out_vals["systolic_value"] = diagnostics.systolic_value(consts, lam)
        out_vals["systolic_value_literal"] = diagnostics.systolic_value_literal(consts, lam)
    except MagzollError as exc:
        out_vals["systolic_error"] = str(exc)
    try:
        est = diagnostics.mane_h(consts,
                                 sub.get("constant_curvature"), sub.get("constant_f"))
        out_vals["mane_h"] = est.value
        out_vals["mane_h_exact"] = est.exact
    except MagzollError as exc:
        out_vals["mane_error"] = str(exc)
    report.update(out_vals)
    reportio.write_json(os.path.join(out, "diagnostics.json"), report)
    for k, v in sorted(out_vals.items()):
        print(f"{k}: {v}")
    return 0


_HANDLERS = {
    "simulate": _cmd_simulate,
    "closed-orbit": _cmd_closed_orbit,
    "zoll-check": _cmd_zoll,
    "dichotomy": _cmd_dichotomy,
    "waist": _cmd_waist,
    "continue": _cmd_continue,
    "drift": _cmd_drift,
    "diagnostics": _cmd_diagnostics,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="magzoll",
        description="Magnetic geodesic flow laboratory: integrate, detect closed "
                    "orbits, certify the common-period property, find waists, "
                    "and evaluate drift diagnostics.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON configuration file")
        p.add_argument("--set", action="append", metavar="KEY=VALUE",
                       help="override a config entry (dotted keys, JSON values)")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--svg", action="store_true", help="emit SVG plots")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for randomized probes/sampling")
        p.add_argument("--jobs", type=int,
                       default=int(os.environ.get("MAGZOLL_JOBS", "1")),
                       help="worker count for grid sweeps")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _parse_set(args.set))
        out = reportio.ensure_outdir(args.out)
        np.random.seed(args.seed % (2**32))
        return _HANDLERS[args.command](cfg, out, args)
    except MagzollError as exc:
        print(f"error [{type(exc).__name__}]: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
