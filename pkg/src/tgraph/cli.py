"""Command-line driver: config parsing, subcommands, SVG/JSON/CSV output.

Config files are plain key = value lines under [section] headers; exact
rational angles are written as fractions of pi ("2/3 pi").  All randomized
subcommands are reproducible from (config, seed).

Exit codes: 2 usage error, 3 invalid config, 4 degenerate graph.
"""

from __future__ import annotations

import argparse
import cmath
import json
import math
import os
import sys
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from . import analysis, geometry, kernel, periodic, walk
from .construction import (
    DegenerateGraphError,
    Params,
    TGraphWindow,
    Triangle,
    build_window,
    classify_degeneracy,
    genericity_margin,
)
from .lattice import black


class ConfigError(Exception):
    pass


@dataclass
class Config:
    params: Params
    radius: int
    seed: int
    out_dir: str
    path: str
    tolerances: dict = None  # optional per-run overrides


def _parse_fraction_pi(text: str, lineno: int) -> Fraction:
    t = text.strip()
    if not t.endswith("pi"):
        raise ConfigError(f"line {lineno}: expected a fraction of pi, got {text!r}")
    t = t[:-2].strip()
    try:
        return Fraction(t) if "/" in t else Fraction(int(t))
    except (ValueError, ZeroDivisionError) as exc:
        raise ConfigError(f"line {lineno}: bad fraction {text!r}: {exc}") from None


def _read_sections(path: str):
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from None
    for lineno, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip().lower()
            sections.setdefault(current, {})
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key = value, got {raw!r}")
        if current is None:
            raise ConfigError(f"line {lineno}: key outside any [section]")
        key, val = (s.strip() for s in line.split("=", 1))
        sections[current][key.lower()] = (val, lineno)
    return sections


def parse_config(path: str) -> Config:
    sec = _read_sections(path)
    tri_sec = sec.get("triangle", {})
    if "angles" in tri_sec:
        val, lineno = tri_sec["angles"]
        fracs = [_parse_fraction_pi(part, lineno) for part in val.split(",")]
        try:
            triangle = Triangle.from_angles(fracs)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    elif "angles_rad" in tri_sec:
        val, lineno = tri_sec["angles_rad"]
        try:
            triangle = Triangle.from_angles([float(p) for p in val.split(",")])
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    elif "sides" in tri_sec:
        val, lineno = tri_sec["sides"]
        try:
            zs = [complex(part.strip().replace(" ", "")) for part in val.split(",")]
            triangle = Triangle.from_sides(*zs)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: {exc}") from None
    else:
        raise ConfigError("[triangle] needs 'angles', 'angles_rad' or 'sides'")

    lam_sec = sec.get("lambda", {})
    if "angle" in lam_sec:
        val, lineno = lam_sec["angle"]
        try:
            lam = cmath.exp(1j * float(val))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad lambda angle: {exc}") from None
    elif "seed" in lam_sec:
        val, lineno = lam_sec["seed"]
        try:
            rng = np.random.default_rng(int(val))
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad lambda seed: {exc}") from None
        lam = cmath.exp(2j * math.pi * rng.random())
    else:
        raise ConfigError("[lambda] needs 'angle' or 'seed'")

    win_sec = sec.get("window", {})
    radius = 20
    if "radius" in win_sec:
        val, lineno = win_sec["radius"]
        try:
            radius = int(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad radius {val!r}") from None
        if radius < 2:
            raise ConfigError(f"line {lineno}: radius must be >= 2")

    run_sec = sec.get("run", {})
    seed = 0
    if "seed" in run_sec:
        val, lineno = run_sec["seed"]
        try:
            seed = int(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad seed {val!r}") from None
    out_dir = run_sec.get("out_dir", (os.environ.get("TGRAPH_OUT_DIR", "."), 0))[0]

    tolerances = {}
    for key, (val, lineno) in sec.get("tolerances", {}).items():
        try:
            tolerances[key] = float(val)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad tolerance {key} = {val!r}") from None

    return Config(
        params=Params(triangle, lam),
        radius=radius,
        seed=seed,
        out_dir=out_dir,
        path=path,
        tolerances=tolerances,
    )


# ---------------------------------------------------------------------------
# rendering


def window_svg(
    window: TGraphWindow,
    cut: Optional[kernel.HalfLine] = None,
    walk_points: Optional[list] = None,
) -> str:
    """SVG with one filled polygon per white face and one line per segment."""
    pts = window._psi
    x0, x1 = float(pts.real.min()), float(pts.real.max())
    y0, y1 = float(pts.imag.min()), float(pts.imag.max())
    pad = 0.05 * max(x1 - x0, y1 - y0)
    out = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'viewBox="{x0 - pad:.3f} {-(y1 + pad):.3f} {x1 - x0 + 2 * pad:.3f} {y1 - y0 + 2 * pad:.3f}">'
    ]
    out.append('<g stroke="none">')
    for face in window.faces.values():
        col = "#a8c4e0" if face.scale > 0 else "#e8b49a"
        coords = " ".join(f"{v.real:.4f},{-v.imag:.4f}" for v in face.vertices)
        out.append(f'<polygon points="{coords}" fill="{col}"/>')
    out.append("</g>")
    out.append('<g stroke="black" stroke-width="0.02">')
    for seg in window.segments.values():
        out.append(
            f'<line x1="{seg.p1.real:.4f}" y1="{-seg.p1.imag:.4f}" '
            f'x2="{seg.p2.real:.4f}" y2="{-seg.p2.imag:.4f}"/>'
        )
    out.append("</g>")
    if cut is not None and cut.origin is not None:
        far = cut.origin + cmath.exp(1j * cut.angle) * 4 * (x1 - x0)
        out.append(
            f'<line x1="{cut.origin.real:.4f}" y1="{-cut.origin.imag:.4f}" '
            f'x2="{far.real:.4f}" y2="{-far.imag:.4f}" stroke="#c03030" '
            'stroke-width="0.04" stroke-dasharray="0.2 0.1"/>'
        )
    if walk_points:
        coords = " ".join(f"{z.real:.4f},{-z.imag:.4f}" for z in walk_points)
        out.append(
            f'<polyline points="{coords}" fill="none" stroke="#206020" stroke-width="0.05"/>'
        )
    out.append("</svg>")
    return "\n".join(out)


def _write(cfg: Config, name: str, text: str) -> str:
    os.makedirs(cfg.out_dir, exist_ok=True)
    path = os.path.join(cfg.out_dir, name)
    with open(path, "w") as fh:
        fh.write(text)
    return path


def _dump_json(cfg: Config, name: str, obj) -> str:
    return _write(cfg, name, json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(cfg: Config, args) -> int:
    window = build_window(cfg.params, cfg.radius)
    svg = window_svg(window)
    path = _write(cfg, "window.svg", svg)
    report = {
        "radius": cfg.radius,
        "faces": len(window.faces),
        "segments": len(window.segments),
        "genericity_margin": genericity_margin(cfg.params, cfg.radius),
        "sup_psi_minus_ell": window.sup_psi_minus_ell(),
        "min_segment_length": window.min_segment_length(),
        "svg": os.path.basename(path),
    }
    _dump_json(cfg, "window.json", report)
    print(f"wrote {path}")
    return 0


def cmd_render(cfg: Config, args) -> int:
    window = build_window(cfg.params, cfg.radius)
    overlay = None
    if args.overlay_walk:
        traj = walk.simulate(cfg.params, black(0, 0), args.horizon, cfg.seed)
        overlay = [st.position for st in traj.states]
    svg = window_svg(window, walk_points=overlay)
    path = _write(cfg, "render.svg", svg)
    print(f"wrote {path}")
    return 0


def cmd_validate(cfg: Config, args) -> int:
    tol = cfg.tolerances or {}
    window = build_window(cfg.params, cfg.radius)
    tiling = geometry.validate_tiling(window, args.samples, cfg.seed)
    segs = geometry.validate_segments(
        window, tol=tol.get("intersection", geometry.INTERSECT_TOL)
    )
    deg = classify_degeneracy(window, tol.get("degeneracy_eps", 1e-6))
    report = {
        "tiling_ok": tiling.ok,
        "tiling_violations": len(tiling.violations),
        "segments_ok": segs.ok,
        "segment_intersections": len(segs.intersections),
        "bad_vertices": len(segs.bad_vertices),
        "min_segment_length": segs.min_length,
        "almost_degenerate_faces": len(deg.eps_almost_faces),
        "almost_degenerate_segments": len(deg.eps_almost_segments),
        "sup_psi_minus_ell": window.sup_psi_minus_ell(),
    }
    _dump_json(cfg, "validate.json", report)
    ok = tiling.ok and segs.ok
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if ok else 1


def cmd_walk(cfg: Config, args) -> int:
    traj = walk.simulate(cfg.params, black(0, 0), args.horizon, cfg.seed)
    path = os.path.join(cfg.out_dir, "trajectory.csv")
    os.makedirs(cfg.out_dir, exist_ok=True)
    traj.to_csv(path)
    print(f"wrote {path} ({len(traj.jump_times)} jumps)")
    return 0


def cmd_cov(cfg: Config, args) -> int:
    est = analysis.empirical_covariance(
        cfg.params, black(0, 0), args.n_walks, args.horizon, cfg.seed
    )
    iso = analysis.isotropy_test(est)
    report = {
        "M": est.M.tolist(),
        "stderr": est.stderr.tolist(),
        "n_walks": est.n_walks,
        "horizon": est.n_steps,
        "diag_ratio": iso.diag_ratio,
        "offdiag_ratio": iso.offdiag_ratio,
        "diag_se": iso.diag_se,
        "offdiag_se": iso.offdiag_se,
        "isotropy_passed": iso.passed,
    }
    _dump_json(cfg, "covariance.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_ellipticity(cfg: Config, args) -> int:
    dirs = [cmath.exp(1j * math.pi * k / args.directions) for k in range(args.directions)]
    window = build_window(cfg.params, max(8, cfg.radius // 2))
    starts = sorted(window.segments.keys(), key=lambda b: (abs(b.m) + abs(b.n), b.m, b.n))
    starts = starts[: args.starts]
    scan = analysis.ellipticity_scan(cfg.params, dirs, starts, args.n_samples, cfg.seed)
    report = {
        "min_var": scan.min_var,
        "min_var_minus_3se": scan.min_var_minus_3se,
        "max_var": scan.max_var,
        "max_var_plus_3se": scan.max_var_plus_3se,
        "n_directions": len(dirs),
        "n_starts": len(starts),
        "n_samples": args.n_samples,
    }
    _dump_json(cfg, "ellipticity.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_dirichlet(cfg: Config, args) -> int:
    disc = analysis.Disc(0, 1.0)
    f = lambda z: z.real ** 2 - z.imag ** 2
    probes = [0.05 + 0.1j, -0.3 + 0.2j, 0.25 - 0.25j]
    n_list = [int(s) for s in args.scales.split(",")]
    rows = analysis.dirichlet_convergence(cfg.params, disc, f, n_list, probes)
    lines = ["n,max_error"] + [f"{r.n},{r.max_error!r}" for r in rows]
    _write(cfg, "dirichlet.csv", "\n".join(lines) + "\n")
    report = {str(r.n): r.max_error for r in rows}
    _dump_json(cfg, "dirichlet.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_kernel(cfg: Config, args) -> int:
    from .lattice import white

    kw = kernel.kinv_exact(white(0, 0), cfg.params, args.box_radius)
    lines = ["m,n,value"]
    for b, v in sorted(kw.values.items(), key=lambda kv: (kv[0].m, kv[0].n)):
        lines.append(f"{b.m},{b.n},{v!r}")
    _write(cfg, "kernel.csv", "\n".join(lines) + "\n")
    report = {
        "box_radius": kw.box_radius,
        "interior_residual": kw.interior_residual,
        "truncation_estimate": kw.truncation_estimate,
    }
    _dump_json(cfg, "kernel.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_gstar(cfg: Config, args) -> int:
    from .lattice import white

    window = build_window(cfg.params, cfg.radius)
    kw = kernel.kinv_exact(white(0, 0), cfg.params, cfg.radius)
    fld = kernel.gstar_build(window, white(0, 0), kernel.HalfLine(angle=math.pi / 2), kw)
    dev = kernel.gstar_asymptotic_check(fld, cfg.params)
    lines = ["m,n,value"]
    for b, v in sorted(fld.values.items(), key=lambda kv: (kv[0].m, kv[0].n)):
        lines.append(f"{b.m},{b.n},{v!r}")
    _write(cfg, "gstar.csv", "\n".join(lines) + "\n")
    report = {
        "closure_max": fld.closure_max,
        "kernel_tolerance": fld.kernel_tolerance,
        "c_fitted": dev.c_fitted,
        "c_formula": dev.c_formula,
        "sup_deviation": dev.sup_deviation,
        "max_dev_times_r": dev.max_dev_times_r,
    }
    _dump_json(cfg, "gstar.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def cmd_periodic(cfg: Config, args) -> int:
    period = periodic.detect_period(cfg.params.triangle)
    if period is None:
        print("triangle is not periodic (no exact rational angles)", file=sys.stderr)
        return 1
    chain = periodic.quotient_chain(cfg.params, period)
    pi_m = periodic.stationary(chain)
    reg = periodic.regeneration_clt(cfg.params, black(0, 0), args.n_blocks, cfg.seed)
    lines = ["state,probability"] + [
        f"{i},{v!r}" for i, v in enumerate(pi_m.probabilities)
    ]
    _write(cfg, "stationary.csv", "\n".join(lines) + "\n")
    report = {
        "period": list(period),
        "n_states": chain.n_states,
        "stationary_residual": pi_m.residual,
        "density_l2": periodic.density_diagnostic(pi_m, chain),
        "regeneration_M": reg.estimate.M.tolist(),
        "regeneration_stderr": reg.estimate.stderr.tolist(),
        "mean_block_duration": float(reg.durations.mean()),
    }
    _dump_json(cfg, "periodic.json", report)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="tgraph", description="T-graph construction and random-walk diagnostics"
    )
    parser.add_argument("--seed", type=int, default=None, help="override [run] seed")
    parser.add_argument("--radius", type=int, default=None, help="override window radius")
    parser.add_argument("--out-dir", default=None, help="override output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("build", help="build a window and render it")
    sp.set_defaults(func=cmd_build)
    sp.add_argument("config")

    sp = sub.add_parser("render", help="render a window (optionally with a walk)")
    sp.set_defaults(func=cmd_render)
    sp.add_argument("config")
    sp.add_argument("--overlay-walk", action="store_true")
    sp.add_argument("--horizon", type=float, default=50.0)

    sp = sub.add_parser("validate", help="geometric validation reports")
    sp.set_defaults(func=cmd_validate)
    sp.add_argument("config")
    sp.add_argument("--samples", type=int, default=10000)

    sp = sub.add_parser("walk", help="simulate a trajectory to CSV")
    sp.set_defaults(func=cmd_walk)
    sp.add_argument("config")
    sp.add_argument("--horizon", type=float, default=100.0)

    sp = sub.add_parser("cov", help="empirical covariance and isotropy")
    sp.set_defaults(func=cmd_cov)
    sp.add_argument("config")
    sp.add_argument("--n-walks", type=int, default=2000)
    sp.add_argument("--horizon", type=float, default=1000.0)

    sp = sub.add_parser("ellipticity", help="directional variance scan")
    sp.set_defaults(func=cmd_ellipticity)
    sp.add_argument("config")
    sp.add_argument("--directions", type=int, default=16)
    sp.add_argument("--starts", type=int, default=20)
    sp.add_argument("--n-samples", type=int, default=1000)

    sp = sub.add_parser("dirichlet", help="Dirichlet convergence table")
    sp.set_defaults(func=cmd_dirichlet)
    sp.add_argument("config")
    sp.add_argument("--scales", default="10,20,40")

    sp = sub.add_parser("kernel", help="inverse kernel on a box")
    sp.set_defaults(func=cmd_kernel)
    sp.add_argument("config")
    sp.add_argument("--box-radius", type=int, default=20)

    sp = sub.add_parser("gstar", help="build the quasi-harmonic function")
    sp.set_defaults(func=cmd_gstar)
    sp.add_argument("config")

    sp = sub.add_parser("periodic", help="quotient chain diagnostics")
    sp.set_defaults(func=cmd_periodic)
    sp.add_argument("config")
    sp.add_argument("--n-blocks", type=int, default=2000)

    args = parser.parse_args(argv)
    try:
        cfg = parse_config(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 3
    if args.seed is not None:
        cfg.seed = args.seed
    if args.radius is not None:
        cfg.radius = args.radius
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    try:
        return args.func(cfg, args)
    except DegenerateGraphError as exc:
        print(f"degenerate graph: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
