"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -s` to see the lines as they
complete; the statistical criteria use fixed seeds and the stated sample
sizes, so every run is reproducible.
"""

import cmath
import math
import time

import numpy as np

from tgraph.analysis import (
    Disc,
    covariance_zscores,
    dirichlet_convergence,
    dirichlet_solve,
    ellipticity_scan,
    empirical_covariance,
    isotropy_test,
)
from tgraph.construction import (
    Params,
    Triangle,
    build_window,
    rotate_lambda,
)
from tgraph.geometry import pseudo_distance, validate_segments, validate_tiling
from tgraph.kernel import (
    HalfLine,
    gstar_asymptotic_check,
    gstar_build,
    gstar_harmonicity,
    kinv_asymptotic,
    kinv_exact,
)
from tgraph.lattice import black, white
from tgraph.periodic import (
    density_diagnostic,
    detect_period,
    quotient_chain,
    regeneration_clt,
    stationary,
)
from conftest import random_generic_setups
from fractions import Fraction


def _report(num, ok, detail):
    line = f"criterion {num:>2}: {'PASS' if ok else 'FAIL'} — {detail}"
    print(line)
    assert ok, line


def test_criterion_01_geometric_theorems():
    t0 = time.time()
    rng = np.random.default_rng(101)
    setups = random_generic_setups(rng, 10, radius=20, margin=2e-4)
    worst_face = 0.0
    for i, p in enumerate(setups):
        win = build_window(p, 20)
        tiling = validate_tiling(win, 10000, seed=1000 + i)
        assert tiling.ok, f"tiling violations for setup {i}: {tiling.violations[:2]}"
        segs = validate_segments(win)
        assert not segs.intersections, f"segment intersections for setup {i}"
        assert not segs.bad_vertices, f"vertex membership violations for setup {i}"
        tri = p.triangle
        for w, face in win.faces.items():
            rs = face.scale * face.rotation
            err = abs((face.v2 - face.v1) - rs * tri.a * tri.alpha) + abs(
                (face.v3 - face.v2) - rs * tri.b * tri.beta
            )
            worst_face = max(worst_face, err)
            assert err < 1e-9
            area2 = ((face.v2 - face.v1).conjugate() * (face.v3 - face.v1)).imag
            assert area2 > 0  # same orientation as the reference triangle
    elapsed = time.time() - t0
    _report(
        1,
        elapsed <= 60.0,
        f"10 setups at R=20: tiling/segments/faces OK, worst face error "
        f"{worst_face:.2e}, {elapsed:.1f}s (budget 60s)",
    )


def test_criterion_02_martingale_balance(window20):
    worst = 0.0
    for b, seg in window20.segments.items():
        v = seg.interior
        rp = 1.0 / abs(seg.p2 - v)
        rm = 1.0 / abs(seg.p1 - v)
        worst = max(worst, abs(rp * (seg.p2 - v) + rm * (seg.p1 - v)))
    _report(2, worst <= 1e-12, f"max balance residual {worst:.2e} over R=20 window")


def test_criterion_03_psi_almost_linearity(params):
    s20 = build_window(params, 20).sup_psi_minus_ell()
    s40 = build_window(params, 40).sup_psi_minus_ell()
    rel = abs(s40 - s20) / s20
    _report(3, rel < 0.05, f"sup|psi-ell|: R20 {s20:.6f} vs R40 {s40:.6f} (drift {rel:.2%})")


def test_criterion_04_translation_lambda_rotation(params):
    win = build_window(params, 20)
    rng = np.random.default_rng(104)
    worst = 0.0
    for _ in range(10):
        m, n = (int(v) for v in rng.integers(-4, 5, size=2))
        p2 = rotate_lambda(params, m, n)
        win2 = build_window(p2, 20)
        d = pseudo_distance(
            win, win.vmap[black(m, n)], win2, win2.vmap[black(0, 0)], cutoff=5.0
        )
        worst = max(worst, d)
    _report(4, worst < 1e-9, f"max pointed pseudo-distance {worst:.2e} over 10 shifts")


def test_criterion_05_clt_isotropy(equilateral):
    t0 = time.time()
    main = empirical_covariance(
        Params.from_angle(equilateral, 0.37), black(0, 0), 100000, 10000.0, seed=505
    )
    iso = isotropy_test(main)
    ok_off = abs(iso.offdiag_ratio) <= 0.02 and abs(iso.offdiag_ratio) <= 3 * iso.offdiag_se
    ok_diag = abs(iso.diag_ratio) <= 0.05 and abs(iso.diag_ratio) <= 3 * iso.diag_se
    # agreement across generic lambdas and start vertices (joint 3 sigma)
    others = [
        empirical_covariance(Params.from_angle(equilateral, 1.61), black(0, 0), 30000, 10000.0, seed=506),
        empirical_covariance(Params.from_angle(equilateral, 2.83), black(0, 0), 30000, 10000.0, seed=507),
        empirical_covariance(Params.from_angle(equilateral, 0.37), black(3, -2), 30000, 10000.0, seed=508),
        empirical_covariance(Params.from_angle(equilateral, 0.37), black(-5, 4), 30000, 10000.0, seed=509),
    ]
    worst_z = max(float(np.max(covariance_zscores(main, o))) for o in others)
    elapsed = time.time() - t0
    _report(
        5,
        ok_off and ok_diag and worst_z < 3.0 and elapsed < 1800,
        f"off/tr {iso.offdiag_ratio:+.4f} (se {iso.offdiag_se:.4f}), "
        f"diag/tr {iso.diag_ratio:+.4f} (se {iso.diag_se:.4f}), "
        f"max agreement z {worst_z:.2f}, tr(M) {main.trace:.4f}, {elapsed:.0f}s",
    )


def test_criterion_06_ellipticity(equilateral):
    dirs = [cmath.exp(1j * math.pi * k / 32) for k in range(32)]
    p = Params.from_angle(equilateral, 0.37)
    win = build_window(p, 10)
    starts = sorted(win.segments, key=lambda b: (abs(b.m) + abs(b.n), b.m, b.n))[:100]
    scan = ellipticity_scan(p, dirs, starts, 2000, seed=606)
    ok_generic = scan.min_var_minus_3se > 0 and math.isfinite(scan.max_var)

    eps = 1e-3
    lam = 1j * cmath.exp(1j * eps)
    p_trap = Params(equilateral, lam / abs(lam))
    win_t = build_window(p_trap, 10)
    corners = {(0, 0), (1, 0), (0, 1)}
    trap_starts = [
        b for b in win_t.segments if (win_t.segments[b].interior_dual.m,
                                      win_t.segments[b].interior_dual.n) in corners
    ]
    near = sorted(win_t.segments, key=lambda b: (abs(b.m) + abs(b.n), b.m, b.n))
    starts_t = (trap_starts + [b for b in near if b not in trap_starts])[:100]
    scan_t = ellipticity_scan(p_trap, dirs, starts_t, 2000, seed=607)
    ok_trap = scan_t.min_var_minus_3se > 0
    _report(
        6,
        ok_generic and ok_trap,
        f"generic min var {scan.min_var:.4f} (-3se {scan.min_var_minus_3se:.4f}), "
        f"max {scan.max_var:.3f}; margin-1e-3 min var {scan_t.min_var:.4f} "
        f"(-3se {scan_t.min_var_minus_3se:.4f})",
    )


def test_criterion_07_dirichlet(params):
    probes = [0.05 + 0.1j, -0.3 + 0.2j, 0.25 - 0.25j]
    rows = dirichlet_convergence(
        params, Disc(0, 1.0), lambda z: z.real ** 2 - z.imag ** 2, [10, 20, 40], probes
    )
    errs = [r.max_error for r in rows]
    decreasing = errs[1] < errs[0] * 1.05 and errs[2] < errs[1] * 1.05
    lin_worst = 0.0
    from tgraph.analysis import _window_radius_for

    for n in (10, 20, 40):
        win = build_window(params, _window_radius_for(params, n, 1.5))
        fld = dirichlet_solve(
            win, n, Disc(0, 1.0), lambda z: z.real, boundary_sampling="direct"
        )
        worst = max(
            abs(v - fld.position(b).real)
            for b, v in fld.values.items()
            if b in fld.interior
        )
        lin_worst = max(lin_worst, worst)
    _report(
        7,
        decreasing and lin_worst <= 1e-10,
        f"x^2-y^2 probe errors {[f'{e:.2e}' for e in errs]}, linear data worst "
        f"{lin_worst:.2e}",
    )


def test_criterion_08_kernel(params):
    k20 = kinv_exact(white(0, 0), params, 20)
    ok_resid = k20.interior_residual <= 1e-10
    tri = params.triangle
    worst_scaled = 0.0
    for m in range(-10, 11):
        for n in range(-10, 11):
            r = abs(tri.a * tri.alpha / 2 * m - tri.c * tri.gamma / 2 * n)
            if 5 <= r <= 10:
                gap = abs(
                    k20.value(black(m, n)) - kinv_asymptotic(black(m, n), white(0, 0), params)
                )
                worst_scaled = max(worst_scaled, gap * r * r)
    k30 = kinv_exact(white(0, 0), params, 30)
    k40 = kinv_exact(white(0, 0), params, 40)
    core = [(m, n) for m in range(-10, 11) for n in range(-10, 11)]
    gap2030 = max(abs(k20.value(black(m, n)) - k30.value(black(m, n))) for m, n in core)
    gap3040 = max(abs(k30.value(black(m, n)) - k40.value(black(m, n))) for m, n in core)
    _report(
        8,
        ok_resid and worst_scaled < 0.5 and gap3040 < gap2030,
        f"interior residual {k20.interior_residual:.2e}, scaled asymptotic gap "
        f"{worst_scaled:.2e}, core gaps 20v30 {gap2030:.2e} > 30v40 {gap3040:.2e}",
    )


def test_criterion_09_gstar(params):
    win45 = build_window(params, 45)
    ray = HalfLine(angle=math.pi / 2)
    harm = {}
    closure_ok = True
    for rk in (20, 40):
        kw = kinv_exact(white(0, 0), params, rk)
        fld = gstar_build(win45, white(0, 0), ray, kw)
        closure_ok &= fld.closure_max <= 10 * fld.kernel_tolerance
        h = np.array(list(gstar_harmonicity(fld).values()))
        harm[rk] = (float(h.max()), float(h.mean()))
    halves = harm[40][0] <= harm[20][0] / 2 and harm[40][1] <= harm[20][1] / 2

    win40 = build_window(params, 40)
    kw40 = kinv_exact(white(0, 0), params, 40)
    fld40 = gstar_build(win40, white(0, 0), ray, kw40)
    dev = gstar_asymptotic_check(fld40, params)
    c_ok = abs(dev.c_fitted - dev.c_formula) <= 0.01 * abs(dev.c_formula)
    devr_ok = dev.max_dev_times_r < 1.0
    _report(
        9,
        closure_ok and halves and c_ok and devr_ok,
        f"closure <= 10x ktol, harmonicity max {harm[20][0]:.2e}->{harm[40][0]:.2e} "
        f"(x{harm[20][0]/harm[40][0]:.2f}), c fit {dev.c_fitted:.5f} vs "
        f"{dev.c_formula:.5f} ({abs(dev.c_fitted/dev.c_formula-1):.2%}), "
        f"max dev*r {dev.max_dev_times_r:.3f}",
    )


def test_criterion_10_periodic(params):
    chain = quotient_chain(params, detect_period(params.triangle))
    pi = stationary(chain)
    ok_pi = pi.residual <= 1e-12

    reg = regeneration_clt(params, black(0, 0), 4000, seed=1010)
    est = empirical_covariance(params, black(0, 0), 5000, 300.0, seed=1011)
    z = float(np.max(covariance_zscores(reg.estimate, est)))

    probs = np.array([0.8, 0.9, 0.95, 0.98, 0.99])
    qs = np.quantile(reg.durations, probs)
    surv = np.log(1 - probs)
    corr = float(np.corrcoef(qs, surv)[0, 1])
    tails_ok = corr < -0.97

    norms = []
    for k in (6, 12, 24):
        tri_k = Triangle.from_angles(
            [Fraction(0), Fraction(2, 3) + Fraction(1, k), Fraction(4, 3) - Fraction(1, 2 * k)]
        )
        p_k = Params.from_angle(tri_k, 0.37)
        ch = quotient_chain(p_k, detect_period(tri_k))
        norms.append(density_diagnostic(stationary(ch), ch))
    bounded = max(norms) < 10.0
    _report(
        10,
        ok_pi and z < 3.0 and tails_ok and bounded,
        f"pi residual {pi.residual:.1e}, regen vs MC z {z:.2f}, tail corr {corr:.3f}, "
        f"density norms {[f'{x:.3f}' for x in norms]}",
    )


def test_criterion_11_determinism(tmp_path):
    from tgraph.cli import main

    cfg = tmp_path / "cfg.cfg"
    cfg.write_text(
        "[triangle]\nangles = 0/1 pi, 2/3 pi, 4/3 pi\n"
        "[lambda]\nangle = 0.37\n[window]\nradius = 8\n"
        f"[run]\nseed = 11\nout_dir = {tmp_path}\n"
    )
    checks = []
    for argv, artifact in [
        (["cov", str(cfg), "--n-walks", "300", "--horizon", "50"], "covariance.json"),
        (["walk", str(cfg), "--horizon", "30"], "trajectory.csv"),
        (["ellipticity", str(cfg), "--directions", "8", "--starts", "4",
          "--n-samples", "200"], "ellipticity.json"),
        (["periodic", str(cfg), "--n-blocks", "200"], "periodic.json"),
        (["validate", str(cfg), "--samples", "500"], "validate.json"),
    ]:
        assert main(argv) == 0
        first = (tmp_path / artifact).read_bytes()
        assert main(argv) == 0
        checks.append((tmp_path / artifact).read_bytes() == first)
    _report(11, all(checks), f"{len(checks)} randomized commands byte-identical on rerun")
