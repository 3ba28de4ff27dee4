import cmath
import math

import numpy as np
import pytest

from tgraph.construction import (
    Params,
    Segment,
    Face,
    build_window,
    genericity_margin,
    rotate_lambda,
)
from tgraph.geometry import (
    OUTSIDE,
    locate,
    oriented_paths,
    oriented_reachability,
    pseudo_distance,
    segment_meeting_angles,
    validate_segments,
    validate_tiling,
)
from tgraph.lattice import black, white


def test_tiling_no_violations(window20):
    rep = validate_tiling(window20, 10000, seed=1)
    assert rep.ok, rep.violations[:3]


def test_centroid_locates_its_face(window20):
    for w in (white(0, 0), white(5, -3), white(-7, 2)):
        face = window20.faces[w]
        hit = locate(face.centroid, window20)
        assert isinstance(hit, Face) and hit.white == w


def test_total_face_area_matches_core_area(window20):
    # independent oracle: polygon clipping of each face against a core box
    shapely = pytest.importorskip("shapely")
    from shapely.geometry import Polygon as ShPolygon, box

    half = 4.0
    core = box(-half, -half, half, half)
    total = 0.0
    for face in window20.faces.values():
        poly = ShPolygon([(v.real, v.imag) for v in face.vertices])
        total += poly.intersection(core).area
    assert abs(total - (2 * half) ** 2) / (2 * half) ** 2 < 1e-3


def test_segments_no_interior_intersections_random(equilateral):
    rng = np.random.default_rng(8)
    count = 0
    for _ in range(10):
        if count >= 5:
            break
        lam = rng.uniform(0, 2 * math.pi)
        p = Params.from_angle(equilateral, lam)
        if genericity_margin(p, 20) < 1e-4:
            continue
        count += 1
        rep = validate_segments(build_window(p, 20))
        assert not rep.intersections
        assert not rep.bad_vertices
    assert count == 5


def test_min_length_bounded_over_lambda_sweep(equilateral):
    mins = []
    for k in range(32):
        p = Params.from_angle(equilateral, 0.03 + 2 * math.pi * k / 32)
        if genericity_margin(p, 10) < 1e-6:
            continue
        mins.append(build_window(p, 10).min_segment_length())
    assert min(mins) > 0.3  # uniformly bounded below, independent of lambda


def test_locate_segment_and_outside(window20):
    seg = window20.segments[black(1, 1)]
    hit = locate((seg.p1 + seg.p2) / 2, window20)
    assert isinstance(hit, Segment)
    assert locate(1000 + 1000j, window20) is OUTSIDE


def test_meeting_angles_are_triangle_angles(window10, params):
    tri = params.triangle
    angle_set = []
    for a in tri.angles:
        a = a % math.pi
        angle_set.append(min(a, math.pi - a))
    worst = 0.0
    for ang in segment_meeting_angles(window10):
        worst = max(worst, min(abs(ang - a) for a in angle_set))
    assert worst < 1e-6


# ---------------------------------------------------------------------------
# oriented paths


def _lex_ok(points, n_dir, sign):
    nperp = n_dir * 1j
    for a, b in zip(points, points[1:]):
        dn = sign * (n_dir.conjugate() * (b - a)).real
        dp = sign * (nperp.conjugate() * (b - a)).real
        if not (dn > 1e-12 or (abs(dn) <= 1e-12 and dp > 0)):
            return False
    return True


def test_oriented_paths_monotone(window20):
    rng = np.random.default_rng(9)
    blacks = list(window20.segments.keys())
    for _ in range(20):
        b = blacks[rng.integers(len(blacks))]
        if max(abs(b.m), abs(b.n)) > 10:
            continue
        bundle = oriented_paths(window20, b, 1 + 0j)
        assert len(bundle.p_plus) > 4
        assert _lex_ok(bundle.p_plus.points, 1 + 0j, +1.0)
        assert _lex_ok(bundle.p_minus.points, 1 + 0j, -1.0)


def test_oriented_paths_strict_increase_every_two_steps(window20):
    bundle = oriented_paths(window20, black(0, 0), 1 + 0j)
    pts = bundle.p_plus.points
    for k in range(len(pts) - 2):
        assert (pts[k + 2] - pts[k]).real > 1e-12


def test_four_step_drift_positive(window20):
    rng = np.random.default_rng(10)
    for _ in range(5):
        theta = rng.uniform(0, 2 * math.pi)
        n_dir = cmath.exp(1j * theta)
        bundle = oriented_paths(window20, black(0, 0), n_dir)
        assert bundle.eps_hat_plus > 0
        assert bundle.eps_hat_minus > 0


# ---------------------------------------------------------------------------
# reachability


def test_reachability_trivial(window20):
    res = oriented_reachability(window20, black(2, 2), black(2, 2))
    assert res.found and res.path == [black(2, 2)]


def test_reachability_deep_pairs(params):
    win = build_window(params, 30)
    rng = np.random.default_rng(11)
    lengths, dists = [], []
    for _ in range(50):
        m1, n1, m2, n2 = (int(v) for v in rng.integers(-7, 8, size=4))
        res = oriented_reachability(win, black(m1, n1), black(m2, n2))
        assert res.found, (m1, n1, m2, n2)
        lengths.append(len(res.path) - 1)
        dists.append(abs(m1 - m2) + abs(n1 - n2))
    # path lengths grow at most linearly in lattice distance
    dists = np.asarray(dists, dtype=float)
    lengths = np.asarray(lengths, dtype=float)
    mask = dists > 0
    slope = float(np.polyfit(dists[mask], lengths[mask], 1)[0])
    assert slope < 6.0


# ---------------------------------------------------------------------------
# pseudo-distance


def test_pseudo_distance_identical(window20):
    p0 = window20.vmap[black(0, 0)]
    assert pseudo_distance(window20, p0, window20, p0, cutoff=5.0) == 0.0


def test_pseudo_distance_translation_equivalence(params):
    win = build_window(params, 20)
    rng = np.random.default_rng(12)
    for _ in range(3):
        m, n = (int(v) for v in rng.integers(-4, 5, size=2))
        p2 = rotate_lambda(params, m, n)
        win2 = build_window(p2, 20)
        d = pseudo_distance(
            win, win.vmap[black(m, n)], win2, win2.vmap[black(0, 0)], cutoff=5.0
        )
        assert d < 1e-9


def test_pseudo_distance_triangle_inequality(equilateral):
    rng = np.random.default_rng(13)
    wins = []
    for lam in (0.37, 1.11, 2.71):
        p = Params.from_angle(equilateral, lam)
        win = build_window(p, 14)
        wins.append((win, win.vmap[black(0, 0)]))
    d01 = pseudo_distance(wins[0][0], wins[0][1], wins[1][0], wins[1][1], cutoff=4.0)
    d12 = pseudo_distance(wins[1][0], wins[1][1], wins[2][0], wins[2][1], cutoff=4.0)
    d02 = pseudo_distance(wins[0][0], wins[0][1], wins[2][0], wins[2][1], cutoff=4.0)
    assert d02 <= d01 + d12 + 1e-9
    assert d01 > 0  # different lambdas give different local pictures


def test_pseudo_distance_symmetry(equilateral):
    pa = Params.from_angle(equilateral, 0.37)
    pb = Params.from_angle(equilateral, 1.9)
    wa, wb = build_window(pa, 14), build_window(pb, 14)
    za, zb = wa.vmap[black(0, 0)], wb.vmap[black(0, 0)]
    dab = pseudo_distance(wa, za, wb, zb, cutoff=4.0)
    dba = pseudo_distance(wb, zb, wa, za, cutoff=4.0)
    assert abs(dab - dba) < 1e-12
