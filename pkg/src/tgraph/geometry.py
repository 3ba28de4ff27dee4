"""Geometric validation of T-graph windows: tiling/cover checks, point
location, oriented paths and reachability, and the pointed-graph
pseudo-distance used to compare windows.

All predicates are floating point with explicit tolerances; reported
violations carry their margins so near-degeneracies can be diagnosed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.spatial import cKDTree

from .construction import Face, Segment, TGraphWindow, ell_inverse
from .lattice import DualVertex, HexCoord, black, white

INTERSECT_TOL = 1e-9
SEGMENT_SNAP = 1e-9


class WindowCoverageError(Exception):
    """The window does not cover the region a computation needs."""


class AmbiguousLocationError(Exception):
    """Point location failed beyond tolerance (signals a non-generic window)."""


class _Outside:
    def __repr__(self):
        return "Outside"


OUTSIDE = _Outside()


# ---------------------------------------------------------------------------
# sampling / tiling


@dataclass
class TilingReport:
    samples: int
    violations: list  # (point, number of covering faces)
    eta: float

    @property
    def ok(self) -> bool:
        return not self.violations


def _lattice_pad(window: TGraphWindow) -> int:
    """Lattice-coordinate padding that accounts for |psi - ell| and face size."""
    tri = window.params.triangle
    u = tri.a * tri.alpha / 2.0
    v = -tri.c * tri.gamma / 2.0
    mat = np.array([[u.real, v.real], [u.imag, v.imag]])
    opnorm_inv = 1.0 / np.linalg.svd(mat, compute_uv=False)[-1]
    slack = window.sup_psi_minus_ell() + window.max_segment_length()
    return int(math.ceil(slack * opnorm_inv)) + 1


def _core_radius(window: TGraphWindow) -> int:
    pad = _lattice_pad(window)
    core = window.radius - pad
    if core < 1:
        raise WindowCoverageError(
            f"window radius {window.radius} too small for padded core (pad {pad})"
        )
    return core


def _candidate_box(window: TGraphWindow, point: complex, pad: int):
    m, n = ell_inverse(point, window.params.triangle)
    return range(int(round(m)) - pad, int(round(m)) + pad + 1), range(
        int(round(n)) - pad, int(round(n)) + pad + 1
    )


def _face_contains(face: Face, p: complex, tol: float) -> bool:
    v1, v2, v3 = face.vertices
    d1 = ((v2 - v1).conjugate() * (p - v1)).imag
    d2 = ((v3 - v2).conjugate() * (p - v2)).imag
    d3 = ((v1 - v3).conjugate() * (p - v3)).imag
    return d1 >= -tol and d2 >= -tol and d3 >= -tol


def _point_segment_distance(p: complex, s: Segment) -> float:
    d = s.p2 - s.p1
    t = ((p - s.p1).conjugate() * d).real / abs(d) ** 2
    t = min(1.0, max(0.0, t))
    return abs(p - (s.p1 + t * d))


def sample_core_points(window: TGraphWindow, samples: int, rng) -> np.ndarray:
    """Uniform points in the ell-image of the padded core box."""
    core = _core_radius(window)
    tri = window.params.triangle
    xy = rng.uniform(-core, core, size=(samples, 2))
    u = tri.a * tri.alpha / 2.0
    v = -tri.c * tri.gamma / 2.0
    return xy[:, 0] * u + xy[:, 1] * v


def _ell_inverse_many(z: np.ndarray, tri) -> tuple[np.ndarray, np.ndarray]:
    u = tri.a * tri.alpha / 2.0
    v = -tri.c * tri.gamma / 2.0
    det = u.real * v.imag - u.imag * v.real
    m = (z.real * v.imag - z.imag * v.real) / det
    n = (u.real * z.imag - u.imag * z.real) / det
    return m, n


def validate_tiling(window: TGraphWindow, samples: int, seed: int) -> TilingReport:
    """Check that sampled interior points lie in exactly one face.

    Points within eta = 1e-7 * window diameter of a segment are skipped, so
    only bulk points are tested; a gap or a double cover is a violation.
    """
    rng = np.random.default_rng(seed)
    pad = _lattice_pad(window)
    eta = 1e-7 * 4 * window.radius * max(window.params.triangle.a, window.params.triangle.c)
    pts = sample_core_points(window, samples, rng)
    R, Rd = window.radius, window._Rd
    psi = window._psi
    m_hat, n_hat = _ell_inverse_many(pts, window.params.triangle)
    m0 = np.rint(m_hat).astype(int)
    n0 = np.rint(n_hat).astype(int)
    counts = np.zeros(len(pts), dtype=np.int32)
    near = np.zeros(len(pts), dtype=bool)
    lo_c = window._end_lo_corner
    hi_c = window._end_hi_corner
    for dm in range(-pad, pad + 1):
        for dn in range(-pad, pad + 1):
            mm = m0 + dm
            nn = n0 + dn
            ok = (np.abs(mm) <= R) & (np.abs(nn) <= R)
            if not np.any(ok):
                continue
            mi, ni = mm[ok], nn[ok]
            p = pts[ok]
            # white face corners v(m,n), v(m+1,n), v(m,n+1)
            v1 = psi[mi + Rd, ni + Rd]
            v2 = psi[mi + 1 + Rd, ni + Rd]
            v3 = psi[mi + Rd, ni + 1 + Rd]
            d1 = (np.conj(v2 - v1) * (p - v1)).imag
            d2 = (np.conj(v3 - v2) * (p - v2)).imag
            d3 = (np.conj(v1 - v3) * (p - v3)).imag
            inside = (d1 >= -1e-12) & (d2 >= -1e-12) & (d3 >= -1e-12)
            counts[np.flatnonzero(ok)[inside]] += 1
            # segment endpoints of black face (m, n)
            cor_m = np.stack([mi + 1, mi + 1, mi])
            cor_n = np.stack([ni - 1, ni, ni])
            k_lo = lo_c[mi + R, ni + R]
            k_hi = hi_c[mi + R, ni + R]
            cols = np.arange(len(mi))
            p1 = psi[cor_m[k_lo, cols] + Rd, cor_n[k_lo, cols] + Rd]
            p2 = psi[cor_m[k_hi, cols] + Rd, cor_n[k_hi, cols] + Rd]
            d = p2 - p1
            t = np.clip((np.conj(p - p1) * d).real / np.abs(d) ** 2, 0.0, 1.0)
            dist = np.abs(p - (p1 + t * d))
            near[np.flatnonzero(ok)[dist < eta]] = True
    bad = ~near & (counts != 1)
    violations = [(complex(pts[i]), int(counts[i])) for i in np.flatnonzero(bad)]
    return TilingReport(samples=samples, violations=violations, eta=eta)


# ---------------------------------------------------------------------------
# segment checks


@dataclass
class SegmentReport:
    intersections: list  # (black1, black2, margin)
    bad_vertices: list  # (dual, endpoint_count, interior_count)
    min_length: float

    @property
    def ok(self) -> bool:
        return not self.intersections and not self.bad_vertices


def _pairwise_interior_intersections(window: TGraphWindow, tol: float) -> list:
    """Pairs of segments whose open interiors overlap.

    T-junctions (an endpoint of one segment on the interior of another) are
    legal; a violation requires either a transversal crossing at distance
    > tol from all four endpoints, or a collinear overlap of length > tol.
    """
    segs = list(window.segments.values())
    p1 = np.array([s.p1 for s in segs])
    p2 = np.array([s.p2 for s in segs])
    d = p2 - p1
    length = np.abs(d)
    out = []
    n = len(segs)
    chunk = max(1, int(2e6 // max(n, 1)))
    for lo in range(0, n, chunk):
        hi = min(n, lo + chunk)
        a1 = p1[lo:hi, None]
        da = d[lo:hi, None]
        la = length[lo:hi, None]
        cross = lambda z, w: (np.conj(z) * w).imag
        # signed distances of each endpoint to the other supporting line
        s1 = cross(da, p1[None, :] - a1) / la
        s2 = cross(da, p2[None, :] - a1) / la
        s3 = cross(d[None, :], a1 - p1[None, :]) / length[None, :]
        s4 = cross(d[None, :], (a1 + da) - p1[None, :]) / length[None, :]
        proper = (
            (s1 * s2 < 0)
            & (s3 * s4 < 0)
            & (np.minimum(np.abs(s1), np.abs(s2)) > tol)
            & (np.minimum(np.abs(s3), np.abs(s4)) > tol)
        )
        # collinear overlap: both endpoints of one on the other's line
        coll = (np.abs(s1) <= tol) & (np.abs(s2) <= tol)
        if np.any(coll):
            t1 = (np.conj(da) * (p1[None, :] - a1)).real / la ** 2
            t2 = (np.conj(da) * (p2[None, :] - a1)).real / la ** 2
            tlo = np.minimum(t1, t2)
            thi = np.maximum(t1, t2)
            overlap = np.minimum(thi, 1.0) - np.maximum(tlo, 0.0)
            coll &= overlap * la > tol
        viol = proper | coll
        ii, jj = np.nonzero(viol)
        for i, j in zip(ii, jj):
            gi, gj = lo + i, j
            if gi < gj:
                margin = min(abs(s1[i, j]), abs(s2[i, j]), abs(s3[i, j]), abs(s4[i, j]))
                out.append((segs[gi].black, segs[gj].black, float(margin)))
    return out


def validate_segments(window: TGraphWindow, tol: float = INTERSECT_TOL) -> SegmentReport:
    """No two segments share an interior point; every interior vertex is an
    endpoint of exactly two segments and interior to exactly one."""
    intersections = _pairwise_interior_intersections(window, tol)

    end_count: dict[DualVertex, int] = {}
    for seg in window.segments.values():
        for dv in seg.endpoint_duals:
            end_count[dv] = end_count.get(dv, 0) + 1
    bad = []
    R = window.radius
    for m in range(-R + 2, R):
        for n in range(-R + 1, R - 1):
            dv = DualVertex(m, n)
            ends = end_count.get(dv, 0)
            ints = int(window._owner_claims[window._didx(m, n)])
            if ends != 2 or ints != 1:
                bad.append((dv, ends, ints))
    return SegmentReport(
        intersections=intersections,
        bad_vertices=bad,
        min_length=window.min_segment_length(),
    )


def segment_meeting_angles(window: TGraphWindow) -> list[float]:
    """Line angles between each segment and those meeting at its endpoints."""
    angles = []
    for seg in window.segments.values():
        for dv in seg.endpoint_duals:
            other = window.owner_of(dv)
            if other is None:
                continue
            oseg = window.segments[other]
            rel = np.angle(oseg.direction / seg.direction) % math.pi
            angles.append(float(min(rel, math.pi - rel)))
    return angles


# ---------------------------------------------------------------------------
# point location


def locate(point: complex, window: TGraphWindow):
    """The face containing the point, the segment it sits on (within 1e-9),
    or OUTSIDE when the point is beyond the trusted core."""
    pad = _lattice_pad(window)
    core = window.radius - pad
    m0, n0 = ell_inverse(point, window.params.triangle)
    if abs(m0) > core or abs(n0) > core:
        return OUTSIDE
    mrange, nrange = _candidate_box(window, point, pad)
    near_segments = []
    containing = []
    for m in mrange:
        for n in nrange:
            seg = window.segments.get(black(m, n))
            if seg is not None and _point_segment_distance(point, seg) <= SEGMENT_SNAP:
                near_segments.append(seg)
            f = window.faces.get(white(m, n))
            if f is not None and _face_contains(f, point, 1e-12):
                containing.append(f)
    if near_segments:
        if len(near_segments) == 1:
            return near_segments[0]
        # several segments within snapping distance: fine if they share an
        # endpoint near the query point, otherwise the window is suspect
        best = min(near_segments, key=lambda s: _point_segment_distance(point, s))
        for s in near_segments:
            if s is best:
                continue
            shared = {best.p1, best.p2} & {s.p1, s.p2}
            if not shared:
                raise AmbiguousLocationError(
                    f"point {point} within {SEGMENT_SNAP} of disjoint segments "
                    f"{best.black!r} and {s.black!r}"
                )
        return best
    if len(containing) == 1:
        return containing[0]
    if not containing:
        return OUTSIDE
    raise AmbiguousLocationError(
        f"point {point} claimed by {len(containing)} faces but near no segment"
    )


# ---------------------------------------------------------------------------
# oriented paths


@dataclass
class OrientedPath:
    blacks: list
    points: list
    truncated: bool

    def __len__(self):
        return len(self.points)


@dataclass
class OrientedPathBundle:
    p_plus: OrientedPath
    p_minus: OrientedPath
    pt_plus: OrientedPath
    pt_minus: OrientedPath
    eps_hat_plus: float
    eps_hat_minus: float


def _successors(window: TGraphWindow, b: HexCoord):
    """Oriented-step targets from a vertex: the owners of its segment endpoints."""
    seg = window.segments[b]
    out = []
    for dv in seg.endpoint_duals:
        owner = window.owner_of(dv)
        out.append((owner, window.psi_at(dv)))
    return out


def _lex_path(window, x0, n_dir, sign, max_steps):
    """Greedy path increasing (sign * n.x, sign * nperp.x) lexicographically."""
    nperp = n_dir * 1j
    blacks = [x0]
    points = [window.vmap[x0]]
    truncated = False
    cur = x0
    for _ in range(max_steps):
        options = _successors(window, cur)
        if any(o[0] is None for o in options):
            truncated = True
            break
        x = points[-1]
        best = None
        for tgt, pt in options:
            dn = sign * ((n_dir.conjugate() * (pt - x)).real)
            dp = sign * ((nperp.conjugate() * (pt - x)).real)
            if dn > 1e-12 or (abs(dn) <= 1e-12 and dp > 0):
                if best is None or dn > best[0]:
                    best = (dn, tgt, pt)
        if best is None:
            truncated = True  # cannot extend without leaving lexicographic order
            break
        blacks.append(best[1])
        points.append(best[2])
        cur = best[1]
    return OrientedPath(blacks, points, truncated)


def _eps_path(window, x0, n_dir, sign, max_steps):
    """Path with positive four-step drift in direction n.

    For triangles without a right angle this is the same construction as the
    lexicographic path: the two available steps always have opposite-sign
    projections on n (they point to opposite ends of one segment), so taking
    the increasing one gives a strict gain except on segments orthogonal to
    n, which are never adjacent to each other.
    """
    return _lex_path(window, x0, n_dir, sign, max_steps)


def _min_four_step_gain(path: OrientedPath, n_dir, sign) -> float:
    pts = path.points
    if len(pts) < 5:
        return math.nan
    gains = [
        sign * ((n_dir.conjugate() * (pts[k + 4] - pts[k])).real)
        for k in range(len(pts) - 4)
    ]
    return min(gains)


def oriented_paths(
    window: TGraphWindow, x0: HexCoord, direction: complex, max_steps: Optional[int] = None
) -> OrientedPathBundle:
    """Monotone oriented paths from x0: lexicographic P+/P- and the
    four-step-drift paths with their empirical drift constants."""
    n_dir = direction / abs(direction)
    if max_steps is None:
        max_steps = 3 * window.radius
    p_plus = _lex_path(window, x0, n_dir, +1.0, max_steps)
    p_minus = _lex_path(window, x0, n_dir, -1.0, max_steps)
    pt_plus = _eps_path(window, x0, n_dir, +1.0, max_steps)
    pt_minus = _eps_path(window, x0, n_dir, -1.0, max_steps)
    return OrientedPathBundle(
        p_plus=p_plus,
        p_minus=p_minus,
        pt_plus=pt_plus,
        pt_minus=pt_minus,
        eps_hat_plus=_min_four_step_gain(pt_plus, n_dir, +1.0),
        eps_hat_minus=_min_four_step_gain(pt_minus, n_dir, -1.0),
    )


# ---------------------------------------------------------------------------
# oriented reachability


@dataclass
class ReachabilityResult:
    path: Optional[list]  # vertices (black coords) from v to v2, inclusive
    boundary_limited: bool

    @property
    def found(self) -> bool:
        return self.path is not None


def oriented_reachability(window: TGraphWindow, v: HexCoord, v2: HexCoord) -> ReachabilityResult:
    """Breadth-first search over oriented steps from v to v2."""
    if v == v2:
        return ReachabilityResult(path=[v], boundary_limited=False)
    prev = {v: None}
    frontier = [v]
    hit_boundary = False
    while frontier:
        nxt = []
        for b in frontier:
            for tgt, _ in _successors(window, b):
                if tgt is None:
                    hit_boundary = True
                    continue
                if tgt in prev:
                    continue
                prev[tgt] = b
                if tgt == v2:
                    path = [tgt]
                    cur = b
                    while cur is not None:
                        path.append(cur)
                        cur = prev[cur]
                    return ReachabilityResult(path=path[::-1], boundary_limited=False)
                nxt.append(tgt)
        frontier = nxt
    return ReachabilityResult(path=None, boundary_limited=hit_boundary)


# ---------------------------------------------------------------------------
# pseudo-distance between pointed windows


_SAMPLE_STEP = 1e-3


def _covered_radius(window: TGraphWindow, center: complex) -> float:
    """Radius around center certainly covered by complete window geometry."""
    Rd = window._Rd
    ring = []
    for m in range(-Rd, Rd + 1):
        ring.append(window.psi_at(DualVertex(m, -Rd)))
        ring.append(window.psi_at(DualVertex(m, Rd)))
    for n in range(-Rd, Rd + 1):
        ring.append(window.psi_at(DualVertex(-Rd, n)))
        ring.append(window.psi_at(DualVertex(Rd, n)))
    return min(abs(z - center) for z in ring) - window.max_segment_length()


def _sample_points(window: TGraphWindow, center: complex, radius: float) -> np.ndarray:
    pts = []
    for seg in window.segments.values():
        a, b = seg.p1, seg.p2
        if (a.real, a.imag) > (b.real, b.imag):
            a, b = b, a
        length = abs(b - a)
        # skip segments entirely outside the ball
        mid = (a + b) / 2.0
        if abs(mid - center) > radius + length:
            continue
        num = max(2, int(math.ceil(length / _SAMPLE_STEP - 1e-9)) + 1)
        t = np.linspace(0.0, 1.0, num)
        pts.append(np.asarray(a) + t * (b - a))
    z = np.concatenate(pts) - center
    return z[np.abs(z) <= radius]


def _hausdorff(a: np.ndarray, b: np.ndarray) -> float:
    if len(a) == 0 or len(b) == 0:
        raise WindowCoverageError("empty point set in Hausdorff computation")
    ta = cKDTree(np.column_stack([a.real, a.imag]))
    tb = cKDTree(np.column_stack([b.real, b.imag]))
    d_ab = tb.query(np.column_stack([a.real, a.imag]))[0].max()
    d_ba = ta.query(np.column_stack([b.real, b.imag]))[0].max()
    return float(max(d_ab, d_ba))


def pseudo_distance(
    window_a: TGraphWindow,
    point_a: complex,
    window_b: TGraphWindow,
    point_b: complex,
    cutoff: float,
) -> float:
    """Pointed-graph pseudo-distance via truncated Hausdorff comparison.

    Following the defining infimum over eps of the Hausdorff distance between
    the recentered graphs restricted to the ball of radius 1/eps; truncation
    balls are capped at `cutoff`, so two windows that agree on the full
    cutoff ball report their raw (tiny) Hausdorff distance there.
    """
    for win, pt in ((window_a, point_a), (window_b, point_b)):
        if _covered_radius(win, pt) < cutoff:
            raise WindowCoverageError(
                f"window does not cover a radius-{cutoff} ball around {pt}"
            )
    a_full = _sample_points(window_a, point_a, cutoff)
    b_full = _sample_points(window_b, point_b, cutoff)
    h_full = _hausdorff(a_full, b_full)
    if h_full <= 1.0 / cutoff:
        return h_full
    eps = 1.0 / cutoff
    diam = 2.0 * cutoff
    ra = np.abs(a_full)
    rb = np.abs(b_full)
    while eps < diam:
        ball = 1.0 / eps
        h = _hausdorff(a_full[ra <= ball], b_full[rb <= ball])
        if h <= eps:
            return eps
        eps *= 1.05
    return eps
