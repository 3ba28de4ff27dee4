"""Inverse adjacency (Kasteleyn) kernel on the hexagonal lattice and the
quasi-harmonic function it induces on the T-graph.

The bounded inverse satisfies sum_b K(w,b) Kinv(b, w0) = [w == w0] and decays
like Im(conj(f(w0)) g(b) / (ell(b) - ell(w0))) / (2 pi); a finite box is
solved exactly with that asymptotic form prescribed just outside the box.

G* is the primitive of the conjugated inverse along segments: across a
segment of black face b it grows by Re(K_T^-1(b, w0) (x+ - x-)), picks up a
unit jump across a reference half-line d from the base face, and is discrete
harmonic away from d.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._engine import run_ensemble, start_position
from .construction import (
    Params,
    TGraphWindow,
    ell,
    f_white,
    g_black,
    psi_value,
)
from .lattice import BLACK, WHITE, DualVertex, HexCoord, black, white

GOLDEN_STEP = 2.0 * math.pi * (math.sqrt(5.0) - 1.0) / 2.0 * 1e-4  # ray nudges


def kinv_asymptotic(b: HexCoord, w: HexCoord, params: Params) -> float:
    """Leading term of the bounded inverse kernel at black b, white w."""
    if b.color != BLACK or w.color != WHITE:
        raise ValueError("kinv_asymptotic expects (black, white)")
    if (b.m, b.n) == (w.m, w.n):
        raise ValueError("coincident lattice coordinates: asymptotic form undefined")
    tri = params.triangle
    dz = ell(b.m, b.n, tri) - ell(w.m, w.n, tri)
    val = f_white(w.m, w.n, tri).conjugate() * g_black(b.m, b.n, tri) / dz
    return val.imag / (2.0 * math.pi)


@dataclass
class KernelWindow:
    """Solved values of Kinv(., w0) on a lattice box around w0.

    Outside the box, value() falls back to the asymptotic form; the
    truncation_estimate records the worst defect of the combined field on
    the first ring of whites outside the solved equations.
    """

    w0: HexCoord
    box_radius: int
    params: Params
    values: dict
    interior_residual: float
    truncation_estimate: float

    def value(self, b: HexCoord) -> float:
        v = self.values.get(b)
        if v is not None:
            return v
        return kinv_asymptotic(b, self.w0, self.params)

    def in_box(self, b: HexCoord) -> bool:
        return b in self.values


def kinv_exact(w0: HexCoord, params: Params, R: int) -> KernelWindow:
    """Solve sum_b K(w,b) x(b) = [w == w0] on the box |m-m0|,|n-n0| <= R.

    The equations at whites interior to the box are imposed exactly; the
    blacks on the box edge are fit to kinv_asymptotic in least squares.  The
    combined KKT system is solved sparsely.  (A plain square truncation is
    exponentially ill-conditioned: the operator is first-order and the box
    supports near-null modes that explode toward the middle, so prescribing
    the edge ring as hard data amplifies its O(1/R^2) error catastrophically.)
    """
    if R < 10:
        raise ValueError("box radius must be at least 10")
    if w0.color != WHITE:
        raise ValueError("base vertex must be white")
    tri = params.triangle
    m0, n0 = w0.m, w0.n
    side = 2 * R + 1
    n_unk = side * side

    def bidx(m, n):
        return (m - m0 + R) * side + (n - n0 + R)

    weights = (tri.a, tri.b, tri.c)
    rows, cols, vals, rhs = [], [], [], []
    r_i = 0
    for p in range(m0 - R + 1, m0 + R + 1):
        for q in range(n0 - R, n0 + R):
            for (bm, bn), wgt in zip(((p, q), (p, q + 1), (p - 1, q + 1)), weights):
                rows.append(r_i)
                cols.append(bidx(bm, bn))
                vals.append(wgt)
            rhs.append(1.0 if (p, q) == (m0, n0) else 0.0)
            r_i += 1
    A = sp.csr_matrix((vals, (rows, cols)), shape=(r_i, n_unk))
    b_vec = np.asarray(rhs)

    ring_idx, ring_val = [], []
    for p in range(m0 - R, m0 + R + 1):
        for q in range(n0 - R, n0 + R + 1):
            if abs(p - m0) == R or abs(q - n0) == R:
                ring_idx.append(bidx(p, q))
                ring_val.append(kinv_asymptotic(black(p, q), w0, params))
    Cmat = sp.csr_matrix(
        (np.ones(len(ring_idx)), (np.arange(len(ring_idx)), ring_idx)),
        shape=(len(ring_idx), n_unk),
    )
    d_vec = np.asarray(ring_val)

    kkt = sp.bmat([[Cmat.T @ Cmat, A.T], [A, None]], format="csc")
    full_rhs = np.concatenate([Cmat.T @ d_vec, b_vec])
    sol = spla.spsolve(kkt, full_rhs)
    x = sol[:n_unk]
    interior_residual = float(np.max(np.abs(A @ x - b_vec)))
    if not np.isfinite(interior_residual) or interior_residual > 1e-10:
        raise RuntimeError(
            f"kernel solve failed: interior residual {interior_residual:.3e}"
        )

    values = {}
    for p in range(m0 - R, m0 + R + 1):
        for q in range(n0 - R, n0 + R + 1):
            values[black(p, q)] = float(x[bidx(p, q)])

    win = KernelWindow(
        w0=w0,
        box_radius=R,
        params=params,
        values=values,
        interior_residual=interior_residual,
        truncation_estimate=0.0,
    )
    # defect of the extended field on the first whites whose equations were
    # not imposed (what downstream face sums will see at a window edge)
    worst = 0.0
    for p in range(m0 - R - 1, m0 + R + 2):
        for q in (n0 - R - 1, n0 + R):
            worst = max(worst, abs(_white_defect(white(p, q), win)))
    for q in range(n0 - R - 1, n0 + R + 1):
        for p in (m0 - R, m0 + R + 1):
            worst = max(worst, abs(_white_defect(white(p, q), win)))
    win.truncation_estimate = worst
    return win


def _white_defect(w: HexCoord, kwin: KernelWindow) -> float:
    tri = kwin.params.triangle
    total = 0.0
    for (bm, bn), wgt in zip(
        ((w.m, w.n), (w.m, w.n + 1), (w.m - 1, w.n + 1)), (tri.a, tri.b, tri.c)
    ):
        total += wgt * kwin.value(black(bm, bn))
    return total - (1.0 if (w.m, w.n) == (kwin.w0.m, kwin.w0.n) else 0.0)


def kt_inv(b: HexCoord, w: HexCoord, kwin: KernelWindow, params: Params) -> complex:
    """Conjugated inverse K_T^-1(b, w) = Kinv(b, w) / (Re(conj(lam f(w))) lam g(b))."""
    tri = params.triangle
    s = (params.lam * f_white(w.m, w.n, tri)).conjugate().real
    if abs(s) < 1e-12:
        raise ValueError(f"degenerate face at {w!r}: zero scale factor")
    return kwin.value(b) / (s * params.lam * g_black(b.m, b.n, tri))


def kt_matrix_entry(w: HexCoord, b: HexCoord, params: Params) -> complex:
    """K_T(w, b) = the flow on the edge wb (zero for non-adjacent pairs)."""
    from .construction import phi

    try:
        return phi(w, b, params)
    except ValueError:
        return 0.0 + 0.0j


# ---------------------------------------------------------------------------
# G*


@dataclass(frozen=True)
class HalfLine:
    angle: float
    origin: Optional[complex] = None  # defaults to the base face centroid


@dataclass
class GStarField:
    w0: HexCoord
    ray_origin: complex
    ray_angle: float
    values: dict  # black -> value at the vertex v(b)
    closure_max: float
    kernel_tolerance: float
    window: TGraphWindow = field(repr=False)
    _dual: np.ndarray = field(repr=False, default=None)
    _dual_lo: int = 0

    def dual_value(self, v: DualVertex) -> float:
        i = v.m - self._dual_lo
        j = v.n - self._dual_lo
        if not (0 <= i < self._dual.shape[0] and 0 <= j < self._dual.shape[1]):
            raise KeyError(f"{v!r} outside the G* grid")
        return float(self._dual[i, j])


def _ray_crossings(p: np.ndarray, q: np.ndarray, origin: complex, angle: float):
    """Signed counterclockwise crossing count of directed edges p->q with the
    ray from origin (values in {-1, 0, +1})."""
    e = cmath.exp(1j * angle)
    zp = (p - origin) / e
    zq = (q - origin) / e
    # crossing CCW: from below the ray line (negative imag) to above, with the
    # intersection at positive ray parameter
    denom = zq.imag - zp.imag
    with np.errstate(divide="ignore", invalid="ignore"):
        s = np.where(denom != 0.0, -zp.imag / denom, -1.0)
    t = zp.real + s * (zq.real - zp.real)
    hits = (s > 0.0) & (s < 1.0) & (t > 0.0)
    sign = np.where(zp.imag < 0.0, 1, -1)
    cross = (np.sign(zp.imag) * np.sign(zq.imag) < 0) & hits
    return np.where(cross, sign, 0)


def perturb_ray(window: TGraphWindow, ray: HalfLine, margin: float = 1e-6) -> HalfLine:
    """Nudge the ray angle by golden-ratio steps until it clears every window
    vertex by the margin."""
    origin = ray.origin
    if origin is None:
        raise ValueError("ray origin must be resolved before perturbation")
    pts = window._psi.ravel() - origin
    angle = ray.angle
    for _ in range(10000):
        e = cmath.exp(1j * angle)
        z = pts / e
        ahead = z.real > 0
        dist = np.where(ahead, np.abs(z.imag), np.abs(z))
        if dist.min() >= margin:
            return HalfLine(angle=angle, origin=origin)
        angle += GOLDEN_STEP
    raise RuntimeError("could not find a ray direction clearing all vertices")


def gstar_build(
    window: TGraphWindow, w0: HexCoord, d: HalfLine, kwin: KernelWindow
) -> GStarField:
    """Integrate the segment increment rule over the window.

    Increments along a dual edge inside the segment of black face b are
    Kinv(b, w0) * dt / Re(conj(lam f(w0))) with dt the signed length of the
    edge along the segment direction, minus the signed counterclockwise
    crossing number with the cut d.  Integration runs over the row n = 0 and
    then the columns (a spanning tree of the dual grid); the white-face loop
    sums are the closure residuals.
    """
    if kwin.w0 != w0:
        raise ValueError("kernel window must be based at the G* base face")
    params = window.params
    tri = params.triangle
    R = window.radius
    face = window.faces.get(w0)
    if face is None:
        raise ValueError(f"base face {w0!r} outside the window")
    origin = d.origin if d.origin is not None else face.centroid
    ray = perturb_ray(window, HalfLine(angle=d.angle, origin=origin))

    s0 = (params.lam * f_white(w0.m, w0.n, tri)).conjugate().real
    if abs(s0) < 1e-12:
        raise ValueError(f"degenerate base face {w0!r}")

    # dual grid [lo, hi]^2 with every edge's carrier black face inside the
    # window's black box
    lo, hi = -R + 1, R
    n_side = hi - lo + 1
    Rd = window._Rd
    psi = window._psi

    def psi_block(m_off, n_off):
        return psi[lo + m_off + Rd : hi + m_off + Rd + 1, lo + n_off + Rd : hi + n_off + Rd + 1]

    kgrid = np.empty((n_side, n_side))
    kgrid_nw = np.empty((n_side, n_side))  # black (m-1, n+1) per dual (m, n)
    dirgrid = np.empty((n_side, n_side), dtype=complex)
    dirgrid_nw = np.empty((n_side, n_side), dtype=complex)
    for i, m in enumerate(range(lo, hi + 1)):
        for j, n in enumerate(range(lo, hi + 1)):
            kgrid[i, j] = kwin.value(black(m, n))
            kgrid_nw[i, j] = kwin.value(black(m - 1, n + 1))
            mu = params.lam * f_white(m, n, tri)
            dirgrid[i, j] = tri.alpha * mu
            mu_nw = params.lam * f_white(m - 1, n + 1, tri)
            dirgrid_nw[i, j] = tri.alpha * mu_nw

    base = psi_block(0, 0)
    # east edges (m,n)->(m+1,n): carrier black (m,n); valid for m in [lo, hi-1]
    d_e = psi_block(1, 0) - base
    t_e = (np.conj(dirgrid) * d_e).real
    inc_e = kgrid * t_e / s0 - _ray_crossings(base, psi_block(1, 0), origin, ray.angle)
    # north edges (m,n)->(m,n+1): carrier black (m-1, n+1)
    d_n = psi_block(0, 1) - base
    t_n = (np.conj(dirgrid_nw) * d_n).real
    inc_n = kgrid_nw * t_n / s0 - _ray_crossings(base, psi_block(0, 1), origin, ray.angle)
    # southeast edges (m,n)->(m+1,n-1): carrier black (m,n)
    d_se = psi_block(1, -1) - base
    t_se = (np.conj(dirgrid) * d_se).real
    inc_se = kgrid * t_se / s0 - _ray_crossings(base, psi_block(1, -1), origin, ray.angle)

    G = np.zeros((n_side, n_side))
    i0 = -lo  # index of m = 0 / n = 0
    G[i0 + 1 :, i0] = np.cumsum(inc_e[i0:-1, i0])
    G[:i0, i0] = -np.cumsum(inc_e[i0 - 1 :: -1, i0])[::-1]
    G[:, i0 + 1 :] = G[:, i0][:, None] + np.cumsum(inc_n[:, i0:-1], axis=1)
    G[:, :i0] = G[:, i0][:, None] - np.cumsum(inc_n[:, i0 - 1 :: -1], axis=1)[:, ::-1]

    # white-face loops v(m,n) -> v(m+1,n) -> v(m,n+1) -> v(m,n)
    closure = inc_e[:-1, :-1] - inc_se[:-1, 1:] - inc_n[:-1, :-1]
    closure_max = float(np.max(np.abs(closure)))

    values = {}
    for b, seg in window.segments.items():
        dv = seg.interior_dual
        if lo <= dv.m <= hi and lo <= dv.n <= hi:
            values[b] = float(G[dv.m - lo, dv.n - lo])
    base_b = black(0, 0)
    offset = values[base_b]
    for b in values:
        values[b] -= offset
    G -= offset

    return GStarField(
        w0=w0,
        ray_origin=origin,
        ray_angle=ray.angle,
        values=values,
        closure_max=closure_max,
        kernel_tolerance=kwin.truncation_estimate,
        window=window,
        _dual=G,
        _dual_lo=lo,
    )


def gstar_harmonicity(field: GStarField) -> dict:
    """Mean-value residuals at vertices whose segments avoid the cut."""
    window = field.window
    residuals = {}
    for b, seg in window.segments.items():
        if b not in field.values:
            continue
        duals = (seg.endpoint_duals[0], seg.interior_dual, seg.endpoint_duals[1])
        try:
            g_lo, g_mid, g_hi = (field.dual_value(v) for v in duals)
        except KeyError:
            continue
        crossing = _ray_crossings(
            np.array([seg.p1]), np.array([seg.p2]), field.ray_origin, field.ray_angle
        )[0]
        if crossing != 0:
            continue
        v = seg.interior
        r_lo = 1.0 / abs(seg.p1 - v)
        r_hi = 1.0 / abs(seg.p2 - v)
        residuals[b] = abs((r_lo * g_lo + r_hi * g_hi) / (r_lo + r_hi) - g_mid)
    return residuals


@dataclass
class GStarDeviation:
    c_fitted: float
    c_formula: float
    constant: float
    sup_deviation: float
    max_dev_times_r: float
    annulus: tuple
    n_points: int


def gstar_asymptotic_check(field: GStarField, params: Params) -> GStarDeviation:
    """Fit G* against (arg_d + c log r) / (2 pi) + C on a mid-window annulus.

    Returns the fitted log coefficient (to compare with Im/Re of
    conj(lam f(w0))), the sup deviation on the annulus, and the trend of
    deviation * r over the window (bounded if the error is O(1/r))."""
    tri = params.triangle
    w0 = field.w0
    fw = params.lam * f_white(w0.m, w0.n, tri)
    c_formula = fw.conjugate().imag / fw.conjugate().real
    window = field.window
    R = window.radius
    r_lo, r_hi = R / 3.0, R / 2.0
    cell = min(abs(ell(1, 0, tri)), abs(ell(0, 1, tri)))
    pts, vals = [], []
    for b, gval in field.values.items():
        z = window.vmap[b] - field.ray_origin
        pts.append(z)
        vals.append(gval)
    pts = np.asarray(pts)
    vals = np.asarray(vals)
    r = np.abs(pts)
    arg_d = field.ray_angle + np.mod(np.angle(pts) - field.ray_angle, 2.0 * math.pi)
    sel = (r >= r_lo * cell) & (r <= r_hi * cell)
    if sel.sum() < 20:
        raise ValueError("annulus too thin for the asymptotic fit")
    y = vals[sel] - arg_d[sel] / (2.0 * math.pi)
    X = np.column_stack([np.log(r[sel]) / (2.0 * math.pi), np.ones(sel.sum())])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    c_fit, const = float(coef[0]), float(coef[1])
    model = arg_d / (2.0 * math.pi) + c_formula * np.log(r) / (2.0 * math.pi) + const
    dev = vals - model
    sup_dev = float(np.max(np.abs(dev[sel])))
    wide = (r >= 10.0) & (r <= r_hi * cell)
    max_dev_r = float(np.max(np.abs(dev[wide]) * r[wide])) if wide.any() else math.nan
    return GStarDeviation(
        c_fitted=c_fit,
        c_formula=c_formula,
        constant=const,
        sup_deviation=sup_dev,
        max_dev_times_r=max_dev_r,
        annulus=(r_lo * cell, r_hi * cell),
        n_points=int(sel.sum()),
    )


# ---------------------------------------------------------------------------
# covariance identification diagnostic


def anisotropy_log_statistic(points: np.ndarray, w_point: complex, dn: float):
    """Mean and stderr of log(|X - w| / Dn) over sampled endpoints."""
    vals = np.log(np.abs(points - w_point) / dn)
    return float(vals.mean()), float(vals.std(ddof=1) / math.sqrt(len(vals)))


@dataclass
class DiagnosticResult:
    statistic: float
    stderr: float
    implied_m11_minus_m22: float
    D: float
    n: int
    n_walks: int
    w_point: complex
    n_exited: int


def nearest_face_point(params: Params, target: complex) -> tuple[HexCoord, complex]:
    """White face whose centroid is nearest the target point."""
    from .construction import ell_inverse

    m0, n0 = ell_inverse(target, params.triangle)
    best, best_pt, best_d = None, None, math.inf
    for dm in range(-3, 4):
        for dn in range(-3, 4):
            m, n = int(round(m0)) + dm, int(round(n0)) + dn
            pts = [
                psi_value(DualVertex(m, n), params),
                psi_value(DualVertex(m + 1, n), params),
                psi_value(DualVertex(m, n + 1), params),
            ]
            c = sum(pts) / 3.0
            if abs(c - target) < best_d:
                best, best_pt, best_d = white(m, n), c, abs(c - target)
    return best, best_pt


def covariance_identification_diagnostic(
    params: Params, D: float, n: int, n_walks: int, seed: int
) -> DiagnosticResult:
    """Monte Carlo check of the integral forcing isotropy.

    Walks run to tau = min(n^2, exit of the ball of radius n D / 2); the mean
    of log(|X_tau - w_n| / (D n)), with w_n a face at distance ~ D n above
    the start, expands as (M11 - M22) / (2 D^2) for a diagonal limiting
    covariance, so a zero-consistent statistic certifies isotropy.
    """
    if D < 5:
        raise ValueError("D must be at least 5")
    x0 = black(0, 0)
    p0 = start_position(params, x0)
    _, w_pt = nearest_face_point(params, p0 + 1j * D * n)
    pos, _, status = run_ensemble(
        params, x0, n_walks, float(n * n), seed, exit_radius=n * D / 2.0
    )
    if np.any(status == 3):
        raise RuntimeError("walker aborted (degenerate vertex) in diagnostic")
    stat, se = anisotropy_log_statistic(pos, w_pt, D * n)
    return DiagnosticResult(
        statistic=stat,
        stderr=se,
        implied_m11_minus_m22=stat * 2.0 * D * D,
        D=D,
        n=n,
        n_walks=n_walks,
        w_point=w_pt,
        n_exited=int(np.sum(status == 2)),
    )
