"""Construction of the T-graph: weight functions, the flow and its primitive,
and finite windows with their segment/face structure.

A window is built from a triangle Delta (sides a*alpha, b*beta, c*gamma taken
counterclockwise, area one) and a unit-modulus parameter lambda.  The dual
hexagonal lattice is mapped to the plane by the primitive psi of the rotated
flow; black faces flatten to segments, white faces map to triangles similar
to Delta.

Closed-form step values used throughout (mu = lambda * f(w(m,n))):
    psi(v(m+1,n)) - psi(v(m,n)) =  a * Re(conj(mu)) * mu * alpha
    psi(v(m,n+1)) - psi(v(m,n)) = -c * Re(conj(mu)) * mu * gamma
    psi(v(m+1,n-1)) - psi(v(m,n)) = -b * Re(conj(mu) * beta/alpha) * mu * alpha
"""

from __future__ import annotations

import cmath
import math
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

import numpy as np

from .lattice import (
    BLACK,
    DualVertex,
    EdgeKind,
    HexCoord,
    black,
    edge_kind,
    white,
)

# Hard floor below which a window build aborts; ties in the betweenness test
# are treated as exact degeneracies (cf. non-generic lambda).
TIE_TOLERANCE = 1e-9


class DegenerateGraphError(Exception):
    """Raised when a window build hits an exactly degenerate face or segment."""


@dataclass(frozen=True)
class Triangle:
    """Area-one triangle with sides a*alpha, b*beta, c*gamma (counterclockwise).

    angle_fracs optionally records the direction angles as exact fractions of
    pi; it is required for periodicity detection and ignored otherwise.
    """

    a: float
    b: float
    c: float
    alpha: complex
    beta: complex
    gamma: complex
    angle_fracs: Optional[tuple[Fraction, Fraction, Fraction]] = None

    def __post_init__(self):
        for name, u in (("alpha", self.alpha), ("beta", self.beta), ("gamma", self.gamma)):
            if abs(abs(u) - 1.0) > 1e-12:
                raise ValueError(f"{name} must have modulus one, got |{name}|={abs(u)!r}")
        if min(self.a, self.b, self.c) <= 0:
            raise ValueError("side lengths must be positive")
        closure = self.a * self.alpha + self.b * self.beta + self.c * self.gamma
        if abs(closure) > 1e-12 * max(self.a, self.b, self.c):
            raise ValueError(f"sides do not close up: residual {abs(closure)!r}")
        if abs(self.area() - 1.0) > 1e-10:
            raise ValueError(f"triangle area must be one, got {self.area()!r}")

    def area(self) -> float:
        """Signed area; positive for counterclockwise side order."""
        za = self.a * self.alpha
        zb = self.b * self.beta
        return 0.5 * (za.conjugate() * zb).imag

    @property
    def sides(self) -> tuple[complex, complex, complex]:
        return (self.a * self.alpha, self.b * self.beta, self.c * self.gamma)

    @property
    def angles(self) -> tuple[float, float, float]:
        """Interior angles of the triangle (opposite sides a, b, c)."""
        ang = []
        zs = self.sides
        for i in range(3):
            u = zs[(i + 1) % 3]
            v = zs[(i + 2) % 3]
            ang.append(abs(cmath.phase(-v / u)))
        return tuple(ang)

    @classmethod
    def from_sides(cls, za: complex, zb: complex, zc: complex) -> "Triangle":
        """Build from three complex side vectors, rescaling to area one."""
        scale = max(abs(za), abs(zb), abs(zc))
        if abs(za + zb + zc) > 1e-9 * scale:
            raise ValueError("side vectors must sum to zero")
        area = 0.5 * (za.conjugate() * zb).imag
        if area <= 0:
            raise ValueError("sides must be in counterclockwise order (positive area)")
        t = 1.0 / math.sqrt(area)
        if abs(t - 1.0) > 1e-6:
            warnings.warn(f"rescaling sides by {t:.6g} to reach area one", stacklevel=2)
        za, zb, zc = t * za, t * zb, t * zc
        # re-close exactly to keep the closure invariant tight
        zc = -(za + zb)
        return cls(abs(za), abs(zb), abs(zc), za / abs(za), zb / abs(zb), zc / abs(zc))

    @classmethod
    def from_angles(cls, fracs_or_angles) -> "Triangle":
        """Build from the three direction angles of the sides.

        Accepts exact fractions of pi (kept for periodicity detection) or
        plain float angles in radians.  Side lengths are solved from the
        closure relation and rescaled to area one.
        """
        vals = list(fracs_or_angles)
        if len(vals) != 3:
            raise ValueError("need exactly three direction angles")
        fracs = None
        if all(isinstance(v, Fraction) for v in vals):
            fracs = tuple(vals)
            thetas = [math.pi * float(v) for v in vals]
        else:
            thetas = [float(v) for v in vals]
        ta, tb, tc = thetas
        # closure has the one-dimensional positive kernel
        # (sin(tc-tb), sin(ta-tc), sin(tb-ta)) when the directions are in
        # counterclockwise order with pairwise gaps below pi
        a0 = math.sin(tc - tb)
        b0 = math.sin(ta - tc)
        c0 = math.sin(tb - ta)
        if min(a0, b0, c0) <= 1e-12:
            raise ValueError(
                "directions do not admit positive side lengths; "
                "list them counterclockwise with gaps in (0, pi)"
            )
        alpha = cmath.exp(1j * ta)
        beta = cmath.exp(1j * tb)
        gamma = cmath.exp(1j * tc)
        area0 = 0.5 * ((a0 * alpha).conjugate() * (b0 * beta)).imag
        s = 1.0 / math.sqrt(area0)
        return cls(s * a0, s * b0, s * c0, alpha, beta, gamma, angle_fracs=fracs)

    @classmethod
    def equilateral(cls) -> "Triangle":
        return cls.from_angles([Fraction(0), Fraction(2, 3), Fraction(4, 3)])


@dataclass(frozen=True)
class Params:
    triangle: Triangle
    lam: complex

    def __post_init__(self):
        if abs(abs(self.lam) - 1.0) > 1e-12:
            raise ValueError(f"lambda must have modulus one, got {abs(self.lam)!r}")

    @classmethod
    def from_angle(cls, triangle: Triangle, lam_angle: float) -> "Params":
        return cls(triangle, cmath.exp(1j * lam_angle))

    @property
    def theta1(self) -> float:
        """arg(beta/gamma); f picks up this phase per unit of m."""
        return cmath.phase(self.triangle.beta / self.triangle.gamma)

    @property
    def theta2(self) -> float:
        """arg(beta/alpha); f picks up this phase per unit of n."""
        return cmath.phase(self.triangle.beta / self.triangle.alpha)


def f_white(m: int, n: int, triangle: Triangle) -> complex:
    """(beta/gamma)^m (beta/alpha)^n, the unit weight on white vertices."""
    t1 = cmath.phase(triangle.beta / triangle.gamma)
    t2 = cmath.phase(triangle.beta / triangle.alpha)
    return cmath.exp(1j * (m * t1 + n * t2))


def g_black(m: int, n: int, triangle: Triangle) -> complex:
    """alpha * (beta/gamma)^m (beta/alpha)^n, the unit weight on black vertices."""
    return triangle.alpha * f_white(m, n, triangle)


def k_weight(kind: EdgeKind, triangle: Triangle) -> float:
    """Edge weight of the adjacency matrix: a/b/c per edge kind."""
    if kind is EdgeKind.VERTICAL:
        return triangle.a
    if kind is EdgeKind.NE_SW:
        return triangle.b
    return triangle.c


def ell(m, n, triangle: Triangle):
    """The linear map (a*alpha/2) m - (c*gamma/2) n approximating psi."""
    return (triangle.a * triangle.alpha / 2.0) * m - (triangle.c * triangle.gamma / 2.0) * n


def ell_inverse(z: complex, triangle: Triangle) -> tuple[float, float]:
    """Real (m, n) with ell(m, n) = z."""
    u = triangle.a * triangle.alpha / 2.0
    v = -triangle.c * triangle.gamma / 2.0
    det = u.real * v.imag - u.imag * v.real
    m = (z.real * v.imag - z.imag * v.real) / det
    n = (u.real * z.imag - u.imag * z.real) / det
    return m, n


def phi(x: HexCoord, y: HexCoord, params: Params) -> complex:
    """Flow on the oriented edge xy; antisymmetric under swapping endpoints.

    For a white-to-black edge wb the value is K(w,b) Re(conj(lam) conj(f(w)))
    lam g(b).
    """
    if x.color == y.color:
        raise ValueError(f"{x!r} and {y!r} are not adjacent")
    sign = 1.0
    w, b = x, y
    if x.color == BLACK:
        w, b = y, x
        sign = -1.0
    kind = edge_kind(w, b)  # raises for non-adjacent pairs
    tri = params.triangle
    fw = f_white(w.m, w.n, tri)
    gb = g_black(b.m, b.n, tri)
    return sign * k_weight(kind, tri) * (params.lam.conjugate() * fw.conjugate()).real * params.lam * gb


_DUAL_STEPS = {(1, 0), (-1, 0), (0, 1), (0, -1), (1, -1), (-1, 1)}


def phi_star(v: DualVertex, v2: DualVertex, params: Params) -> complex:
    """Dual flow psi(v2) - psi(v) for neighboring dual vertices.

    Sign convention: crossing a primal edge bw with the white vertex on the
    left contributes +phi(wb).
    """
    dm, dn = v2.m - v.m, v2.n - v.n
    if (dm, dn) not in _DUAL_STEPS:
        raise ValueError(f"{v!r} and {v2!r} are not neighbors in the dual lattice")
    m, n = v.m, v.n
    if (dm, dn) == (1, 0):
        return phi(white(m, n), black(m, n), params)
    if (dm, dn) == (-1, 0):
        return -phi(white(m - 1, n), black(m - 1, n), params)
    if (dm, dn) == (0, 1):
        return -phi(white(m, n), black(m - 1, n + 1), params)
    if (dm, dn) == (0, -1):
        return phi(white(m, n - 1), black(m - 1, n), params)
    if (dm, dn) == (1, -1):
        return -phi(white(m, n - 1), black(m, n), params)
    return phi(white(m - 1, n), black(m - 1, n + 1), params)


def psi_along_path(path: list[DualVertex], params: Params) -> complex:
    """Sum of the dual flow along a lattice path of dual vertices."""
    total = 0.0 + 0.0j
    for v, v2 in zip(path, path[1:]):
        total += phi_star(v, v2, params)
    return total


def psi_value(v: DualVertex, params: Params) -> complex:
    """psi at a single dual vertex via an L-shaped path from v(0,0)."""
    path = [DualVertex(0, 0)]
    step = 1 if v.m >= 0 else -1
    for m in range(0, v.m, step):
        path.append(DualVertex(m + step, 0))
    step = 1 if v.n >= 0 else -1
    for n in range(0, v.n, step):
        path.append(DualVertex(v.m, n + step))
    return psi_along_path(path, params)


def rotate_lambda(params: Params, m: int, n: int) -> Params:
    """Parameters whose graph is the translate of this one pointed at v(m, n)."""
    tri = params.triangle
    t1 = cmath.phase(tri.beta / tri.gamma)
    t2 = cmath.phase(tri.beta / tri.alpha)
    return Params(tri, params.lam * cmath.exp(1j * (m * t1 + n * t2)))


def genericity_margin(params: Params, radius: int, center: tuple[int, int] = (0, 0)) -> float:
    """min over window whites of |Re(conj(lambda) conj(f(w)))|.

    Zero margin means some face of the window degenerates to a point.
    """
    cm, cn = center
    ms = np.arange(cm - radius, cm + radius + 1)
    ns = np.arange(cn - radius, cn + radius + 1)
    t1, t2 = params.theta1, params.theta2
    # Re(conj(lambda) conj(f)) = cos(arg(lambda) + arg(f))
    phase = np.add.outer(ms * t1, ns * t2) + cmath.phase(params.lam)
    return float(np.min(np.abs(np.cos(phase))))


@dataclass(frozen=True)
class Segment:
    """Image of a black face: a straight segment with one interior vertex."""

    black: HexCoord
    p1: complex
    p2: complex
    interior: complex
    direction: complex
    endpoint_duals: tuple[DualVertex, DualVertex]
    interior_dual: DualVertex

    @property
    def length(self) -> float:
        return abs(self.p2 - self.p1)


@dataclass(frozen=True)
class Face:
    """Image of a white face: a triangle similar to Delta, same orientation."""

    white: HexCoord
    v1: complex
    v2: complex
    v3: complex
    scale: float
    rotation: complex

    @property
    def vertices(self) -> tuple[complex, complex, complex]:
        return (self.v1, self.v2, self.v3)

    @property
    def centroid(self) -> complex:
        return (self.v1 + self.v2 + self.v3) / 3.0

    @property
    def area(self) -> float:
        return self.scale * self.scale  # area(Delta) = 1


@dataclass
class DegeneracyReport:
    eps: float
    degenerate_faces: list
    degenerate_segments: list
    eps_almost_faces: list
    eps_almost_segments: list  # (black, short sub-segment endpoints)
    pairing_constant: float  # empirical C of the segment/face pairing


class TGraphWindow:
    """Finite window of the T-graph over the lattice box |m|, |n| <= radius.

    psi is computed on the dual box |m|, |n| <= radius + 1 so that every
    black/white face of the window has all three corners available.  The
    object is immutable after construction and safe to share across threads.
    """

    def __init__(self, params: Params, radius: int):
        if radius < 2:
            raise ValueError("radius must be at least 2")
        self.params = params
        self.radius = int(radius)
        self._build()

    # -- raw grids ---------------------------------------------------------

    def _build(self):
        params, R = self.params, self.radius
        tri = params.triangle
        Rd = R + 1
        self._Rd = Rd
        ms = np.arange(-Rd, Rd + 1)
        ns = np.arange(-Rd, Rd + 1)
        t1, t2 = params.theta1, params.theta2
        lam_phase = cmath.phase(params.lam)

        # mu(m, n) = lambda * f(w(m, n)); scale(m, n) = Re(conj(mu)) = cos(phase)
        phase = np.add.outer(ms * t1, ns * t2) + lam_phase
        mu = np.exp(1j * phase)
        scale = np.cos(phase)
        self._mu = mu
        self._scale = scale

        margin = float(np.min(np.abs(scale)))
        if margin < 1e-12:
            i, j = np.unravel_index(np.argmin(np.abs(scale)), scale.shape)
            raise DegenerateGraphError(
                f"face w({ms[i]},{ns[j]}) degenerates to a point (scale {scale[i, j]:.3e})"
            )

        # psi by cumulative sums: row n=0 first, then each column.
        step_e = tri.a * scale * mu * tri.alpha  # psi(m+1,n) - psi(m,n)
        step_n = -tri.c * scale * mu * tri.gamma  # psi(m,n+1) - psi(m,n)
        psi = np.zeros_like(mu)
        i0 = Rd  # index of m = 0 / n = 0
        psi[i0 + 1:, i0] = np.cumsum(step_e[i0:-1, i0])
        psi[:i0, i0] = -np.cumsum(step_e[i0 - 1::-1, i0])[::-1]
        psi[:, i0 + 1:] = psi[:, i0][:, None] + np.cumsum(step_n[:, i0:-1], axis=1)
        psi[:, :i0] = psi[:, i0][:, None] - np.cumsum(step_n[:, i0 - 1::-1], axis=1)[:, ::-1]
        self._psi = psi

        self._segment_tables()
        self._face_tables()
        self._owner_tables()
        self._walk_tables()
        self._dicts()

    def _didx(self, m, n):
        """Dual grid indices (arrays ok)."""
        return m + self._Rd, n + self._Rd

    def psi_at(self, v: DualVertex) -> complex:
        i, j = self._didx(v.m, v.n)
        if not (0 <= i < self._psi.shape[0] and 0 <= j < self._psi.shape[1]):
            raise KeyError(f"{v!r} outside the window dual box")
        return complex(self._psi[i, j])

    def _segment_tables(self):
        R = self.radius
        tri = self.params.triangle
        ms = np.arange(-R, R + 1)
        ns = np.arange(-R, R + 1)
        i, j = self._didx(ms[:, None], ns[None, :])
        mu = self._mu[i, j]
        # signed positions along the unit direction alpha*mu of the three
        # corners [bottom v(m+1,n-1), upper-right v(m+1,n), upper-left v(m,n)]
        q_b = tri.beta / tri.alpha
        t_ul = np.zeros_like(mu, dtype=float)
        t_ur = tri.a * (np.conj(mu)).real
        t_b = -tri.b * (np.conj(mu) * q_b).real
        tcor = np.stack([t_b, t_ur, t_ul], axis=-1)  # CCW corner order
        order = np.argsort(tcor, axis=-1)
        interior = order[..., 1].astype(np.int8)  # median position
        gaps = np.take_along_axis(tcor, order, axis=-1)
        gap = np.minimum(gaps[..., 1] - gaps[..., 0], gaps[..., 2] - gaps[..., 1])
        if np.min(gap) < TIE_TOLERANCE:
            bi, bj = np.unravel_index(np.argmin(gap), gap.shape)
            raise DegenerateGraphError(
                f"black face b({ms[bi]},{ns[bj]}) has coincident corner images "
                f"(gap {gap[bi, bj]:.3e})"
            )
        self._black_ms, self._black_ns = ms, ns
        self._seg_t = tcor
        self._seg_interior = interior
        self._seg_dir = tri.alpha * mu
        self._seg_order = order

    def _face_tables(self):
        R = self.radius
        ms = np.arange(-R, R + 1)
        ns = np.arange(-R, R + 1)
        i, j = self._didx(ms[:, None], ns[None, :])
        self._face_scale = self._scale[i, j]
        self._face_rot = self._mu[i, j]

    @staticmethod
    def _corner_duals(m, n):
        """Dual coordinates of the black-face corners in CCW order."""
        return ((m + 1, n - 1), (m + 1, n), (m, n))

    def _owner_tables(self):
        """For each dual vertex, the black face whose segment contains its
        image in the interior (lattice offsets; -2 marks unknown)."""
        R, Rd = self.radius, self._Rd
        side = 2 * Rd + 1
        base = 4 * side  # packed as (bm+R)*base + (bn+R); both offsets nonnegative
        owner_m = np.full((side, side), -1, dtype=np.int64)
        claims = np.zeros((side, side), dtype=np.int16)
        corners = self._corner_duals(self._black_ms[:, None], self._black_ns[None, :])
        for idx, (cm, cn) in enumerate(corners):
            sel = self._seg_interior == idx
            i, j = self._didx(np.broadcast_to(cm, sel.shape)[sel], np.broadcast_to(cn, sel.shape)[sel])
            bm = np.broadcast_to(self._black_ms[:, None], sel.shape)[sel]
            bn = np.broadcast_to(self._black_ns[None, :], sel.shape)[sel]
            owner_m[i, j] = (bm + R) * base + (bn + R)
            claims[i, j] += 1
        # interior duals (all three candidate blacks inside the box) must be
        # claimed exactly once
        dm = np.arange(-R + 1, R + 1)
        dn = np.arange(-R, R)
        ii, jj = self._didx(dm[:, None], dn[None, :])
        bad = claims[ii, jj] != 1
        if np.any(bad):
            k = np.argwhere(bad)[0]
            raise DegenerateGraphError(
                f"dual vertex v({dm[k[0]]},{dn[k[1]]}) interior to "
                f"{claims[ii, jj][k[0], k[1]]} segments; non-generic lambda"
            )
        self._owner_packed = owner_m
        self._owner_claims = claims
        self._pack_base = base

    def owner_of(self, v: DualVertex) -> Optional[HexCoord]:
        """Black face whose segment has psi(v) as interior point, if known."""
        i, j = self._didx(v.m, v.n)
        if not (0 <= i < self._owner_packed.shape[0] and 0 <= j < self._owner_packed.shape[1]):
            return None
        packed = int(self._owner_packed[i, j])
        if packed < 0:
            return None
        off, base = self.radius, self._pack_base
        return black(packed // base - off, packed % base - off)

    def _walk_tables(self):
        """Jump targets and rates per black face (plus = larger signed position)."""
        R = self.radius
        tcor = self._seg_t
        interior = self._seg_interior
        n_side = 2 * R + 1
        idx3 = np.arange(3)
        t_int = np.take_along_axis(tcor, interior[..., None].astype(int), axis=-1)[..., 0]
        mask = idx3[None, None, :] != interior[..., None]
        t_ends = tcor[mask].reshape(n_side, n_side, 2)
        which = np.argsort(t_ends, axis=-1)
        t_lo = np.take_along_axis(t_ends, which[..., :1], axis=-1)[..., 0]
        t_hi = np.take_along_axis(t_ends, which[..., 1:], axis=-1)[..., 0]
        self._rate_plus = 1.0 / (t_hi - t_int)
        self._rate_minus = 1.0 / (t_int - t_lo)
        # corner indices (0..2) of the low/high endpoints
        cidx = np.broadcast_to(idx3, tcor.shape)[mask].reshape(n_side, n_side, 2)
        self._end_lo_corner = np.take_along_axis(cidx, which[..., :1], axis=-1)[..., 0]
        self._end_hi_corner = np.take_along_axis(cidx, which[..., 1:], axis=-1)[..., 0]
        self._t_int = t_int

    def _dicts(self):
        R = self.radius
        tri = self.params.triangle
        psi_d: dict[DualVertex, complex] = {}
        Rd = self._Rd
        for m in range(-Rd, Rd + 1):
            for n in range(-Rd, Rd + 1):
                i, j = self._didx(m, n)
                psi_d[DualVertex(m, n)] = complex(self._psi[i, j])
        self.psi = psi_d

        segments: dict[HexCoord, Segment] = {}
        vmap: dict[HexCoord, complex] = {}
        for bi, m in enumerate(self._black_ms):
            for bj, n in enumerate(self._black_ns):
                duals = [DualVertex(*mn) for mn in self._corner_duals(m, n)]
                pts = [psi_d[d] for d in duals]
                k_int = int(self._seg_interior[bi, bj])
                k_lo = int(self._end_lo_corner[bi, bj])
                k_hi = int(self._end_hi_corner[bi, bj])
                b = black(int(m), int(n))
                segments[b] = Segment(
                    black=b,
                    p1=pts[k_lo],
                    p2=pts[k_hi],
                    interior=pts[k_int],
                    direction=complex(self._seg_dir[bi, bj]),
                    endpoint_duals=(duals[k_lo], duals[k_hi]),
                    interior_dual=duals[k_int],
                )
                vmap[b] = pts[k_int]
        self.segments = segments
        self.vmap = vmap

        faces: dict[HexCoord, Face] = {}
        for m in range(-R, R + 1):
            for n in range(-R, R + 1):
                i, j = self._didx(m, n)
                w = white(m, n)
                faces[w] = Face(
                    white=w,
                    v1=psi_d[DualVertex(m, n)],
                    v2=psi_d[DualVertex(m + 1, n)],
                    v3=psi_d[DualVertex(m, n + 1)],
                    scale=float(self._scale[i, j]),
                    rotation=complex(self._mu[i, j]),
                )
        self.faces = faces

    # -- derived quantities -------------------------------------------------

    def ell_at(self, v: DualVertex) -> complex:
        return ell(v.m, v.n, self.params.triangle)

    def sup_psi_minus_ell(self) -> float:
        Rd = self._Rd
        ms = np.arange(-Rd, Rd + 1)
        ns = np.arange(-Rd, Rd + 1)
        tri = self.params.triangle
        lin = np.add.outer(ms * (tri.a * tri.alpha / 2.0), -ns * (tri.c * tri.gamma / 2.0))
        return float(np.max(np.abs(self._psi - lin)))

    def min_segment_length(self) -> float:
        lo = np.min(self._seg_t, axis=-1)
        hi = np.max(self._seg_t, axis=-1)
        return float(np.min(hi - lo))

    def max_segment_length(self) -> float:
        lo = np.min(self._seg_t, axis=-1)
        hi = np.max(self._seg_t, axis=-1)
        return float(np.max(hi - lo))

    def contains_black(self, b: HexCoord) -> bool:
        return abs(b.m) <= self.radius and abs(b.n) <= self.radius


def build_window(params: Params, radius: int) -> TGraphWindow:
    """Build the window; raises DegenerateGraphError for non-generic lambda."""
    return TGraphWindow(params, radius)


def classify_degeneracy(window: TGraphWindow, eps: float) -> DegeneracyReport:
    """Degenerate and eps-almost-degenerate faces and segments of a window.

    A face is eps-almost-degenerate when its area is below eps^2; a segment
    when its interior vertex is within eps of an endpoint.  The report also
    records the empirical pairing constant: for every almost-degenerate
    segment some adjacent face is C*eps-almost-degenerate.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    deg_faces, deg_segs = [], []
    almost_faces, almost_segs = [], []
    for w, face in window.faces.items():
        if face.area == 0.0:
            deg_faces.append(w)
        elif face.area < eps * eps:
            almost_faces.append(w)
    short_by_black = {}
    for b, seg in window.segments.items():
        d1 = abs(seg.interior - seg.p1)
        d2 = abs(seg.interior - seg.p2)
        if min(d1, d2) == 0.0:
            deg_segs.append(b)
            continue
        if min(d1, d2) < eps:
            near = seg.p1 if d1 <= d2 else seg.p2
            almost_segs.append((b, (seg.interior, near)))
            short_by_black[b] = min(d1, d2)
    # pairing: faces adjacent to segment of b are w(m,n), w(m,n-1), w(m+1,n-1)
    pairing = 0.0
    for b, _ in almost_segs:
        m, n = b.m, b.n
        adj = [white(m, n), white(m, n - 1), white(m + 1, n - 1)]
        sizes = [math.sqrt(window.faces[w].area) for w in adj if w in window.faces]
        if sizes:
            pairing = max(pairing, min(sizes) / eps)
    return DegeneracyReport(
        eps=eps,
        degenerate_faces=deg_faces,
        degenerate_segments=deg_segs,
        eps_almost_faces=almost_faces,
        eps_almost_segments=almost_segs,
        pairing_constant=pairing,
    )
