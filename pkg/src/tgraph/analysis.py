"""Statistical verification of the invariance principle: empirical covariance
of the rescaled walk, isotropy statistics, directional ellipticity scans, and
the discrete Dirichlet problem on rescaled windows.

Covariance estimates carry their per-walk samples so ratio statistics can be
jackknifed exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ._engine import run_ensemble, start_position
from .construction import Params, TGraphWindow
from .geometry import WindowCoverageError
from .lattice import HexCoord


# ---------------------------------------------------------------------------
# covariance of the rescaled walk


@dataclass
class CovarianceEstimate:
    M: np.ndarray  # 2x2 sample covariance of X_N / sqrt(N)
    stderr: np.ndarray  # 2x2 jackknife standard errors
    n_walks: int
    n_steps: float  # time horizon N
    samples: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def trace(self) -> float:
        return float(self.M[0, 0] + self.M[1, 1])


def _cov_jackknife_se(x: np.ndarray) -> np.ndarray:
    """Delete-one jackknife SEs of the 2x2 sample covariance entries."""
    n = len(x)
    mu = x.mean(axis=0)
    se = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            ss = float(x[:, a] @ x[:, b])
            mu_i = (n * mu - x) / (n - 1)
            ss_i = ss - x[:, a] * x[:, b]
            s_i = (ss_i - (n - 1) * mu_i[:, a] * mu_i[:, b]) / (n - 2)
            se[a, b] = math.sqrt((n - 1) / n * float(np.sum((s_i - s_i.mean()) ** 2)))
    return se


def empirical_covariance(
    params: Params, x0: HexCoord, n_walks: int, N: float, seed: int, *, salt: int = 0
) -> CovarianceEstimate:
    """Sample covariance of X_N / sqrt(N) over independent walks."""
    if n_walks < 100:
        raise ValueError("need at least 100 walks for a covariance estimate")
    pos, _, status = run_ensemble(params, x0, n_walks, N, seed, salt=salt)
    if not np.all(status == 1):
        bad = int(np.sum(status != 1))
        raise RuntimeError(f"{bad} walkers stopped abnormally (status != done)")
    disp = (pos - start_position(params, x0)) / math.sqrt(N)
    samples = np.column_stack([disp.real, disp.imag])
    M = np.cov(samples.T, ddof=1)
    return CovarianceEstimate(
        M=M, stderr=_cov_jackknife_se(samples), n_walks=n_walks, n_steps=float(N),
        samples=samples,
    )


@dataclass
class IsotropyStats:
    diag_ratio: float  # (M11 - M22) / tr
    offdiag_ratio: float  # M12 / tr
    diag_se: float
    offdiag_se: float

    @property
    def passed(self) -> bool:
        return (
            abs(self.diag_ratio) <= 3 * self.diag_se
            and abs(self.offdiag_ratio) <= 3 * self.offdiag_se
            and abs(self.diag_ratio) < 0.05
            and abs(self.offdiag_ratio) < 0.05
        )


def isotropy_test(est: CovarianceEstimate) -> IsotropyStats:
    """Anisotropy ratios with jackknife CIs; pass iff both are 0 within 3 sigma
    and below 0.05 in absolute value."""
    M = est.M
    tr = est.trace
    diag = float((M[0, 0] - M[1, 1]) / tr)
    off = float(M[0, 1] / tr)
    if est.samples is None:
        # degenerate fallback: propagate entrywise errors
        diag_se = float(np.hypot(est.stderr[0, 0], est.stderr[1, 1]) / tr)
        off_se = float(est.stderr[0, 1] / tr)
        return IsotropyStats(diag, off, diag_se, off_se)
    x = est.samples
    n = len(x)
    mu = x.mean(axis=0)
    mu_i = (n * mu - x) / (n - 1)
    s_i = {}
    for a in range(2):
        for b in range(2):
            ss = float(x[:, a] @ x[:, b])
            ss_i = ss - x[:, a] * x[:, b]
            s_i[a, b] = (ss_i - (n - 1) * mu_i[:, a] * mu_i[:, b]) / (n - 2)
    tr_i = s_i[0, 0] + s_i[1, 1]
    diag_i = (s_i[0, 0] - s_i[1, 1]) / tr_i
    off_i = s_i[0, 1] / tr_i
    diag_se = math.sqrt((n - 1) / n * float(np.sum((diag_i - diag_i.mean()) ** 2)))
    off_se = math.sqrt((n - 1) / n * float(np.sum((off_i - off_i.mean()) ** 2)))
    return IsotropyStats(diag, off, diag_se, off_se)


def covariance_zscores(a: CovarianceEstimate, b: CovarianceEstimate) -> np.ndarray:
    """Entrywise z-scores of the difference of two independent estimates."""
    se = np.sqrt(a.stderr ** 2 + b.stderr ** 2)
    return np.abs(a.M - b.M) / se


# ---------------------------------------------------------------------------
# ellipticity


@dataclass
class EllipticityScan:
    variances: np.ndarray  # (n_starts, n_directions)
    stderrs: np.ndarray
    min_var: float
    min_var_minus_3se: float
    max_var: float
    max_var_plus_3se: float
    directions: np.ndarray
    starts: list


def ellipticity_scan(
    params: Params,
    directions: Sequence[complex],
    starts: Sequence[HexCoord],
    n_samples: int,
    seed: int,
) -> EllipticityScan:
    """Monte Carlo variance of the time-1 displacement projected on each
    direction, from each start vertex."""
    dirs = np.asarray([d / abs(d) for d in directions])
    if len(dirs) < 8:
        raise ValueError("need at least 8 directions")
    var = np.empty((len(starts), len(dirs)))
    se = np.empty_like(var)
    for si, x0 in enumerate(starts):
        pos, _, status = run_ensemble(
            params, x0, n_samples, 1.0, seed, salt=si + 1
        )
        if not np.all(status == 1):
            raise RuntimeError("walker stopped abnormally in ellipticity scan")
        disp = pos - start_position(params, x0)
        for di, d in enumerate(dirs):
            proj = (np.conj(d) * disp).real
            v = float(np.var(proj, ddof=1))
            m4 = float(np.mean((proj - proj.mean()) ** 4))
            var[si, di] = v
            se[si, di] = math.sqrt(max(m4 - v * v, 0.0) / n_samples)
    imin = np.unravel_index(np.argmin(var), var.shape)
    imax = np.unravel_index(np.argmax(var), var.shape)
    return EllipticityScan(
        variances=var,
        stderrs=se,
        min_var=float(var[imin]),
        min_var_minus_3se=float(var[imin] - 3 * se[imin]),
        max_var=float(var[imax]),
        max_var_plus_3se=float(var[imax] + 3 * se[imax]),
        directions=dirs,
        starts=list(starts),
    )


# ---------------------------------------------------------------------------
# Dirichlet problem


class Disc:
    def __init__(self, center: complex, radius: float):
        self.center = complex(center)
        self.radius = float(radius)

    def contains(self, z: complex) -> bool:
        return abs(z - self.center) < self.radius

    def project(self, z: complex) -> complex:
        d = z - self.center
        if d == 0:
            return self.center + self.radius
        return self.center + self.radius * d / abs(d)


class Polygon:
    def __init__(self, vertices: Sequence[complex]):
        self.vertices = [complex(v) for v in vertices]
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")

    def contains(self, z: complex) -> bool:
        cn = 0
        vs = self.vertices + self.vertices[:1]
        for a, b in zip(vs, vs[1:]):
            if (a.imag <= z.imag < b.imag) or (b.imag <= z.imag < a.imag):
                t = (z.imag - a.imag) / (b.imag - a.imag)
                if z.real < a.real + t * (b.real - a.real):
                    cn += 1
        return cn % 2 == 1

    def project(self, z: complex) -> complex:
        best, best_d = None, math.inf
        vs = self.vertices + self.vertices[:1]
        for a, b in zip(vs, vs[1:]):
            d = b - a
            t = ((z - a).conjugate() * d).real / abs(d) ** 2
            t = min(1.0, max(0.0, t))
            p = a + t * d
            if abs(z - p) < best_d:
                best, best_d = p, abs(z - p)
        return best


@dataclass
class HarmonicField:
    values: dict  # black HexCoord -> float
    interior: set
    boundary: set
    boundary_values: dict
    residual: float
    scale_n: int
    window: TGraphWindow = field(repr=False)

    def position(self, b: HexCoord) -> complex:
        return self.window.vmap[b] / self.scale_n

    def value_at(self, point: complex) -> tuple[HexCoord, float]:
        """Field value at the vertex nearest the query point (scaled coords)."""
        best, best_d = None, math.inf
        for b in self.values:
            d = abs(self.position(b) - point)
            if d < best_d:
                best, best_d = b, d
        return best, self.values[best]


def dirichlet_solve(
    window: TGraphWindow,
    scale_n: int,
    domain,
    f: Callable[[complex], float],
    boundary_sampling: str = "project",
) -> HarmonicField:
    """Solve the discrete Dirichlet problem on the window rescaled by 1/n.

    Interior vertices satisfy h(v) = (r+ h(v+) + r- h(v-)) / (r+ + r-);
    boundary vertices (adjacent to the domain but outside it) carry f at
    their Euclidean projection onto the domain closure, or f at the vertex
    itself with boundary_sampling="direct" (for f defined outside the domain;
    this is what makes globally linear data reproduce exactly).
    """
    if boundary_sampling not in ("project", "direct"):
        raise ValueError("boundary_sampling must be 'project' or 'direct'")
    segs = window.segments
    pos = {b: window.vmap[b] / scale_n for b in segs}
    inside = {b for b, z in pos.items() if domain.contains(z)}
    if not inside:
        raise WindowCoverageError("no window vertex inside the domain")
    # jump targets; every interior vertex must have resolved neighbors
    nbrs = {}
    boundary = set()
    for b in inside:
        seg = segs[b]
        lo = window.owner_of(seg.endpoint_duals[0])
        hi = window.owner_of(seg.endpoint_duals[1])
        if lo is None or hi is None:
            raise WindowCoverageError(
                f"window too small: jump target of {b!r} unresolved"
            )
        v = seg.interior
        r_lo = 1.0 / abs(seg.p1 - v)
        r_hi = 1.0 / abs(seg.p2 - v)
        nbrs[b] = ((lo, r_lo), (hi, r_hi))
        for t in (lo, hi):
            if t not in inside:
                boundary.add(t)
    # oriented access to the boundary: reverse BFS from boundary vertices
    reached = set(boundary)
    frontier = list(boundary)
    rev = {}
    for b, ((lo, _), (hi, _)) in nbrs.items():
        rev.setdefault(lo, []).append(b)
        rev.setdefault(hi, []).append(b)
    while frontier:
        nxt = []
        for t in frontier:
            for src in rev.get(t, ()):
                if src not in reached:
                    reached.add(src)
                    nxt.append(src)
        frontier = nxt
    unreachable = inside - reached
    if unreachable:
        raise ValueError(
            f"{len(unreachable)} interior vertices have no oriented access to "
            "the boundary; Dirichlet system is singular"
        )

    order = sorted(inside, key=lambda b: (b.m, b.n))
    index = {b: i for i, b in enumerate(order)}
    bvals = {}
    for t in sorted(boundary, key=lambda b: (b.m, b.n)):
        if t not in pos:
            raise WindowCoverageError(f"boundary vertex {t!r} outside window")
        z = pos[t]
        if boundary_sampling == "project" and not domain.contains(z):
            z = domain.project(z)
        bvals[t] = float(f(z))

    rows, cols, vals = [], [], []
    rhs = np.zeros(len(order))
    for b in order:
        i = index[b]
        rows.append(i)
        cols.append(i)
        vals.append(1.0)
        (lo, r_lo), (hi, r_hi) = nbrs[b]
        tot = r_lo + r_hi
        for t, r in ((lo, r_lo), (hi, r_hi)):
            w = r / tot
            if t in index:
                rows.append(i)
                cols.append(index[t])
                vals.append(-w)
            else:
                rhs[i] += w * bvals[t]
    A = sp.csr_matrix((vals, (rows, cols)), shape=(len(order), len(order)))
    h = spla.spsolve(A, rhs)

    values = {b: float(h[index[b]]) for b in order}
    values.update(bvals)
    residual = 0.0
    for b in order:
        (lo, r_lo), (hi, r_hi) = nbrs[b]
        mean = (r_lo * values[lo] + r_hi * values[hi]) / (r_lo + r_hi)
        residual = max(residual, abs(values[b] - mean))
    return HarmonicField(
        values=values,
        interior=inside,
        boundary=boundary,
        boundary_values=bvals,
        residual=residual,
        scale_n=scale_n,
        window=window,
    )


def _window_radius_for(params: Params, scale_n: int, reach: float) -> int:
    """Lattice radius so that the scaled window covers |z| <= reach plus slack."""
    tri = params.triangle
    u = tri.a * tri.alpha / 2.0
    v = -tri.c * tri.gamma / 2.0
    mat = np.array([[u.real, v.real], [u.imag, v.imag]])
    opnorm_inv = 1.0 / np.linalg.svd(mat, compute_uv=False)[-1]
    return int(math.ceil(scale_n * reach * opnorm_inv)) + 6


@dataclass
class ConvergenceRow:
    n: int
    max_error: float
    errors: list


def dirichlet_convergence(
    params: Params,
    domain,
    f: Callable[[complex], float],
    n_list: Sequence[int],
    probes: Sequence[complex],
) -> list[ConvergenceRow]:
    """Probe errors of the discrete Dirichlet solution across scales."""
    rows = []
    reach = max(abs(p) for p in probes) + 1.5
    if isinstance(domain, Disc):
        reach = abs(domain.center) + domain.radius + 0.5
    for n in n_list:
        window = TGraphWindow(params, _window_radius_for(params, n, reach))
        fld = dirichlet_solve(window, n, domain, f)
        errs = []
        for pz in probes:
            b, val = fld.value_at(pz)
            errs.append(abs(val - f(fld.position(b))))
        rows.append(ConvergenceRow(n=n, max_error=max(errs), errors=errs))
    return rows
