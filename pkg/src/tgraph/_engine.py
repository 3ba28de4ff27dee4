"""Vectorized ensemble driver for the balanced walk.

The walk never needs a global graph: the segment through the vertex of black
coordinates (m, n) is determined by the local phase
phi = arg(lambda) + m*theta1 + n*theta2.  Signed positions of the three
corner images along the unit direction alpha*mu are

    t_UL = 0,   t_UR = a cos(phi),   t_B = -b Re(conj(mu) beta/alpha),

and the walk jumps from the median corner to the other two with rates equal
to the inverse gaps.

Randomness contract (shared with walk.step): walker i consumes the uniform
stream of Philox(key=seed or (seed, salt)).jumped(i) two values per jump,
waiting time -log1p(-u1)/(r+ + r-) and destination "+" (larger signed
position) iff u2 < r+/(r+ + r-).  Ensembles are therefore reproducible and
independent of batching or thread order.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

STATUS_RUNNING = 0
STATUS_DONE = 1
STATUS_EXITED = 2
STATUS_DEGENERATE = 3

_TIE_ABORT = 1e-12


@njit(cache=True, inline="always")
def _corner_ts(phase, a, b, qbr, qbi):
    # t of corners [bottom, upper-right, upper-left] along alpha*mu
    t_ur = a * math.cos(phase)
    t_b = -b * (qbr * math.cos(phase) + qbi * math.sin(phase))
    return t_b, t_ur, 0.0


@njit(cache=True, inline="always")
def _median_idx(t0, t1, t2):
    if (t1 - t0) * (t2 - t0) <= 0.0:
        return 0
    if (t0 - t1) * (t2 - t1) <= 0.0:
        return 1
    return 2


@njit(cache=True, inline="always")
def _interior_role(phase, a, b, qbr, qbi):
    t0, t1, t2 = _corner_ts(phase, a, b, qbr, qbi)
    return _median_idx(t0, t1, t2)


@njit(cache=True, parallel=True)
def _walk_chunk(
    m, n, x, y, time, status, used,
    ubuf, horizon, exit_r2, cx, cy,
    lam_phase, theta1, theta2, a, b, qbr, qbi, alpha_phase,
):
    nu = ubuf.shape[1]
    for i in prange(m.shape[0]):
        if status[i] != STATUS_RUNNING:
            continue
        mi, ni = m[i], n[i]
        xi, yi = x[i], y[i]
        ti = time[i]
        k = used[i]
        st = STATUS_RUNNING
        while st == STATUS_RUNNING:
            if k + 2 > nu:
                break  # row exhausted; caller refills (k is always even)
            phase = lam_phase + mi * theta1 + ni * theta2
            tb, tur, tul = _corner_ts(phase, a, b, qbr, qbi)
            med = _median_idx(tb, tur, tul)
            if med == 0:
                t_int = tb
                t_o1, c_o1 = tur, 1
                t_o2, c_o2 = tul, 2
            elif med == 1:
                t_int = tur
                t_o1, c_o1 = tb, 0
                t_o2, c_o2 = tul, 2
            else:
                t_int = tul
                t_o1, c_o1 = tb, 0
                t_o2, c_o2 = tur, 1
            if t_o1 < t_o2:
                t_lo, c_lo, t_hi, c_hi = t_o1, c_o1, t_o2, c_o2
            else:
                t_lo, c_lo, t_hi, c_hi = t_o2, c_o2, t_o1, c_o1
            gap_lo = t_int - t_lo
            gap_hi = t_hi - t_int
            if gap_lo < _TIE_ABORT or gap_hi < _TIE_ABORT:
                st = STATUS_DEGENERATE
                break
            r_plus = 1.0 / gap_hi
            r_minus = 1.0 / gap_lo
            tot = r_plus + r_minus
            u1 = ubuf[i, k]
            u2 = ubuf[i, k + 1]
            k += 2
            wait = -math.log1p(-u1) / tot
            if ti + wait >= horizon:
                ti = horizon
                st = STATUS_DONE
                break
            ti += wait
            if u2 < r_plus / tot:
                corner = c_hi
                dt = gap_hi
            else:
                corner = c_lo
                dt = -gap_lo
            ux = math.cos(phase + alpha_phase)
            uy = math.sin(phase + alpha_phase)
            xi += dt * ux
            yi += dt * uy
            # dual coordinates of the chosen corner
            if corner == 0:
                dm, dn = mi + 1, ni - 1
            elif corner == 1:
                dm, dn = mi + 1, ni
            else:
                dm, dn = mi, ni
            # owner: the black face whose segment has this dual interior;
            # candidates are (dm,dn) role UL, (dm-1,dn) role UR, (dm-1,dn+1) role B
            found = -1
            if corner != 2:  # current face is not (dm, dn)
                ph = lam_phase + dm * theta1 + dn * theta2
                if _interior_role(ph, a, b, qbr, qbi) == 2:
                    found = 0
            if corner != 1:  # current face is not (dm-1, dn)
                ph = lam_phase + (dm - 1) * theta1 + dn * theta2
                if _interior_role(ph, a, b, qbr, qbi) == 1:
                    found = 1 if found < 0 else -2
            if corner != 0:  # current face is not (dm-1, dn+1)
                ph = lam_phase + (dm - 1) * theta1 + (dn + 1) * theta2
                if _interior_role(ph, a, b, qbr, qbi) == 0:
                    found = 2 if found < 0 else -2
            if found == 0:
                mi, ni = dm, dn
            elif found == 1:
                mi, ni = dm - 1, dn
            elif found == 2:
                mi, ni = dm - 1, dn + 1
            else:
                st = STATUS_DEGENERATE
                break
            if exit_r2 > 0.0:
                rx = xi - cx
                ry = yi - cy
                if rx * rx + ry * ry >= exit_r2:
                    st = STATUS_EXITED
                    break
        m[i], n[i] = mi, ni
        x[i], y[i] = xi, yi
        time[i] = ti
        status[i] = st
        used[i] = k


@njit(cache=True, parallel=True)
def _walk_chunk_table(
    state, x, y, time, status, used,
    ubuf, horizon, exit_r2, cx, cy,
    inv_tot, p_plus, dx_hi, dy_hi, dx_lo, dy_lo, nxt_hi, nxt_lo,
):
    nu = ubuf.shape[1]
    for i in prange(state.shape[0]):
        if status[i] != STATUS_RUNNING:
            continue
        s = state[i]
        xi, yi = x[i], y[i]
        ti = time[i]
        k = used[i]
        st = STATUS_RUNNING
        while st == STATUS_RUNNING:
            if k + 2 > nu:
                break
            u1 = ubuf[i, k]
            u2 = ubuf[i, k + 1]
            k += 2
            wait = -math.log1p(-u1) * inv_tot[s]
            if ti + wait >= horizon:
                ti = horizon
                st = STATUS_DONE
                break
            ti += wait
            if u2 < p_plus[s]:
                xi += dx_hi[s]
                yi += dy_hi[s]
                s = nxt_hi[s]
            else:
                xi += dx_lo[s]
                yi += dy_lo[s]
                s = nxt_lo[s]
            if exit_r2 > 0.0:
                rx = xi - cx
                ry = yi - cy
                if rx * rx + ry * ry >= exit_r2:
                    st = STATUS_EXITED
                    break
        state[i] = s
        x[i], y[i] = xi, yi
        time[i] = ti
        status[i] = st
        used[i] = k


class PeriodTable:
    """Per-state jump data for a periodic triangle: state = (m mod p)*q + (n mod q)."""

    def __init__(self, params, p, q):
        import cmath

        cst = _engine_constants(params)
        self.p, self.q = p, q
        n_states = p * q
        self.inv_tot = np.empty(n_states)
        self.p_plus = np.empty(n_states)
        self.dx_hi = np.empty(n_states)
        self.dy_hi = np.empty(n_states)
        self.dx_lo = np.empty(n_states)
        self.dy_lo = np.empty(n_states)
        self.nxt_hi = np.empty(n_states, dtype=np.int64)
        self.nxt_lo = np.empty(n_states, dtype=np.int64)
        self.rate_plus = np.empty(n_states)
        self.rate_minus = np.empty(n_states)
        a, b = cst["a"], cst["b"]
        qbr, qbi = cst["qbr"], cst["qbi"]

        def role(mm, nn):
            ph = cst["lam_phase"] + mm * cst["theta1"] + nn * cst["theta2"]
            return _interior_role.py_func(ph, a, b, qbr, qbi)

        # offsets (relative to the jumped-to dual vertex) of the two candidate
        # owner faces per corner, with the role the dual plays in each
        candidates = {
            0: (((0, 0), 2), ((-1, 0), 1)),
            1: (((0, 0), 2), ((-1, 1), 0)),
            2: (((-1, 0), 1), ((-1, 1), 0)),
        }
        for i in range(p):
            for j in range(q):
                s = i * q + j
                phase = cst["lam_phase"] + i * cst["theta1"] + j * cst["theta2"]
                tb, tur, tul = _corner_ts.py_func(phase, a, b, qbr, qbi)
                ts = (tb, tur, tul)
                med = _median_idx.py_func(tb, tur, tul)
                others = [c for c in range(3) if c != med]
                others.sort(key=lambda c: ts[c])
                c_lo, c_hi = others
                gap_lo = ts[med] - ts[c_lo]
                gap_hi = ts[c_hi] - ts[med]
                if min(gap_lo, gap_hi) < _TIE_ABORT:
                    raise ValueError(f"degenerate segment at state ({i},{j})")
                r_plus, r_minus = 1.0 / gap_hi, 1.0 / gap_lo
                self.rate_plus[s] = r_plus
                self.rate_minus[s] = r_minus
                self.inv_tot[s] = 1.0 / (r_plus + r_minus)
                self.p_plus[s] = r_plus / (r_plus + r_minus)
                ux = math.cos(phase + cst["alpha_phase"])
                uy = math.sin(phase + cst["alpha_phase"])
                self.dx_hi[s] = gap_hi * ux
                self.dy_hi[s] = gap_hi * uy
                self.dx_lo[s] = -gap_lo * ux
                self.dy_lo[s] = -gap_lo * uy
                for which, corner in (("hi", c_hi), ("lo", c_lo)):
                    if corner == 0:
                        dm, dn = i + 1, j - 1
                    elif corner == 1:
                        dm, dn = i + 1, j
                    else:
                        dm, dn = i, j
                    owner = None
                    for (om, on), want in candidates[corner]:
                        if role(dm + om, dn + on) == want:
                            if owner is not None:
                                raise ValueError(f"double owner at state ({i},{j})")
                            owner = (dm + om, dn + on)
                    if owner is None:
                        raise ValueError(f"no owner at state ({i},{j})")
                    nxt = (owner[0] % p) * q + (owner[1] % q)
                    if which == "hi":
                        self.nxt_hi[s] = nxt
                    else:
                        self.nxt_lo[s] = nxt

    def state_of(self, m, n):
        return (m % self.p) * self.q + (n % self.q)


def _engine_constants(params):
    tri = params.triangle
    import cmath

    qb = tri.beta / tri.alpha
    return dict(
        lam_phase=cmath.phase(params.lam),
        theta1=params.theta1,
        theta2=params.theta2,
        a=tri.a,
        b=tri.b,
        qbr=qb.real,
        qbi=qb.imag,
        alpha_phase=cmath.phase(tri.alpha),
    )


def _maybe_period_table(params, max_states: int = 4096):
    fracs = params.triangle.angle_fracs
    if fracs is None:
        return None
    from .periodic import detect_period

    period = detect_period(params.triangle)
    if period is None or period[0] * period[1] > max_states:
        return None
    try:
        return PeriodTable(params, period[0], period[1])
    except ValueError:
        return None


def start_position(params, x0) -> complex:
    """Plane position of the vertex with black coordinates x0 (= v(b))."""
    from .construction import psi_value
    from .lattice import DualVertex

    cst = _engine_constants(params)
    phase = cst["lam_phase"] + x0.m * cst["theta1"] + x0.n * cst["theta2"]
    tb, tur, tul = _corner_ts.py_func(phase, cst["a"], cst["b"], cst["qbr"], cst["qbi"])
    med = _median_idx.py_func(tb, tur, tul)
    duals = [
        DualVertex(x0.m + 1, x0.n - 1),
        DualVertex(x0.m + 1, x0.n),
        DualVertex(x0.m, x0.n),
    ]
    return psi_value(duals[med], params)


def run_ensemble(
    params,
    x0,
    n_walks: int,
    horizon: float,
    seed: int,
    *,
    salt: int = 0,
    exit_radius: float | None = None,
    chunk: int = 2048,
    batch: int = 4096,
):
    """Final states of n_walks independent walks from x0.

    Returns (positions, times, status): positions are absolute plane
    coordinates at min(horizon, exit time); status marks how each walker
    stopped.  Bit-reproducible from (params, x0, seed, salt) regardless of
    chunk/batch sizes.
    """
    cst = _engine_constants(params)
    p0 = start_position(params, x0)
    key = seed if salt == 0 else np.array([seed, salt], dtype=np.uint64)
    exit_r2 = -1.0 if exit_radius is None else float(exit_radius) ** 2
    table = _maybe_period_table(params)

    out_pos = np.empty(n_walks, dtype=np.complex128)
    out_time = np.empty(n_walks, dtype=np.float64)
    out_status = np.empty(n_walks, dtype=np.uint8)

    base = np.random.Philox(key=key)
    for lo in range(0, n_walks, batch):
        hi = min(n_walks, lo + batch)
        nb = hi - lo
        gens = [np.random.Generator(base.jumped(i)) for i in range(lo, hi)]
        m = np.full(nb, x0.m, dtype=np.int64)
        n = np.full(nb, x0.n, dtype=np.int64)
        if table is not None:
            state = np.full(nb, table.state_of(x0.m, x0.n), dtype=np.int64)
        x = np.full(nb, p0.real, dtype=np.float64)
        y = np.full(nb, p0.imag, dtype=np.float64)
        time = np.zeros(nb, dtype=np.float64)
        status = np.zeros(nb, dtype=np.uint8)
        used = np.full(nb, 2 * chunk, dtype=np.int64)  # force initial fill
        ubuf = np.empty((nb, 2 * chunk), dtype=np.float64)
        while True:
            active = status == STATUS_RUNNING
            if not active.any():
                break
            for i in np.flatnonzero(active & (used >= 2 * chunk - 1)):
                gens[i].random(out=ubuf[i])
                used[i] = 0
            if table is not None:
                _walk_chunk_table(
                    state, x, y, time, status, used, ubuf,
                    float(horizon), exit_r2, p0.real, p0.imag,
                    table.inv_tot, table.p_plus,
                    table.dx_hi, table.dy_hi, table.dx_lo, table.dy_lo,
                    table.nxt_hi, table.nxt_lo,
                )
            else:
                _walk_chunk(
                    m, n, x, y, time, status, used, ubuf,
                    float(horizon), exit_r2, p0.real, p0.imag,
                    cst["lam_phase"], cst["theta1"], cst["theta2"],
                    cst["a"], cst["b"], cst["qbr"], cst["qbi"], cst["alpha_phase"],
                )
        out_pos[lo:hi] = x + 1j * y
        out_time[lo:hi] = time
        out_status[lo:hi] = status
    return out_pos, out_time, out_status
