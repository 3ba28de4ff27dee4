"""Periodic T-graphs: period detection from exact rational angles, the finite
quotient chain of the environment seen from the walker, stationary measures,
the L2 density diagnostic, and the regeneration-block CLT estimator.

Rational angles must be supplied exactly (fractions of pi on the Triangle);
no floating-point root-of-unity detection is attempted.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np
import scipy.sparse as sp
import scipy.sparse.csgraph as csgraph
import scipy.sparse.linalg as spla

from . import _engine
from .analysis import CovarianceEstimate
from .construction import Params, Triangle
from .lattice import BLACK, HexCoord


def detect_period(triangle: Triangle) -> Optional[tuple[int, int]]:
    """Smallest (p, q) with (beta/gamma)^p = (beta/alpha)^q = 1, if any.

    Requires exact angle fractions; triangles built from float data return
    None.  The joint period lattice may be finer than the rectangular one
    spanned by (p,0) and (0,q); the rectangular lattice is always valid.
    """
    fracs = triangle.angle_fracs
    if fracs is None:
        return None
    fa, fb, fc = fracs
    r1 = Fraction(fb - fc, 2)
    r2 = Fraction(fb - fa, 2)
    if r1 == 0 or r2 == 0:
        return None
    return (r1.denominator, r2.denominator)


@dataclass
class QuotientChain:
    """Jump chain of the walk folded onto one fundamental domain.

    States are black faces of the p x q cell, indexed (m % p) * q + (n % q);
    the transition kernel has two targets per state.  Displacements and
    holding rates are tracked so continuous-time quantities can be lifted.
    """

    params: Params
    p: int
    q: int
    matrix: sp.csr_matrix
    plus_target: np.ndarray
    minus_target: np.ndarray
    p_plus: np.ndarray
    disp_plus: np.ndarray  # complex displacement of the plus jump
    disp_minus: np.ndarray
    total_rate: np.ndarray
    n_closed_classes: int
    recurrent: np.ndarray  # bool per state
    period_vectors: tuple[complex, complex]  # plane translations of the cell

    @property
    def n_states(self) -> int:
        return self.p * self.q

    def state_of(self, m: int, n: int) -> int:
        return (m % self.p) * self.q + (n % self.q)


def quotient_chain(params: Params, period: tuple[int, int]) -> QuotientChain:
    """Build the folded jump chain for a detected period."""
    p, q = period
    table = _engine.PeriodTable(params, p, q)
    n_states = p * q
    rows = np.repeat(np.arange(n_states), 2)
    cols = np.empty(2 * n_states, dtype=np.int64)
    vals = np.empty(2 * n_states)
    cols[0::2] = table.nxt_hi
    cols[1::2] = table.nxt_lo
    vals[0::2] = table.p_plus
    vals[1::2] = 1.0 - table.p_plus
    matrix = sp.csr_matrix((vals, (rows, cols)), shape=(n_states, n_states))
    n_comp, labels = csgraph.connected_components(matrix, directed=True, connection="strong")
    # a class is closed (recurrent) iff no transition leaves it
    leaves = np.zeros(n_comp, dtype=bool)
    for s in range(n_states):
        for t in (table.nxt_hi[s], table.nxt_lo[s]):
            if labels[t] != labels[s]:
                leaves[labels[s]] = True
    closed = ~leaves
    recurrent = closed[labels]
    disp_plus = table.dx_hi + 1j * table.dy_hi
    disp_minus = table.dx_lo + 1j * table.dy_lo
    from .construction import psi_value
    from .lattice import DualVertex

    vecs = (psi_value(DualVertex(p, 0), params), psi_value(DualVertex(0, q), params))
    return QuotientChain(
        params=params,
        p=p,
        q=q,
        matrix=matrix,
        plus_target=table.nxt_hi.copy(),
        minus_target=table.nxt_lo.copy(),
        p_plus=table.p_plus.copy(),
        disp_plus=disp_plus,
        disp_minus=disp_minus,
        total_rate=1.0 / table.inv_tot,
        n_closed_classes=int(closed.sum()),
        recurrent=recurrent,
        period_vectors=vecs,
    )


@dataclass
class StationaryMeasure:
    probabilities: np.ndarray
    residual: float


def stationary(chain: QuotientChain) -> StationaryMeasure:
    """Solve pi P = pi for the jump chain (direct sparse solve)."""
    if chain.n_closed_classes != 1:
        raise ValueError(
            f"chain has {chain.n_closed_classes} closed classes; stationary "
            "measure not unique"
        )
    n = chain.n_states
    A = (chain.matrix.T - sp.identity(n, format="csr")).tolil()
    A[0, :] = 1.0  # normalization row
    rhs = np.zeros(n)
    rhs[0] = 1.0
    pi = spla.spsolve(A.tocsr(), rhs)
    pi = np.where(np.abs(pi) < 1e-15, 0.0, pi)
    if np.min(pi) < -1e-12:
        raise ValueError(f"stationary solve produced negative mass {np.min(pi)}")
    pi = np.clip(pi, 0.0, None)
    pi /= pi.sum()
    residual = float(np.max(np.abs(pi @ chain.matrix - pi)))
    if residual > 1e-12:
        raise ValueError(f"stationary residual {residual} above 1e-12")
    return StationaryMeasure(probabilities=pi, residual=residual)


def density_diagnostic(measure: StationaryMeasure, chain: QuotientChain) -> float:
    """L2(P_n) norm of dQ_n/dP_n with P_n uniform on the fundamental domain."""
    pi = measure.probabilities
    return float(math.sqrt(chain.n_states * float(np.sum(pi * pi))))


@dataclass
class RegenerationResult:
    estimate: CovarianceEstimate
    displacements: np.ndarray  # (k, 2) per block
    durations: np.ndarray  # (k,) continuous-time block lengths
    block_steps: np.ndarray  # (k,) jump counts


def _simulate_block(chain: QuotientChain, s0: int, gen, max_steps: int = 10 ** 7):
    """One excursion from s0 back to s0; returns (displacement, duration, steps)."""
    s = s0
    disp = 0.0 + 0.0j
    duration = 0.0
    steps = 0
    while True:
        u = gen.random(2)
        duration += -math.log1p(-u[0]) / chain.total_rate[s]
        if u[1] < chain.p_plus[s]:
            disp += chain.disp_plus[s]
            s = int(chain.plus_target[s])
        else:
            disp += chain.disp_minus[s]
            s = int(chain.minus_target[s])
        steps += 1
        if s == s0:
            return disp, duration, steps
        if steps >= max_steps:
            raise RuntimeError("block did not return; is x0 recurrent?")


def regeneration_clt(
    params: Params, x0: HexCoord, n_blocks: int, seed: int
) -> RegenerationResult:
    """Covariance of the limiting Brownian motion from iid return blocks.

    Block displacements between successive visits to x0's quotient state are
    iid; the estimate is their covariance divided by the mean block duration.
    Each block runs on its own stream (Philox jumped by the block index).
    """
    if x0.color != BLACK:
        raise ValueError("x0 must be a black-vertex coordinate")
    period = detect_period(params.triangle)
    if period is None:
        raise ValueError("triangle has no exact rational angles; not periodic")
    chain = quotient_chain(params, period)
    s0 = chain.state_of(x0.m, x0.n)
    if not chain.recurrent[s0]:
        raise ValueError(f"start state {x0!r} is transient in the quotient chain")
    base = np.random.Philox(key=seed)
    disps = np.empty((n_blocks, 2))
    durs = np.empty(n_blocks)
    steps = np.empty(n_blocks, dtype=np.int64)
    for i in range(n_blocks):
        gen = np.random.Generator(base.jumped(i))
        d, t, k = _simulate_block(chain, s0, gen)
        disps[i] = (d.real, d.imag)
        durs[i] = t
        steps[i] = k
    tau = durs.mean()
    S = np.cov(disps.T, ddof=1)
    M = S / tau
    # delete-one jackknife of S_ab / tau-bar
    k = n_blocks
    mu = disps.mean(axis=0)
    se = np.zeros((2, 2))
    for a in range(2):
        for b in range(2):
            ss = float(disps[:, a] @ disps[:, b])
            mu_i = (k * mu - disps) / (k - 1)
            ss_i = ss - disps[:, a] * disps[:, b]
            s_i = (ss_i - (k - 1) * mu_i[:, a] * mu_i[:, b]) / (k - 2)
            tau_i = (k * tau - durs) / (k - 1)
            theta = s_i / tau_i
            se[a, b] = math.sqrt((k - 1) / k * float(np.sum((theta - theta.mean()) ** 2)))
    est = CovarianceEstimate(
        M=M, stderr=se, n_walks=n_blocks, n_steps=float(durs.sum()), samples=None
    )
    return RegenerationResult(
        estimate=est, displacements=disps, durations=durs, block_steps=steps
    )
