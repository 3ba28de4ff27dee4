import math
from fractions import Fraction

import numpy as np
import pytest

from tgraph.analysis import empirical_covariance, covariance_zscores
from tgraph.construction import Params, Triangle, psi_value
from tgraph.lattice import DualVertex, black
from tgraph.periodic import (
    density_diagnostic,
    detect_period,
    quotient_chain,
    regeneration_clt,
    stationary,
)


def test_detect_period_equilateral(equilateral):
    # oracle: order of exp(+-2 pi i / 3) is 3
    assert detect_period(equilateral) == (3, 3)


def test_detect_period_irrational(scalene):
    assert detect_period(scalene) is None


def test_detect_period_mixed_fractions():
    tri = Triangle.from_angles([Fraction(0), Fraction(3, 4), Fraction(31, 24)])
    p, q = detect_period(tri)
    t1 = math.pi * float(Fraction(3, 4) - Fraction(31, 24))
    t2 = math.pi * float(Fraction(3, 4))
    assert abs((p * t1) % (2 * math.pi)) < 1e-9 or abs((p * t1) % (2 * math.pi) - 2 * math.pi) < 1e-9
    assert abs((q * t2) % (2 * math.pi)) < 1e-9 or abs((q * t2) % (2 * math.pi) - 2 * math.pi) < 1e-9


def test_psi_periodicity(params):
    period = detect_period(params.triangle)
    p, q = period
    shifts = []
    rng = np.random.default_rng(1)
    for _ in range(100):
        m, n = (int(v) for v in rng.integers(-8, 9, size=2))
        shifts.append(
            psi_value(DualVertex(m + p, n), params) - psi_value(DualVertex(m, n), params)
        )
    assert max(abs(s - shifts[0]) for s in shifts) < 1e-10


def test_quotient_chain_row_sums_and_recurrence(params):
    chain = quotient_chain(params, detect_period(params.triangle))
    rows = np.asarray(chain.matrix.sum(axis=1)).ravel()
    assert np.max(np.abs(rows - 1.0)) < 1e-12
    assert chain.n_closed_classes == 1
    assert chain.recurrent.all()


def test_lifted_trajectory_matches_direct_walk(params):
    # coupled-simulation oracle: advancing the quotient chain with the walk's
    # own uniform stream reproduces a direct simulation step for step
    from tgraph.walk import simulate

    chain = quotient_chain(params, detect_period(params.triangle))
    traj = simulate(params, black(0, 0), 2000.0, seed=303)
    gen = np.random.Generator(np.random.Philox(key=303))
    s = chain.state_of(0, 0)
    ok_steps = 0
    for st in traj.states[1:]:
        u = gen.random(2)
        if u[1] < chain.p_plus[s]:
            s = int(chain.plus_target[s])
        else:
            s = int(chain.minus_target[s])
        assert s == chain.state_of(st.vertex.m, st.vertex.n)
        ok_steps += 1
    assert ok_steps >= 10000


def test_stationary_uniform_for_equilateral(params):
    chain = quotient_chain(params, (3, 3))
    pi = stationary(chain)
    assert pi.residual <= 1e-12
    # doubly stochastic here: uniform stationary law
    assert np.max(np.abs(pi.probabilities - 1.0 / 9.0)) < 1e-12


def test_stationary_relabel_invariance(params):
    from tgraph.construction import rotate_lambda

    chain = quotient_chain(params, (3, 3))
    pi = stationary(chain).probabilities.reshape(3, 3)
    chain2 = quotient_chain(rotate_lambda(params, 1, 0), (3, 3))
    pi2 = stationary(chain2).probabilities.reshape(3, 3)
    assert np.max(np.abs(np.roll(pi, -1, axis=0) - pi2)) < 1e-12


def test_order3_symmetry_of_stationary(params):
    chain = quotient_chain(params, (3, 3))
    pi = stationary(chain).probabilities.reshape(3, 3)
    assert np.max(np.abs(pi - np.roll(pi, 1, axis=0))) < 1e-12
    assert np.max(np.abs(pi - np.roll(pi, 1, axis=1))) < 1e-12


def test_occupation_frequencies_match_stationary(params):
    chain = quotient_chain(params, (3, 3))
    pi = stationary(chain).probabilities
    gen = np.random.Generator(np.random.Philox(key=99))
    s = 0
    counts = np.zeros(chain.n_states)
    n_steps = 200000
    u = gen.random(2 * n_steps)
    for k in range(n_steps):
        if u[2 * k + 1] < chain.p_plus[s]:
            s = int(chain.plus_target[s])
        else:
            s = int(chain.minus_target[s])
        counts[s] += 1
    freq = counts / n_steps
    se = np.sqrt(pi * (1 - pi) / n_steps) * 4  # crude (correlated samples)
    assert np.all(np.abs(freq - pi) < 5 * se + 5e-3)


def test_density_diagnostic_formulas(params):
    chain = quotient_chain(params, (3, 3))
    pi = stationary(chain)
    assert abs(density_diagnostic(pi, chain) - 1.0) < 1e-12
    # point mass on one of N states has norm sqrt(N)
    from tgraph.periodic import StationaryMeasure

    point = np.zeros(chain.n_states)
    point[4] = 1.0
    assert abs(
        density_diagnostic(StationaryMeasure(point, 0.0), chain) - 3.0
    ) < 1e-12


def test_density_bounded_over_approximant_sweep():
    # rational-angle triangles approaching a fixed scalene triangle
    norms, periods = [], []
    for k in (6, 12, 24):
        tri = Triangle.from_angles(
            [Fraction(0), Fraction(2, 3) + Fraction(1, k), Fraction(4, 3) - Fraction(1, 2 * k)]
        )
        p = Params.from_angle(tri, 0.37)
        period = detect_period(tri)
        chain = quotient_chain(p, period)
        pi = stationary(chain)
        norms.append(density_diagnostic(pi, chain))
        periods.append(period)
    assert max(norms) < 10.0
    assert all(n >= 1.0 - 1e-12 for n in norms)  # Cauchy-Schwarz floor


def test_regeneration_blocks(params):
    reg = regeneration_clt(params, black(0, 0), 3000, seed=7)
    d = reg.displacements
    # iid sanity: lag-1 correlation consistent with zero
    for col in (d[:, 0], d[:, 1]):
        x, y = col[:-1], col[1:]
        r = np.corrcoef(x, y)[0, 1]
        assert abs(r) < 3.0 / math.sqrt(len(x))
    # block durations have an exponential tail
    probs = np.array([0.8, 0.9, 0.95, 0.98, 0.99])
    qs = np.quantile(reg.durations, probs)
    surv = np.log(1 - probs)
    slope = np.polyfit(qs, surv, 1)[0]
    corr = np.corrcoef(qs, surv)[0, 1]
    assert slope < 0 and corr < -0.97


def test_regeneration_agrees_with_monte_carlo(params):
    reg = regeneration_clt(params, black(0, 0), 4000, seed=8)
    est = empirical_covariance(params, black(0, 0), 4000, 300.0, seed=9)
    assert np.max(covariance_zscores(reg.estimate, est)) < 3.0


def test_regeneration_requires_periodicity(scalene_params):
    with pytest.raises(ValueError):
        regeneration_clt(scalene_params, black(0, 0), 100, seed=1)
