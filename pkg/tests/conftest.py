import math

import pytest

from tgraph.construction import Params, Triangle, build_window


@pytest.fixture(scope="session")
def equilateral():
    return Triangle.equilateral()


@pytest.fixture(scope="session")
def params(equilateral):
    return Params.from_angle(equilateral, 0.37)


@pytest.fixture(scope="session")
def scalene():
    # generic-looking triangle with irrational-ish angles
    return Triangle.from_angles([0.0, 2.1, 4.3])


@pytest.fixture(scope="session")
def scalene_params(scalene):
    return Params.from_angle(scalene, 0.53)


@pytest.fixture(scope="session")
def window10(params):
    return build_window(params, 10)


@pytest.fixture(scope="session")
def window20(params):
    return build_window(params, 20)


def random_generic_setups(rng, count, radius=12, margin=5e-4):
    """Random (triangle, lambda) pairs kept away from exact degeneracy."""
    from tgraph.construction import genericity_margin

    out = []
    while len(out) < count:
        gaps = rng.uniform(0.45 * math.pi, 0.85 * math.pi, size=3)
        gaps *= 2 * math.pi / gaps.sum()
        if gaps.max() >= 0.85 * math.pi:
            continue
        t0 = rng.uniform(0, 2 * math.pi)
        angles = [t0, t0 + gaps[0], t0 + gaps[0] + gaps[1]]
        tri = Triangle.from_angles(angles)
        lam = rng.uniform(0, 2 * math.pi)
        p = Params.from_angle(tri, lam)
        if genericity_margin(p, radius) > margin:
            out.append(p)
    return out
