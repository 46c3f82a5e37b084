import math

import numpy as np
import pytest

from paraspec.homogeneous import ModularPoint, TwistedPoint, frames_from_elements, horocycle, reduce
from paraspec.twisted import TwistedSystem, cocycle_a, theta_advance, theta_advance_batch, twisted_flow


def circ(a, b):
    d = (a - b) % 1.0
    return min(d, 1.0 - d)


def random_point(rs):
    return ModularPoint.from_z(complex(rs.uniform(-0.5, 0.5), rs.uniform(0.9, 4.0)), rs.uniform(0, math.pi))


def test_constant_alpha_advances_by_t(tc0):
    p = TwistedPoint(ModularPoint.from_z(0.1 + 1.3j), 0.25)
    q = twisted_flow(p, 3.375, tc0)
    assert q.theta == (0.25 + 3.375) % 1.0
    assert cocycle_a(p.base, 12.0, tc0) == 0.0


def test_zero_time_identity(tc01):
    p = TwistedPoint(ModularPoint.from_z(0.1 + 1.3j), 0.7)
    assert twisted_flow(p, 0.0, tc01) == p


def test_group_law(tc01, rs):
    for _ in range(10):
        p = TwistedPoint(random_point(rs), rs.uniform())
        t, t2 = rs.uniform(-20, 20, 2)
        one = twisted_flow(p, t + t2, tc01)
        two = twisted_flow(twisted_flow(p, t, tc01), t2, tc01)
        assert abs(one.base.z - two.base.z) < 1e-8
        assert circ(one.theta, two.theta) < 1e-8


def test_theta_advance_additivity(tc01, rs):
    worst = 0.0
    for _ in range(100):
        x = random_point(rs)
        t, t2 = rs.uniform(0, 30, 2)
        y = reduce(horocycle(x.rep, t))
        worst = max(worst, abs(theta_advance(x, t + t2, tc01)
                               - theta_advance(x, t, tc01) - theta_advance(y, t2, tc01)))
    assert worst < 1e-8


def test_cocycle_a_additivity(tc01, rs):
    worst = 0.0
    for _ in range(100):
        x = random_point(rs)
        t, t2 = rs.uniform(0, 30, 2)
        y = reduce(horocycle(x.rep, t))
        worst = max(worst, abs(cocycle_a(x, t + t2, tc01) - cocycle_a(x, t, tc01) - cocycle_a(y, t2, tc01)))
    assert worst < 1e-8


def test_cocycle_a_refinement(tc01):
    x = ModularPoint.from_z(0.2 + 1.1j, 0.4)
    assert cocycle_a(x, 10.0, tc01, tol=1e-9) == pytest.approx(cocycle_a(x, 10.0, tc01, tol=1e-12), abs=1e-8)


def test_batch_matches_scalar(tc01, rs):
    pts = [random_point(rs) for _ in range(5)]
    b = theta_advance_batch(frames_from_elements([p.rep for p in pts]), 15.0, tc01)
    for p, v in zip(pts, b):
        assert v == pytest.approx(theta_advance(p, 15.0, tc01), abs=1e-9)


def test_a_is_theta_minus_t(tc01):
    x = ModularPoint.from_z(-0.3 + 2.0j, 1.0)
    assert cocycle_a(x, 8.0, tc01) == pytest.approx(theta_advance(x, 8.0, tc01) - 8.0, abs=1e-9)


def test_describe(tc01):
    assert "n = 2" in TwistedSystem(tc01, 2).describe()
    np.testing.assert_equal(TwistedPoint(ModularPoint.from_z(1j), 1.25).theta, 0.25)
