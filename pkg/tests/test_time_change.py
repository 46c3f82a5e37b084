from dataclasses import replace
import math

import mpmath
import numpy as np
import pytest

from paraspec import rng
from paraspec.errors import PositivityViolated
from paraspec.homogeneous import ModularPoint, frames_from_elements, horocycle, reduce
from paraspec.observables import discriminant_max
from paraspec.time_change import (G_batch, G_of_t, kushnirenko_verdict, monte_carlo_mass, normalize_alpha,
                                  sample_fundamental_domain, sampled_xlog, time_changed_flow,
                                  x_log_derivative)
from paraspec.homogeneous import frames_z

from test_observables import mp_petersson

POINTS = [ModularPoint.from_z(z, th) for z, th in
          [(0.1 + 1.1j, 0.3), (-0.3 + 1.7j, 1.2), (0.45 + 0.95j, 2.0), (0.0 + 2.5j, 0.0)]]


def test_epsilon_zero_is_constant_one(tc0):
    assert tc0.c == 1.0 and tc0.is_constant()
    assert np.all(tc0.value(np.array([1j, 0.2 + 3j])) == 1.0)


def test_positivity_violation():
    with pytest.raises(PositivityViolated):
        normalize_alpha("discriminant", 0.95, n_samples=1000)


def test_normalization_is_exact_on_its_own_sample(tc01):
    mass, _ = monte_carlo_mass(tc01, tc01.n_samples, tc01.seed ^ rng.STREAM_NORMALIZATION)
    assert mass == pytest.approx(1.0, abs=1e-12)


def test_mass_one_on_independent_sample(tc01):
    mass, se = monte_carlo_mass(tc01, tc01.n_samples, 999)
    assert abs(mass - 1.0) < 2.0 * math.hypot(se, tc01.c_stderr / tc01.c)


def test_c_stable_across_seeds(tc01):
    other = normalize_alpha("discriminant", 0.1, seed=2)
    assert abs(other.c - tc01.c) < 3.0 * math.hypot(other.c_stderr, tc01.c_stderr)


def test_sampling_is_in_domain_and_index_addressed():
    fr = sample_fundamental_domain(np.arange(500), 7)
    z = frames_z(fr)
    assert np.all(np.abs(z.real) <= 0.5) and np.all(np.abs(z) >= 1.0) and np.all(z.imag <= 50)
    sub = sample_fundamental_domain(np.arange(100, 200), 7)
    np.testing.assert_array_equal(frames_z(sub), z[100:200])


def test_constant_clock_is_identity_time(tc0):
    p, sigma = time_changed_flow(POINTS[0], 12.5, tc0)
    assert sigma == 12.5
    assert p.z == pytest.approx(reduce(horocycle(POINTS[0].rep, 12.5)).z, abs=1e-12)


def test_flow_property(tc01):
    for x in POINTS[:2]:
        for t, t2 in [(3.0, 5.0), (40.0, 60.0)]:
            direct, _ = time_changed_flow(x, t + t2, tc01)
            mid, _ = time_changed_flow(x, t, tc01)
            two, _ = time_changed_flow(mid, t2, tc01)
            assert abs(direct.z - two.z) < 1e-6


def test_time_reversal(tc01):
    for x in POINTS:
        fwd, _ = time_changed_flow(x, 37.0, tc01)
        back, _ = time_changed_flow(fwd, -37.0, tc01)
        assert abs(back.z - x.z) < 1e-6


def mp_xlog(tc, p, r=0.0):
    """d/dr log(1 + eps u(g a_r i)) by mpmath numerical differentiation of the full product."""
    g = p.rep
    umax = discriminant_max()

    def f(r):
        e = mpmath.exp(r / 2)
        z = (g.a * e * 1j + g.b / e) / (g.c * e * 1j + g.d / e)
        return mpmath.log(1 + tc.epsilon * mp_petersson(complex(z)) / umax)

    with mpmath.workdps(30):
        return float(mpmath.diff(f, r, h=mpmath.mpf("1e-4")))


def test_x_log_derivative_against_independent_differentiation(tc01):
    for p in POINTS:
        d = x_log_derivative(tc01, p)
        assert d.value == pytest.approx(mp_xlog(tc01, p), abs=1e-7)


def test_x_log_derivative_constant_and_scaling(tc0, tc01):
    assert x_log_derivative(tc0, POINTS[0]).value == 0.0
    scaled = replace(tc01, c=3.7 * tc01.c)
    for p in POINTS:
        assert x_log_derivative(scaled, p).value == x_log_derivative(tc01, p).value


def test_x_log_derivative_step_refinement(tc01):
    for p in POINTS:
        vals = [x_log_derivative(tc01, p, h) for h in (1e-2, 5e-3, 2.5e-3)]
        spread = max(v.value for v in vals) - min(v.value for v in vals)
        assert spread <= max(v.error for v in vals) + 1e-9


def test_G_constant(tc0):
    assert G_of_t(POINTS[0], 17.0, tc0) == -17.0


def test_G_orbit_cocycle(tc01):
    for x in POINTS[:3]:
        t, t2 = 20.0, 35.0
        mid, _ = time_changed_flow(x, t, tc01)
        lhs = G_of_t(x, t + t2, tc01, tol_rel=1e-9)
        rhs = G_of_t(x, t, tc01, tol_rel=1e-9) + G_of_t(mid, t2, tc01, tol_rel=1e-9)
        assert abs(lhs - rhs) < 1e-5


def test_G_batch_matches_scalar(tc01):
    fr = frames_from_elements([p.rep for p in POINTS])
    batch = G_batch(tc01, fr, 30.0)
    for p, v in zip(POINTS, batch):
        assert v == pytest.approx(G_of_t(p, 30.0, tc01), abs=1e-6)


def test_kushnirenko_zero(tc0):
    k = kushnirenko_verdict(tc0, 200, 3)
    assert k.sup_estimate == 0.0 and k.verdict == "PASS"


def test_kushnirenko_monotone_in_epsilon():
    sups = [kushnirenko_verdict(normalize_alpha("discriminant", e, seed=4), 1000, 4).sup_estimate
            for e in (0.05, 0.1, 0.2)]
    assert sups[0] < sups[1] < sups[2]


def test_kushnirenko_nested_samples(tc01):
    small = kushnirenko_verdict(tc01, 500, 8)
    big = kushnirenko_verdict(tc01, 1000, 8)
    # the first 500 points are shared, so the estimate can only grow
    assert big.sup_estimate >= small.sup_estimate - small.spread
    d1, err = sampled_xlog(tc01, 64, 8)
    assert np.max(err) < 1e-6
