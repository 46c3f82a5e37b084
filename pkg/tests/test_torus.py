import math

from hypothesis import given, settings, strategies as st
import mpmath
import numpy as np
import pytest

from paraspec.errors import ConfigError, DimensionMismatch, GridTooCoarse
from paraspec.torus import (GOLDEN, FourierObservable, FurstenbergSpec, GridOperator, RotationSpec,
                            SkewProductSpec, TorusPoint, birkhoff_sum_map, circular_distance, correlation_map,
                            eta_tilde, furstenberg_apply, furstenberg_inverse, grid_points,
                            iterated_birkhoff_averages, rotation_birkhoff_averages, sparse_correlations,
                            u_chi_apply)

F2 = FurstenbergSpec(d=2, y=GOLDEN, b=((0, 0), (1, 0)), h=())


def skew(eta, k=1, b=1):
    return SkewProductSpec(y=GOLDEN, b=b, eta_lift=eta, k=k)


# ---------------------------------------------------------------------------
# maps


def test_single_step_example():
    assert furstenberg_apply(F2, TorusPoint((0.0, 0.0))).coords == pytest.approx((GOLDEN, 0.0))


def test_affine_iterate_closed_form(rs):
    x = rs.uniform(size=(16, 2))
    cur = x.copy()
    n = 1000
    for _ in range(n):
        cur = F2.apply_coords(cur)
    exp2 = (x[:, 1] + n * x[:, 0] + n * (n - 1) / 2 * GOLDEN) % 1.0
    assert np.max(circular_distance(cur[:, 1], exp2)) < 1e-10
    assert np.max(circular_distance(cur[:, 0], (x[:, 0] + n * GOLDEN) % 1.0)) < 1e-10


def test_smooth_iterate_against_high_precision():
    h1 = FourierObservable.cos_mode(1, 0.3) + FourierObservable.cos_mode(2, 0.1, 0.4)
    spec = FurstenbergSpec(d=2, y=GOLDEN, b=((0, 0), (1, 0)), h=(h1,))
    x = np.array([[0.123, 0.456]])
    with mpmath.workprec(128):
        y = (mpmath.sqrt(5) - 1) / 2
        a, b = mpmath.mpf("0.123"), mpmath.mpf("0.456")

        def h(v):
            out = mpmath.mpf(0)
            for (m,), c in h1.coeffs.items():
                out += mpmath.mpc(c.real, c.imag) * mpmath.exp(2j * mpmath.pi * m * v)
            return out.real

        for _ in range(50):
            a, b = (a + y) % 1, (b + a + h(a)) % 1
            x = spec.apply_coords(x)
        ref = (float(a), float(b))
    assert np.max(circular_distance(x[0], ref)) < 1e-9


@settings(max_examples=50, deadline=None)
@given(pts=st.lists(st.tuples(st.floats(0, 1, exclude_max=True), st.floats(0, 1, exclude_max=True),
                              st.floats(0, 1, exclude_max=True)), min_size=1, max_size=8),
       amp=st.floats(-0.5, 0.5), b32=st.integers(1, 3))
def test_inverse_roundtrip(pts, amp, b32):
    spec = FurstenbergSpec(d=3, y=GOLDEN, b=((0, 0, 0), (1, 0, 0), (2, b32, 0)),
                           h=(FourierObservable.cos_mode(1, amp), FourierObservable.cos_mode((1, 1), amp)))
    x = np.array(pts)
    back = spec.inverse_coords(spec.apply_coords(x))
    assert np.max(circular_distance(back, x)) < 1e-12


def test_point_helpers():
    p = furstenberg_apply(F2, TorusPoint((0.25, 0.5)))
    assert furstenberg_inverse(F2, p).coords == pytest.approx((0.25, 0.5))


def test_rejections():
    with pytest.raises(ConfigError):
        RotationSpec(0.5)
    with pytest.raises(ConfigError):
        skew(FourierObservable.zero(1), b=0)
    with pytest.raises(ConfigError):
        FurstenbergSpec(d=2, y=GOLDEN, b=((0, 1), (1, 0)), h=())
    with pytest.raises(ConfigError):
        FurstenbergSpec(d=2, y=GOLDEN, b=((0, 0), (0, 0)), h=())


@settings(max_examples=50, deadline=None)
@given(st.dictionaries(st.integers(-5, 5), st.complex_numbers(max_magnitude=3, allow_nan=False), max_size=5))
def test_real_observable_symmetry(c):
    f = FourierObservable(1, c)
    g = f + FourierObservable(1, {(-m[0],): a.conjugate() for m, a in f.coeffs.items()})
    real = FourierObservable(1, g.coeffs, real=True)
    for (m,), a in real.coeffs.items():
        assert abs(real.coeffs.get((-m,), 0j) - a.conjugate()) < 1e-12
    x = np.linspace(0, 1, 7)
    assert np.allclose(real.evaluate(x), g.evaluate(x).real)


# ---------------------------------------------------------------------------
# U_chi on grids


def test_u_chi_closed_form():
    n_grid, n = 1024, 100
    psi = np.ones(n_grid, complex)
    for _ in range(n):
        psi = u_chi_apply(F2, psi)
    x = np.arange(n_grid) / n_grid
    expected = np.exp(2j * math.pi * ((n * x + n * (n - 1) / 2 * GOLDEN) % 1.0))
    assert np.max(np.abs(psi - expected)) < 1e-10


def test_norm_preserved():
    op = GridOperator(F2, 2 ** 13)
    psi = FourierObservable.cos_mode(1, 1.0).on_grid(2 ** 13).astype(complex) + 0.5
    n0 = np.vdot(psi, psi).real
    for _ in range(1000):
        psi = op.apply(psi)
    assert abs(np.vdot(psi, psi).real / n0 - 1.0) < 1e-9


def test_negative_k_conjugates():
    eta = FourierObservable.cos_mode(1, 0.2)
    psi = (FourierObservable.cos_mode(1, 1.0) + FourierObservable.constant(1, 0.3)).on_grid(256)
    a = u_chi_apply(skew(eta, 1), psi)
    b = u_chi_apply(skew(eta, -1), psi)
    assert np.max(np.abs(a - b.conj())) < 1e-12


def test_grid_too_coarse_detected():
    op = GridOperator(F2, 64)
    psi = np.ones(64, complex)
    with pytest.raises(GridTooCoarse):
        for _ in range(64):
            psi = op.apply(psi)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        correlation_map(F2, FourierObservable.constant(2), 4, 8)


# ---------------------------------------------------------------------------
# correlations


def brute_force_correlations(spec, psi, N, n_pts):
    """c_n by pointwise iteration of the skew product at grid points (no FFTs)."""
    fs = spec.as_furstenberg() if isinstance(spec, SkewProductSpec) else spec
    x = np.arange(n_pts) / n_pts
    psi0 = psi.evaluate(x)
    cur = x.copy()
    cocycle = np.ones(n_pts, complex)
    out = [np.mean(np.abs(psi0) ** 2)]
    for _ in range(N):
        cocycle = cocycle * np.exp(2j * math.pi * fs.k * fs.phase(cur[:, None]))
        cur = (cur + fs.y) % 1.0
        out.append(np.mean(cocycle * psi.evaluate(cur) * np.conj(psi0)))
    return np.array(out)


def test_correlations_against_pointwise_iteration():
    eta = FourierObservable.cos_mode(1, 0.3) + FourierObservable.cos_mode(2, 0.1)
    psi = FourierObservable.constant(1, 1.0) + FourierObservable.cos_mode(1, 0.5)
    spec = skew(eta)
    s = correlation_map(spec, psi, 40, 10)
    ref = brute_force_correlations(spec, psi, 40, 4096)
    assert np.max(np.abs(s.values - ref)) < 1e-10
    assert s.values[0] == pytest.approx(psi.norm2_squared())


def test_affine_correlations_vanish():
    s = correlation_map(F2, FourierObservable.constant(1), 256, 11)
    assert np.max(np.abs(s.values[1:])) < 1e-9
    assert s.values[0] == 1.0
    exact = sparse_correlations(F2, FourierObservable.constant(1), 256)
    assert np.all(exact[1:] == 0)


def test_rotation_control_unit_modulus():
    s = correlation_map(RotationSpec(GOLDEN), FourierObservable.character(1), 512, 6)
    assert np.max(np.abs(np.abs(s.values) - 1.0)) < 1e-12


def test_u_chi_matches_sparse_for_affine_d3():
    spec = FurstenbergSpec(d=3, y=GOLDEN, b=((0, 0, 0), (1, 0, 0), (1, 1, 0)), h=(), j=3)
    psi = FourierObservable(2, {(0, 0): 1.0, (1, -1): 0.5, (0, 1): 0.25j})
    grid = correlation_map(spec, psi, 6, 7).values
    exact = sparse_correlations(spec, psi, 6)
    assert np.max(np.abs(grid - exact)) < 1e-12


# ---------------------------------------------------------------------------
# Birkhoff sums


def test_birkhoff_constant():
    f = FourierObservable.constant(1, 2.5)
    assert birkhoff_sum_map(f, RotationSpec(GOLDEN), TorusPoint((0.3,)), 77) == pytest.approx(2.5)


@pytest.mark.parametrize("m,n", [(1, 10), (3, 1000), (2, 12345)])
def test_birkhoff_character_modulus(m, n):
    f = FourierObservable.character(m)
    avg = birkhoff_sum_map(f, RotationSpec(GOLDEN), TorusPoint((0.1,)), n)
    expected = abs(math.sin(math.pi * m * n * GOLDEN)) / (n * abs(math.sin(math.pi * m * GOLDEN)))
    assert abs(abs(avg) - expected) < 1e-10


def test_closed_form_matches_iteration(rs):
    f = FourierObservable.cos_mode(1, 0.7) + FourierObservable.cos_mode(3, 0.2, 1.0)
    x = rs.uniform(size=5)
    times = [10, 100, 1000]
    closed = rotation_birkhoff_averages(f, GOLDEN, times, x, "backward")
    it = iterated_birkhoff_averages(f, RotationSpec(GOLDEN), times, x[:, None], "backward")
    assert np.max(np.abs(closed - it.real)) < 1e-10


def test_koksma_bound():
    f = FourierObservable.cos_mode(1, 1.0) + FourierObservable.cos_mode(2, 0.5)
    x = np.arange(32) / 32 + 0.01
    avg = iterated_birkhoff_averages(f, RotationSpec(GOLDEN), [10_000], x[:, None], "forward")
    assert np.max(np.abs(avg)) < 10 * f.max_frequency / 10_000


# ---------------------------------------------------------------------------
# eta tilde


def test_eta_tilde():
    assert eta_tilde(skew(FourierObservable.zero(1))).is_zero()
    et = eta_tilde(skew(FourierObservable.cos_mode(1, 0.3) + FourierObservable.constant(1, 4.0)))
    assert et.P().mean() == 0


def test_second_P_against_finite_differences():
    et = eta_tilde(skew(FourierObservable.cos_mode(1, 0.3) + FourierObservable.cos_mode(2, 0.1, 0.3)))
    x = np.linspace(0, 1, 11)
    pp = et.P().P().evaluate(x)
    errs = []
    for h in (1e-2, 5e-3):
        fd = -(et.evaluate(x + h) - 2 * et.evaluate(x) + et.evaluate(x - h)) / h ** 2
        errs.append(np.max(np.abs(fd - pp.real)))
    assert errs[1] < errs[0] / 3.5  # second order


def test_grid_points_shape():
    assert grid_points(4, 2).shape == (4, 4, 2)
