import math

from hypothesis import given, settings, strategies as st
import mpmath
import numpy as np
import pytest

from paraspec.errors import UnknownObservable
from paraspec.homogeneous import ModularPoint
from paraspec.observables import (discriminant, discriminant_max, eval_invariant_observable, eta_product,
                                  get, names, petersson_discriminant, truncation_bound)

RHO = complex(-0.5, math.sqrt(3) / 2)


def mp_petersson(z, dps=40):
    """(4 pi Im z)^6 |Delta(z)| from the untruncated q-Pochhammer product at high precision."""
    with mpmath.workdps(dps):
        z = mpmath.mpc(z.real, z.imag)
        q = mpmath.exp(2j * mpmath.pi * z)
        return float((4 * mpmath.pi * z.imag) ** 6 * abs(q) * abs(mpmath.qp(q)) ** 24)


def random_gamma(rs, size=6):
    while True:
        a, b, c, d = rs.integers(-size, size + 1, 4)
        if a * d - b * c == 1:
            return int(a), int(b), int(c), int(d)


def test_registry():
    assert "discriminant" in names()
    with pytest.raises(UnknownObservable):
        get("nope")


def test_maximum_at_rho():
    assert petersson_discriminant(np.array([RHO]))[0] == pytest.approx(discriminant_max(), rel=1e-9)
    assert discriminant(np.array([RHO]))[0] == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("z", [1j, RHO, 0.3 + 1.2j, -0.1 + 2.5j])
def test_matches_high_precision_product(z):
    assert petersson_discriminant(np.array([z]))[0] == pytest.approx(mp_petersson(z), rel=1e-12)


def test_gamma_invariance_against_unreduced_series(rs):
    worst = 0.0
    umax = discriminant_max()
    for _ in range(100):
        x, y = rs.uniform(-0.5, 0.5), rs.uniform(0.9, 3.0)
        z = complex(x, y)
        a, b, c, d = random_gamma(rs)
        gz = (a * z + b) / (c * z + d)
        # oracle: the product evaluated at gamma z itself, no reduction
        raw = mp_petersson(gz, dps=60) / umax
        worst = max(worst, abs(discriminant(np.array([z]))[0] - raw))
    assert worst < 1e-10


def test_cusp_decay():
    assert discriminant(np.array([20j]))[0] < 1e-6
    assert discriminant(np.array([0.3 + 60j]))[0] == pytest.approx(0.0, abs=1e-20)


def test_self_convergence_in_order():
    a = petersson_discriminant(np.array([1j]), 30)[0]
    b = petersson_discriminant(np.array([1j]), 60)[0]
    assert abs(a - b) < 1e-10 * abs(b)


def test_truncation_bound_is_tiny_on_domain():
    assert truncation_bound(math.sqrt(3) / 2) < 1e-60


def test_eta_product_short_circuit_is_exact():
    q = np.exp(2j * math.pi * np.array([0.1 + 0.9j, 0.4 + 3j]))
    full = np.ones_like(q)
    for n in range(1, 31):
        full = full * (1 - q ** n)
    assert np.max(np.abs(eta_product(q) - full)) < 1e-15


def test_order_floor():
    with pytest.raises(ValueError):
        petersson_discriminant(np.array([1j]), 10)


def test_eval_on_point():
    p = ModularPoint.from_z(0.2 + 1.5j)
    assert eval_invariant_observable("discriminant", p) == pytest.approx(discriminant(np.array([0.2 + 1.5j]))[0])


@settings(max_examples=100, deadline=None)
@given(x=st.floats(-20, 20), y=st.floats(0.02, 30))
def test_bounded_in_unit_interval(x, y):
    v = discriminant(np.array([complex(x, y)]))[0]
    assert 0.0 <= v <= 1.0
