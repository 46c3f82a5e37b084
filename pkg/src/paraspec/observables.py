"""SL(2,Z)-invariant observables on the modular surface.

The building block is the Petersson-normalized discriminant

    u(z) = (4 pi Im z)^6 |Delta(z)| / u_max,   Delta = q prod_{n>=1} (1 - q^n)^24,

which is smooth, invariant, bounded by 1 and decays like Im(z)^6 e^{-2 pi Im z}
in the cusp.  ``u_max`` is found once by a grid search over the fundamental
domain (Im z <= 20); the maximum sits at the corner rho = e^{2 pi i / 3}.
"""
from functools import lru_cache
import math

import numpy as np

from .errors import UnknownObservable
from .homogeneous import frames_z, reduce_z

DEFAULT_ORDER = 30
GRID_Y_MAX = 20.0


def eta_product(q, order=DEFAULT_ORDER):
    """prod_{n=1}^{order} (1 - q^n).

    Factors with |q^n| below 1e-17 everywhere are skipped: they equal 1 to
    double precision, and on reduced points that happens after ~8 factors.
    """
    p = np.ones_like(q)
    qn = np.ones_like(q)
    for _ in range(order):
        qn = qn * q
        if qn.size and np.max(np.abs(qn)) < 1e-17:
            break
        p = p * (1.0 - qn)
    return p


def truncation_bound(im_z, order=DEFAULT_ORDER):
    """Upper bound on |log| of the omitted factors prod_{n>order} (1-q^n)^24."""
    r = np.exp(-2.0 * math.pi * np.asarray(im_z, float))
    return 24.0 * r ** (order + 1) / (1.0 - r) ** 2


def petersson_discriminant(z, order=DEFAULT_ORDER):
    """(4 pi Im z)^6 |Delta(z)| by the truncated q-product, no reduction applied."""
    if order < 30:
        raise ValueError("truncation order must be >= 30")
    z = np.asarray(z, dtype=complex)
    q = np.exp(2j * math.pi * z)
    # |q| (4 pi y)^6 in log form keeps large Im z from underflowing early
    log_pref = 6.0 * np.log(4.0 * math.pi * z.imag) - 2.0 * math.pi * z.imag
    return np.exp(log_pref) * np.abs(eta_product(q, order)) ** 24


@lru_cache(maxsize=None)
def discriminant_max(order=DEFAULT_ORDER, nx=401, ny=2001):
    xs = np.linspace(-0.5, 0.5, nx)
    ys = np.linspace(math.sqrt(3.0) / 2.0, GRID_Y_MAX, ny)
    X, Y = np.meshgrid(xs, ys)
    Z = (X + 1j * Y)[np.hypot(X, Y) >= 1.0]
    arc = xs + 1j * np.sqrt(1.0 - xs**2)
    vals = petersson_discriminant(np.concatenate([Z, arc]), order)
    return float(vals.max())


def discriminant(z, order=DEFAULT_ORDER):
    """Normalized discriminant observable in [0, 1]; z is reduced first."""
    zr = reduce_z(z)
    return np.minimum(petersson_discriminant(zr, order) / discriminant_max(order), 1.0)


_REGISTRY = {"discriminant": discriminant}


def names():
    return sorted(_REGISTRY)


def get(name):
    try:
        return _REGISTRY[name]
    except KeyError:
        raise UnknownObservable(f"unknown observable {name!r}; known: {names()}") from None


def eval_invariant_observable(name, point, order=DEFAULT_ORDER):
    """Value of a registered observable at a ModularPoint."""
    return float(get(name)(np.array([point.z]), order)[0])


def eval_on_frames(name, frames, order=DEFAULT_ORDER):
    return get(name)(frames_z(frames), order)
