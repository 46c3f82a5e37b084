"""Twisted horocycle flow on the modular surface times a circle.

The generator is (U, 0) + (0, alpha d/dtheta): the base moves at unit speed
along the horocycle while the circle coordinate advances by the integral of
alpha along the base orbit.
"""
from dataclasses import dataclass
import math

import numpy as np

from .homogeneous import TwistedPoint, frames_from_elements, horocycle, reduce
from .quadrature import integrate_along_horocycle

QUAD_TOL = 1e-9


def theta_advance(x, t, tc, tol=QUAD_TOL):
    """int_0^t alpha(h_s x) ds for a ModularPoint x."""
    if t == 0.0:
        return 0.0
    if tc.is_constant():
        return tc.c * t
    frames = frames_from_elements([x.rep])
    return float(integrate_along_horocycle(frames, np.array([t]), tc.on_frames, tol=tol)[0])


def theta_advance_batch(frames, t, tc, tol=QUAD_TOL):
    if tc.is_constant():
        return np.full(np.shape(frames[0]), tc.c * t)
    return integrate_along_horocycle(frames, np.full(np.shape(frames[0]), float(t)),
                                     tc.on_frames, tol=tol)


def twisted_flow(p, t, tc, tol=QUAD_TOL):
    """Advance a TwistedPoint by time t of the twisted flow."""
    if t == 0.0:
        return p
    base = reduce(horocycle(p.base.rep, t))
    return TwistedPoint(base, math.fmod(p.theta + theta_advance(p.base, t, tc, tol), 1.0))


def cocycle_a(x, t, tc, tol=QUAD_TOL):
    """a(x, t) = int_0^t (alpha - 1)(h_s x) ds."""
    if t == 0.0:
        return 0.0
    if tc.is_constant():
        return (tc.c - 1.0) * t
    frames = frames_from_elements([x.rep])
    return float(integrate_along_horocycle(frames, np.array([t]),
                                           lambda fr: tc.on_frames(fr) - 1.0, tol=tol)[0])


@dataclass(frozen=True)
class TwistedSystem:
    """Twisted flow restricted to the circle mode exp(2 pi i n theta)."""
    tc: object
    n: int = 1

    def describe(self):
        return (f"twisted horocycle flow, alpha = c(1 + {self.tc.epsilon:g} u) with u = {self.tc.base}, "
                f"circle mode n = {self.n}")
