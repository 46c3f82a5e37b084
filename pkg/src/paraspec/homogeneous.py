"""Matrix dynamics on SL(2,R) and reduction modulo SL(2,Z).

Points of the unit tangent bundle of the modular surface are represented by
2x2 unit-determinant matrices ``g``; the base point is ``g . i``.  All flows act
on the right:

* geodesic flow        g -> g diag(e^{s/2}, e^{-s/2})
* horocycle flow       g -> g [[1, t], [0, 1]]
* opposite horocycle   g -> g [[1, 0], [r, 1]]

Scalar entry points work on :class:`GroupElement`; the ``frames_*`` helpers do
the same on batches stored as a tuple of four equally shaped arrays
``(a, b, c, d)`` and are what the Monte Carlo estimators use.
"""
from dataclasses import dataclass
import math

import numpy as np

from .errors import IterationCapExceeded

DET_TOL = 1e-9
RENORMALIZE_DRIFT = 1e-12
RENORMALIZE_EVERY = 64
MAX_REDUCTION_STEPS = 10_000
MAX_GEODESIC_TIME = 50.0

# a_{-s} u_t a_s = u_{t e^{KAPPA s}} for the basis above; fixed against a
# hand-expanded 2x2 product in tests/test_homogeneous.py.
RENORMALIZATION_SIGN = -1


@dataclass(frozen=True)
class GroupElement:
    a: float
    b: float
    c: float
    d: float

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 1.0)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=float)
        return cls(float(m[0, 0]), float(m[0, 1]), float(m[1, 0]), float(m[1, 1]))

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def matrix(self):
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __matmul__(self, other):
        return GroupElement(
            self.a * other.a + self.b * other.c,
            self.a * other.b + self.b * other.d,
            self.c * other.a + self.d * other.c,
            self.c * other.b + self.d * other.d,
        )

    def inverse(self):
        det = self.det
        return GroupElement(self.d / det, -self.b / det, -self.c / det, self.a / det)

    def renormalized(self):
        """Divide by sqrt(det) so that det == 1 up to rounding."""
        det = self.det
        if det <= 0:
            raise ValueError(f"matrix left SL(2,R): det={det}")
        r = math.sqrt(det)
        return GroupElement(self.a / r, self.b / r, self.c / r, self.d / r)

    def act(self, z):
        """Mobius action on the upper half-plane."""
        return (self.a * z + self.b) / (self.c * z + self.d)

    def norm_distance(self, other):
        return math.sqrt((self.a - other.a) ** 2 + (self.b - other.b) ** 2
                         + (self.c - other.c) ** 2 + (self.d - other.d) ** 2)


def _checked(g):
    if abs(g.det - 1.0) > RENORMALIZE_DRIFT:
        g = g.renormalized()
    return g


def geodesic(g, s):
    if abs(s) > MAX_GEODESIC_TIME:
        raise ValueError(f"geodesic time |s|={abs(s)} exceeds {MAX_GEODESIC_TIME}")
    e = math.exp(s / 2.0)
    return _checked(GroupElement(g.a * e, g.b / e, g.c * e, g.d / e))


def horocycle(g, t):
    return _checked(GroupElement(g.a, g.a * t + g.b, g.c, g.c * t + g.d))


def opposite_horocycle(g, r):
    return _checked(GroupElement(g.a + g.b * r, g.b, g.c + g.d * r, g.d))


def renormalization_residual(s, t):
    """Frobenius norm of a_{-s} u_t a_s - u_{t e^{KAPPA s}} at the identity."""
    if abs(s) > 10 or abs(t) > 1e3:
        raise ValueError("renormalization_residual expects |s| <= 10, |t| <= 1e3")
    e = GroupElement.identity()
    lhs = geodesic(horocycle(geodesic(e, -s), t), s)
    rhs = horocycle(e, t * math.exp(RENORMALIZATION_SIGN * s))
    return lhs.norm_distance(rhs)


class FlowStepper:
    """Accumulates many small flow steps, renormalizing the determinant every
    ``RENORMALIZE_EVERY`` steps (and whenever drift exceeds 1e-12)."""

    def __init__(self, g=None):
        self.g = GroupElement.identity() if g is None else g
        self.steps = 0

    def _push(self, g):
        self.steps += 1
        if self.steps % RENORMALIZE_EVERY == 0 or abs(g.det - 1.0) > RENORMALIZE_DRIFT:
            g = g.renormalized()
        self.g = g
        return g

    def geodesic(self, s):
        e = math.exp(s / 2.0)
        g = self.g
        return self._push(GroupElement(g.a * e, g.b / e, g.c * e, g.d / e))

    def horocycle(self, t):
        g = self.g
        return self._push(GroupElement(g.a, g.a * t + g.b, g.c, g.c * t + g.d))

    def reduce(self):
        self.g = reduce(self.g).rep
        return self.g


@dataclass(frozen=True)
class ModularPoint:
    rep: GroupElement
    z: complex
    frame_angle: float
    gamma: tuple = (1, 0, 0, 1)  # integer matrix with rep = gamma . g

    @classmethod
    def from_z(cls, z, frame_angle=0.0):
        return reduce(frame_from_iwasawa(z.real, z.imag, frame_angle))


@dataclass(frozen=True)
class TwistedPoint:
    base: ModularPoint
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", float(self.theta) % 1.0)


def frame_from_iwasawa(x, y, theta):
    """g = n_x a_y k_theta, so that g . i = x + i y and the frame angle is theta."""
    sy = math.sqrt(y)
    ct, st = math.cos(theta), math.sin(theta)
    return GroupElement(sy * ct + x * st / sy, -sy * st + x * ct / sy, st / sy, ct / sy)


def _canonical_sign(a, b, c, d):
    # PSL(2,R): pick the sign with d > 0, or d == 0 and c > 0
    if d < 0 or (d == 0 and c < 0):
        return -a, -b, -c, -d
    return a, b, c, d


def reduce(g):
    """Left-multiply by SL(2,Z) until g . i lies in the standard fundamental domain."""
    a, b, c, d = g.a, g.b, g.c, g.d
    ga, gb, gc, gd = 1, 0, 0, 1
    for step in range(1, MAX_REDUCTION_STEPS + 1):
        z = complex(b, a) / complex(d, c)
        n = round(z.real)
        if n:
            a, b = a - n * c, b - n * d
            ga, gb = ga - n * gc, gb - n * gd
            z = complex(z.real - n, z.imag)
        if abs(z) < 1.0:
            a, b, c, d = -c, -d, a, b
            ga, gb, gc, gd = -gc, -gd, ga, gb
        elif abs(z.real) <= 0.5:
            break
        if step % RENORMALIZE_EVERY == 0:
            r = math.sqrt(a * d - b * c)
            a, b, c, d = a / r, b / r, c / r, d / r
    else:
        raise IterationCapExceeded(f"reduction did not terminate in {MAX_REDUCTION_STEPS} steps")
    if gd < 0 or (gd == 0 and gc < 0):
        ga, gb, gc, gd = -ga, -gb, -gc, -gd
    rep = _checked(GroupElement(*_canonical_sign(a, b, c, d)))
    z = rep.act(1j)
    return ModularPoint(rep=rep, z=z, frame_angle=math.atan2(rep.c, rep.d), gamma=(ga, gb, gc, gd))


def in_fundamental_domain(z, tol=1e-9):
    return z.imag > 0 and abs(z.real) <= 0.5 + tol and abs(z) >= 1.0 - tol


# ---------------------------------------------------------------------------
# batched frames: tuples (a, b, c, d) of arrays


def frames_from_iwasawa(x, y, theta):
    x, y, theta = np.broadcast_arrays(np.asarray(x, float), np.asarray(y, float),
                                      np.asarray(theta, float))
    sy = np.sqrt(y)
    ct, st = np.cos(theta), np.sin(theta)
    return (sy * ct + x * st / sy, -sy * st + x * ct / sy, st / sy, ct / sy)


def frames_from_elements(elements):
    arr = np.array([[g.a, g.b, g.c, g.d] for g in elements], dtype=float)
    return tuple(arr[:, i].copy() for i in range(4))


def frames_horocycle(frames, s):
    a, b, c, d = frames
    return (a, a * s + b, c, c * s + d)


def frames_geodesic(frames, r):
    a, b, c, d = frames
    e = np.exp(np.asarray(r, float) / 2.0)
    return (a * e, b / e, c * e, d / e)


def frames_z(frames):
    a, b, c, d = frames
    return (a * 1j + b) / (c * 1j + d)


def reduce_z(z):
    """Reduce an array of upper half-plane points into the fundamental domain."""
    z = np.array(z, dtype=complex, copy=True)
    if np.any(~(z.imag > 0)):
        raise ValueError("points must lie in the upper half-plane")
    active = np.arange(z.size)
    flat = z.reshape(-1)
    for _ in range(MAX_REDUCTION_STEPS):
        w = flat[active]
        w = w - np.round(w.real)
        inside = np.abs(w) < 1.0
        w = np.where(inside, -1.0 / np.where(inside, w, 1.0), w)
        flat[active] = w
        active = active[inside]
        if active.size == 0:
            return flat.reshape(z.shape)
    raise IterationCapExceeded("vectorized z-reduction did not terminate")


def reduce_frames(frames):
    """Batched matrix reduction; returns reduced (a, b, c, d) with canonical sign."""
    a, b, c, d = (np.array(v, dtype=float, copy=True).reshape(-1) for v in frames)
    shape = np.shape(frames[0])
    active = np.arange(a.size)
    for step in range(1, MAX_REDUCTION_STEPS + 1):
        aa, bb, cc, dd = a[active], b[active], c[active], d[active]
        z = (aa * 1j + bb) / (cc * 1j + dd)
        n = np.round(z.real)
        aa, bb = aa - n * cc, bb - n * dd
        zr = z - n
        inside = np.abs(zr) < 1.0
        aa, bb, cc, dd = (np.where(inside, -cc, aa), np.where(inside, -dd, bb),
                          np.where(inside, aa, cc), np.where(inside, bb, dd))
        if step % RENORMALIZE_EVERY == 0:
            r = np.sqrt(aa * dd - bb * cc)
            aa, bb, cc, dd = aa / r, bb / r, cc / r, dd / r
        a[active], b[active], c[active], d[active] = aa, bb, cc, dd
        active = active[inside]
        if active.size == 0:
            break
    else:
        raise IterationCapExceeded("batched matrix reduction did not terminate")
    flip = (d < 0) | ((d == 0) & (c < 0))
    sgn = np.where(flip, -1.0, 1.0)
    r = np.sqrt(a * d - b * c)
    sgn = sgn / r
    return tuple((v * sgn).reshape(shape) for v in (a, b, c, d))
