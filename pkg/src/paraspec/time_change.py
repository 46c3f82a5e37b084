"""Time changes alpha = c (1 + eps u) of the horocycle flow.

The invariant volume is normalized to mass one on the fundamental domain, and
``c`` is chosen so that the integral of alpha is one.  Derivatives along the
geodesic direction are taken by central differences of ``log(1 + eps u)``
(the constant ``c`` never enters) with two Richardson levels, so every
derivative comes with an error estimate.

Two routes compute the time-changed flow:

* :func:`time_changed_flow` integrates d sigma/dt = 1/alpha(h_sigma x) with
  step-doubling RK4 (the reference route for single points);
* the Monte Carlo estimators reparametrize by the horocycle time sigma and use
  :class:`~paraspec.quadrature.PanelOrbit`, where
  t(sigma) = int_0^sigma alpha(h_s x) ds is inverted by Newton iteration.
"""
from dataclasses import dataclass, field
from functools import partial
import math

import numpy as np

from . import observables, rng
from .errors import (DerivativeUnstable, InsufficientSamples, OdeStepFailure,
                     PositivityViolated)
from .homogeneous import (ModularPoint, frames_from_elements, frames_from_iwasawa,
                          frames_geodesic, frames_horocycle, frames_z, horocycle, reduce)
from .parallel import chunks, pmap
from .quadrature import PanelOrbit, integrate_along_horocycle

Y_CAP = 50.0
DERIVATIVE_STEP = 1e-2
DERIVATIVE_TOL = 1e-5
ODE_TOL = 1e-10
KUSHNIRENKO_INFLATION = 1.1
MAX_REL_STDERR = 1e-3
FUNDAMENTAL_DOMAIN_AREA = math.pi / 3.0


@dataclass(frozen=True)
class TimeChange:
    epsilon: float
    base: str = "discriminant"
    c: float = 1.0
    positivity_margin: float = 1.0
    n_samples: int = 0
    c_stderr: float = 0.0
    seed: int = 0
    y_cap: float = Y_CAP
    order: int = observables.DEFAULT_ORDER
    meta: dict = field(default_factory=dict, compare=False)

    def u(self, z):
        return observables.get(self.base)(z, self.order)

    def log_factor(self, z):
        """log(alpha / c) = log(1 + eps u)."""
        if self.epsilon == 0.0:
            return np.zeros(np.shape(z))
        return np.log1p(self.epsilon * self.u(z))

    def value(self, z):
        if self.epsilon == 0.0:
            return np.full(np.shape(z), self.c)
        return self.c * (1.0 + self.epsilon * self.u(z))

    def on_frames(self, frames):
        return self.value(frames_z(frames))

    def is_constant(self):
        return self.epsilon == 0.0


def geodesic_stencil(tc, frames, h=DERIVATIVE_STEP):
    """log(alpha) differences along g a_r for r in {0, +-h, +-h/2, +-h/4}."""
    out = {0.0: tc.log_factor(frames_z(frames))}
    for r in (h, h / 2, h / 4):
        out[r] = tc.log_factor(frames_z(frames_geodesic(frames, r)))
        out[-r] = tc.log_factor(frames_z(frames_geodesic(frames, -r)))
    return out


def log_derivatives(tc, frames, h=DERIVATIVE_STEP):
    """First and second geodesic derivatives of log alpha with error estimates.

    Returns (d1, d1_err, d2, d2_err): d1 = X alpha / alpha, d2 = X(X alpha / alpha).
    The estimates compare Richardson values built from (h, h/2) and (h/2, h/4).
    """
    if tc.is_constant():
        z = np.zeros(np.shape(frames[0]))
        return z, z, z, z.copy()
    f = geodesic_stencil(tc, frames, h)
    d1 = {s: (f[s] - f[-s]) / (2 * s) for s in (h, h / 2, h / 4)}
    d2 = {s: (f[s] - 2 * f[0.0] + f[-s]) / (s * s) for s in (h, h / 2, h / 4)}
    r1a = (4 * d1[h / 2] - d1[h]) / 3
    r1b = (4 * d1[h / 4] - d1[h / 2]) / 3
    r2a = (4 * d2[h / 2] - d2[h]) / 3
    r2b = (4 * d2[h / 4] - d2[h / 2]) / 3
    return r1b, np.abs(r1b - r1a), r2b, np.abs(r2b - r2a)


@dataclass(frozen=True)
class Derivative:
    value: float
    error: float


def x_log_derivative(tc, p, h=DERIVATIVE_STEP):
    """X alpha / alpha at a reduced point, with its step-refinement error."""
    frames = frames_from_elements([p.rep])
    d1, err, _, _ = log_derivatives(tc, frames, h)
    if err[0] > DERIVATIVE_TOL:
        raise DerivativeUnstable(f"geodesic derivative error estimate {err[0]:.2e}")
    return Derivative(float(d1[0]), float(err[0]))


# ---------------------------------------------------------------------------
# Monte Carlo over the fundamental domain


def sample_fundamental_domain(indices, master_seed, y_cap=Y_CAP):
    """Frames distributed by normalized Haar measure, truncated at Im z <= y_cap.

    Sample ``i`` is a function of (master_seed, i) only.  The base point is
    drawn from dx dy / y^2 on [-1/2, 1/2] x [sqrt(3)/2, y_cap] with rejection
    of |z| < 1; the frame angle is uniform on [0, pi).
    """
    indices = np.asarray(indices, dtype=np.int64)
    x = np.empty(indices.size)
    y = np.empty(indices.size)
    pending = np.arange(indices.size)
    inv_lo, inv_hi = 2.0 / math.sqrt(3.0), 1.0 / y_cap
    attempt = 0
    while pending.size:
        idx = indices[pending]
        ux = rng.uniforms(master_seed, rng.STREAM_FUNDAMENTAL_DOMAIN, idx, 2 * attempt)
        uy = rng.uniforms(master_seed, rng.STREAM_FUNDAMENTAL_DOMAIN, idx, 2 * attempt + 1)
        xs = ux - 0.5
        ys = 1.0 / (inv_lo - uy * (inv_lo - inv_hi))
        ok = xs * xs + ys * ys >= 1.0
        x[pending[ok]] = xs[ok]
        y[pending[ok]] = ys[ok]
        pending = pending[~ok]
        attempt += 1
    theta = math.pi * rng.uniforms(master_seed, rng.STREAM_FRAME, indices)
    return frames_from_iwasawa(x, y, theta)


def cusp_mass_fraction(y_cap=Y_CAP):
    """Normalized volume of the cusp region Im z > y_cap left out of sampling."""
    return (1.0 / y_cap) / FUNDAMENTAL_DOMAIN_AREA


def normalize_alpha(u="discriminant", epsilon=0.1, n_samples=20000, seed=0, y_cap=Y_CAP,
                    order=observables.DEFAULT_ORDER):
    """Build a TimeChange with int alpha dvol = 1 by seeded Monte Carlo."""
    fn = observables.get(u)
    sup_u = 1.0  # observables are normalized to sup = 1 on the grid
    if epsilon < 0 or epsilon * sup_u >= 0.9:
        raise PositivityViolated(f"epsilon * sup|u| = {epsilon * sup_u:.3g} must be in [0, 0.9)")
    if n_samples < 2:
        raise InsufficientSamples("need at least two samples")
    frames = sample_fundamental_domain(np.arange(n_samples), seed ^ rng.STREAM_NORMALIZATION, y_cap)
    vals = fn(frames_z(frames), order)
    mean = float(np.mean(vals))
    se_mean = float(np.std(vals, ddof=1) / math.sqrt(n_samples))
    c = 1.0 / (1.0 + epsilon * mean)
    c_se = epsilon * se_mean * c * c
    if c_se / c > MAX_REL_STDERR:
        raise InsufficientSamples(f"relative standard error of c is {c_se / c:.2e} > {MAX_REL_STDERR}")
    return TimeChange(epsilon=float(epsilon), base=u, c=c, positivity_margin=1.0 - epsilon * sup_u,
                      n_samples=n_samples, c_stderr=c_se, seed=seed, y_cap=y_cap, order=order,
                      meta={"u_mean": mean, "u_mean_stderr": se_mean,
                            "u_max": observables.discriminant_max(order),
                            "cusp_mass_fraction": cusp_mass_fraction(y_cap)})


def monte_carlo_mass(tc, n_samples, seed):
    """Independent estimate of int alpha dvol with its standard error."""
    frames = sample_fundamental_domain(np.arange(n_samples), seed, tc.y_cap)
    vals = tc.on_frames(frames)
    return float(np.mean(vals)), float(np.std(vals, ddof=1) / math.sqrt(n_samples))


# ---------------------------------------------------------------------------
# time-changed flow, ODE route


def _clock_rhs(tc, frames, sigma):
    return 1.0 / tc.on_frames(frames_horocycle(frames, sigma))


def clock_ode(tc, frames, t, tol=ODE_TOL, h0=0.25, max_steps=1_000_000):
    """sigma(t) solving d sigma/dt = 1/alpha(h_sigma x), sigma(0) = 0.

    Classical RK4 with step doubling; the batch shares one step size.  The
    local error is controlled per unit of time, so the global error in sigma
    stays near tol * |t|.
    """
    frames = tuple(np.atleast_1d(np.asarray(v, float)) for v in frames)
    sigma = np.zeros_like(frames[0])
    if t == 0.0 or tc.is_constant():
        return sigma + t / tc.c if tc.is_constant() else sigma
    direction = math.copysign(1.0, t)
    remaining = abs(t)
    h = min(h0, remaining)

    def rk4(s, dt):
        k1 = _clock_rhs(tc, frames, s)
        k2 = _clock_rhs(tc, frames, s + 0.5 * dt * k1)
        k3 = _clock_rhs(tc, frames, s + 0.5 * dt * k2)
        k4 = _clock_rhs(tc, frames, s + dt * k3)
        return s + dt * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0

    for _ in range(max_steps):
        if remaining <= 0.0:
            return sigma
        h = min(h, remaining)
        dt = direction * h
        full = rk4(sigma, dt)
        half = rk4(rk4(sigma, dt / 2), dt / 2)
        err = float(np.max(np.abs(half - full))) / 15.0 / h
        if err <= tol or h < 1e-12:
            if h < 1e-12:
                raise OdeStepFailure("step size underflow in the clock ODE")
            sigma = half + (half - full) / 15.0
            remaining -= h
            grow = 2.0 if err == 0 else min(2.0, 0.9 * (tol / err) ** 0.2)
            h = h * max(grow, 0.2)
        else:
            h = h * max(0.2, 0.9 * (tol / err) ** 0.2)
    raise OdeStepFailure("clock ODE exceeded its step budget")


def time_changed_flow(x, t, tc, tol=ODE_TOL):
    """phi_t^{U_alpha}(x) = h_{sigma(t)}(x), reduced."""
    if abs(t) > 1e4:
        raise ValueError("|t| must be <= 1e4")
    frames = frames_from_elements([x.rep])
    sigma = float(clock_ode(tc, frames, t, tol)[0])
    if not tc.is_constant():
        check = float(integrate_along_horocycle(frames, np.array([sigma]), tc.on_frames, tol=1e-10)[0])
        if abs(check - t) >= 1e-7 * (1.0 + abs(t)):
            raise OdeStepFailure(f"clock consistency check failed: |{check} - {t}|")
    return reduce(horocycle(x.rep, sigma)), sigma


# ---------------------------------------------------------------------------
# Birkhoff integral G(alpha, t), panel route


def _g_integrand(tc, frames):
    alpha = tc.on_frames(frames)
    d1, _, _, _ = log_derivatives(tc, frames)
    return np.stack([alpha, (d1 - 1.0) * alpha])


def clock_orbit(tc, frames, t_max, integrand, tol, error_channels=None, direction=1):
    """PanelOrbit long enough that the clock channel (0) reaches t_max."""
    s_max = abs(t_max) / tc.c + 1.0
    return PanelOrbit(frames, s_max, partial(integrand, tc), tol=tol,
                      error_channels=error_channels, direction=direction)


def G_batch(tc, frames, t, tol_rel=1e-6):
    """G(alpha, t)(x) = int_0^t (X alpha/alpha - 1)(phi_tau x) d tau for a batch."""
    if t <= 0:
        raise ValueError("G(alpha, t) requires t > 0")
    if tc.is_constant():
        return np.full(np.shape(frames[0]), -float(t))
    orbit = clock_orbit(tc, frames, t, _g_integrand, tol_rel * t)
    sigma = orbit.invert(np.full(np.shape(frames[0]), float(t)))
    return orbit.cumulative(sigma, channel=1)


def G_of_t(x, t, tc, tol_rel=1e-6):
    return float(G_batch(tc, frames_from_elements([x.rep]), t, tol_rel)[0])


def _g_chunk(tc, t, seed, tol_rel, idx):
    frames = sample_fundamental_domain(idx, seed, tc.y_cap)
    return G_batch(tc, frames, t, tol_rel)


def G_over_t_samples(tc, t, n_samples, seed, tol_rel=1e-6, workers=1):
    """G(alpha, t)/t on n seeded points sampled from vol."""
    parts = pmap(partial(_g_chunk, tc, t, seed, tol_rel), chunks(n_samples), workers)
    return np.concatenate(parts) / t


def ergodic_limit_estimate(tc, t, n_samples, seed, tol_rel=1e-6, workers=1):
    """Sample mean of G(alpha,t)/t with importance weight alpha (vol_alpha average)."""
    g = G_over_t_samples(tc, t, n_samples, seed, tol_rel, workers)
    frames = sample_fundamental_domain(np.arange(n_samples), seed, tc.y_cap)
    w = tc.on_frames(frames)
    mean = float(np.sum(w * g) / np.sum(w))
    se = float(np.std(g, ddof=1) / math.sqrt(n_samples))
    return {"mean": mean, "stderr": se, "unweighted_mean": float(np.mean(g)), "values": g}


# ---------------------------------------------------------------------------
# Kushnirenko condition


@dataclass(frozen=True)
class KushnirenkoReport:
    sup_estimate: float
    inflated: float
    spread: float
    verdict: str
    n_samples: int
    seed: int


def _xlog_chunk(tc, seed, h, idx):
    frames = sample_fundamental_domain(idx, seed, tc.y_cap)
    d1, err, _, _ = log_derivatives(tc, frames, h)
    return d1, err


def sampled_xlog(tc, n_samples, seed, workers=1, h=DERIVATIVE_STEP):
    parts = pmap(partial(_xlog_chunk, tc, seed, h), chunks(n_samples), workers)
    return np.concatenate([p[0] for p in parts]), np.concatenate([p[1] for p in parts])


def kushnirenko_verdict(tc, n_samples=10_000, seed=0, workers=1, h=DERIVATIVE_STEP):
    """Sup of |X alpha / alpha| over a seeded sample, inflated by 10%."""
    d1, _ = sampled_xlog(tc, n_samples, seed, workers, h)
    vals = np.abs(d1)
    sup = float(vals.max(initial=0.0))
    half = float(vals[: max(1, n_samples // 2)].max(initial=0.0))
    inflated = KUSHNIRENKO_INFLATION * sup
    return KushnirenkoReport(sup_estimate=sup, inflated=inflated, spread=sup - half,
                             verdict="PASS" if inflated < 1.0 else "FAIL",
                             n_samples=n_samples, seed=seed)


def modular_point_from_frame(frames, i=0):
    from .homogeneous import GroupElement
    return reduce(GroupElement(*(float(v[i]) for v in frames)))


__all__ = ["TimeChange", "normalize_alpha", "time_changed_flow", "x_log_derivative", "G_of_t",
           "kushnirenko_verdict", "ModularPoint"]


def describe(tc):
    return f"time-changed horocycle flow, alpha = c(1 + {tc.epsilon:g} u) with u = {tc.base}, c = {tc.c:.10g}"
