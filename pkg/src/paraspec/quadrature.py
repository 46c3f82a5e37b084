"""Panel quadrature along horocycle orbits.

An integrand f(h_s x) is sampled at Gauss-Legendre nodes on panels of width
``w`` covering s in [0, S].  Each panel carries its Legendre interpolant, so
cumulative integrals can be evaluated at any s, and a positive channel (the
time-change clock) can be inverted by Newton iteration without touching the
integrand again.  Panel frames are re-reduced at every panel start so that
stencils around a node stay well conditioned however long the orbit is.

Accuracy control is global per batch: the panel width is halved until the sum
over panels of the trailing Legendre coefficients is below ``tol``.
"""
import math

import numpy as np
from numpy.polynomial import legendre as L

from .errors import QuadratureFailure
from .homogeneous import frames_horocycle, reduce_frames

DEFAULT_NODES = 12
DEFAULT_WIDTH = 1.0
MAX_HALVINGS = 7


def legendre_basis(xi, p):
    """P_0..P_{p-1} at xi, stacked on a new trailing axis."""
    xi = np.asarray(xi, float)
    out = np.empty(xi.shape + (p,))
    out[..., 0] = 1.0
    if p > 1:
        out[..., 1] = xi
    for n in range(1, p - 1):
        out[..., n + 1] = ((2 * n + 1) * xi * out[..., n] - n * out[..., n - 1]) / (n + 1)
    return out


class _Rule:
    def __init__(self, p):
        xi, wts = L.leggauss(p)
        self.p = p
        self.xi = xi
        self.unit_nodes = (xi + 1.0) / 2.0
        basis = legendre_basis(xi, p)                       # (p nodes, p modes)
        norm = (2 * np.arange(p) + 1) / 2.0
        self.to_coeffs = (wts[:, None] * basis) * norm        # values @ to_coeffs -> coeffs
        integ = np.zeros((p, p + 1))
        for n in range(p):
            e = np.zeros(p)
            e[n] = 1.0
            integ[n] = L.legint(e, lbnd=-1)
        self.integ = integ                                   # coeffs @ integ -> antiderivative


_RULES = {}


def _rule(p):
    if p not in _RULES:
        _RULES[p] = _Rule(p)
    return _RULES[p]


class PanelOrbit:
    """Cumulative integrals of vector-valued integrands along h_s x.

    ``integrand(frames)`` receives node frames of shape (n, m, p) and returns
    an array of shape (k, n, m, p).  ``direction`` = -1 integrates backwards
    in s; all arguments ``s`` passed to the query methods are then magnitudes.
    """

    def __init__(self, frames, s_max, integrand, *, direction=1, nodes=DEFAULT_NODES,
                 width=DEFAULT_WIDTH, tol=1e-10, error_channels=None):
        self.frames = tuple(np.atleast_1d(np.asarray(v, float)) for v in frames)
        self.direction = 1.0 if direction >= 0 else -1.0
        self.s_max = float(abs(s_max))
        self.tol = tol
        rule = _rule(nodes)
        self.rule = rule
        w = float(width)
        for _ in range(MAX_HALVINGS + 1):
            self._build(integrand, w, error_channels)
            if self.error_estimate <= tol:
                return
            w /= 2.0
        raise QuadratureFailure(
            f"panel quadrature error {self.error_estimate:.3e} above tol {tol:.1e} at width {w * 2:.3g}")

    def _build(self, integrand, w, error_channels):
        rule = self.rule
        m = max(1, math.ceil(self.s_max / w - 1e-12))
        starts = self.direction * w * np.arange(m)
        n = self.frames[0].size
        panel = frames_horocycle(tuple(v[:, None] for v in self.frames), starts[None, :])
        panel = reduce_frames(tuple(np.broadcast_to(v, (n, m)) for v in panel))
        offsets = self.direction * w * rule.unit_nodes
        node_frames = frames_horocycle(tuple(v[..., None] for v in panel), offsets)
        node_frames = tuple(np.broadcast_to(v, (n, m, rule.p)) for v in node_frames)
        values = np.asarray(integrand(node_frames), float)
        self.values = values
        coeffs = values @ rule.to_coeffs                    # (k, n, m, p)
        self.coeffs = coeffs
        self.anti = coeffs @ rule.integ                     # (k, n, m, p+1)
        totals = w * coeffs[..., 0]
        self.cum = np.concatenate([np.zeros(totals.shape[:-1] + (1,)), np.cumsum(totals, axis=-1)],
                                  axis=-1)                  # (k, n, m+1)
        tail = np.abs(coeffs[..., -1]) + np.abs(coeffs[..., -2])
        chans = slice(None) if error_channels is None else list(error_channels)
        self.error_estimate = float(np.max(np.sum(w * tail[chans], axis=-1), initial=0.0))
        self.width = w
        self.m = m

    def _locate(self, s):
        s = np.asarray(s, float)
        k = np.clip(np.floor(s / self.width).astype(int), 0, self.m - 1)
        xi = 2.0 * (s - k * self.width) / self.width - 1.0
        return k, np.clip(xi, -1.0, 1.0)

    def _gather(self, arr, k):
        # arr (k, n, m, ...) ; k index shape (n,) or (n, T)
        n = arr.shape[1]
        kk = k.reshape(n, -1)
        idx = np.arange(n)[:, None]
        out = arr[:, idx, kk]                               # (k, n, T, ...)
        return out.reshape(arr.shape[:2] + k.shape[1:] + arr.shape[3:])

    def cumulative(self, s, channel=None):
        """Signed integral from 0 to direction*s of each channel; s has leading dim n."""
        s = np.abs(np.asarray(s, float))
        if s.ndim == 0:
            s = np.full(self.frames[0].shape, float(s))
        if np.any(s > self.m * self.width * (1 + 1e-12)):
            raise QuadratureFailure("query beyond the integrated orbit segment")
        k, xi = self._locate(s)
        base = self._gather(self.cum[..., :-1], k)
        anti = self._gather(self.anti, k)
        val = base + 0.5 * self.width * np.sum(anti * legendre_basis(xi, self.rule.p + 1), axis=-1)
        val = self.direction * val
        return val if channel is None else val[channel]

    def interpolate(self, s, channel=None):
        """Integrand value at direction*s from the panel interpolant."""
        s = np.abs(np.asarray(s, float))
        if s.ndim == 0:
            s = np.full(self.frames[0].shape, float(s))
        k, xi = self._locate(s)
        co = self._gather(self.coeffs, k)
        val = np.sum(co * legendre_basis(xi, self.rule.p), axis=-1)
        return val if channel is None else val[channel]

    def invert(self, target, channel=0, iterations=30):
        """Solve cumulative(s)[channel] = target for s >= 0 (positive integrand).

        ``target`` has shape (n,) or (n, T) and is a signed clock value; its sign
        must match ``direction``.
        """
        target = self.direction * np.asarray(target, float)
        if target.ndim == 1:
            target = target[:, None]
            squeeze = True
        else:
            squeeze = False
        cum = self.cum[channel]                             # (n, m+1)
        if np.any(target > cum[:, -1:] * (1 + 1e-12)) or np.any(target < 0):
            raise QuadratureFailure("clock target outside the integrated orbit segment")
        n, T = target.shape
        k = np.empty((n, T), dtype=int)
        for i in range(n):
            k[i] = np.searchsorted(cum[i], target[i], side="right") - 1
        k = np.clip(k, 0, self.m - 1)
        idx = np.arange(n)[:, None]
        c0 = cum[idx, k]
        anti = self.anti[channel][idx, k]                   # (n, T, p+1)
        co = self.coeffs[channel][idx, k]                   # (n, T, p)
        panel_total = cum[idx, np.minimum(k + 1, self.m)] - c0
        frac = np.where(panel_total > 0, (target - c0) / np.where(panel_total > 0, panel_total, 1), 0.0)
        xi = np.clip(2.0 * frac - 1.0, -1.0, 1.0)
        half = 0.5 * self.width
        for _ in range(iterations):
            f = c0 + half * np.sum(anti * legendre_basis(xi, self.rule.p + 1), axis=-1) - target
            fp = half * np.sum(co * legendre_basis(xi, self.rule.p), axis=-1)
            step = f / fp
            xi = np.clip(xi - step, -1.0, 1.0)
            if np.max(np.abs(step)) < 1e-15:
                break
        s = k * self.width + (xi + 1.0) * half
        return s[:, 0] if squeeze else s


def integrate_along_horocycle(frames, t, integrand, tol=1e-9, **kw):
    """Integral of a scalar integrand from s=0 to s=t (t scalar or per point)."""
    t = np.asarray(t, float)
    tmax = float(np.max(np.abs(t))) if t.size else 0.0
    if tmax == 0.0:
        return np.zeros(np.shape(frames[0]))
    signs = np.sign(t)
    if np.any(signs > 0) and np.any(signs < 0):
        raise ValueError("mixed-sign integration horizons are not supported in one batch")
    direction = -1 if np.any(signs < 0) else 1

    def wrapped(fr):
        return np.asarray(integrand(fr))[None]

    orbit = PanelOrbit(frames, tmax, wrapped, direction=direction, tol=tol, **kw)
    return orbit.cumulative(np.abs(t), channel=0)
