"""Rotations, skew products over rotations and Furstenberg maps on tori.

Coordinates are in turns.  The Furstenberg map on T^d is

    T_d(x)_1 = x_1 + y,
    T_d(x)_l = x_l + sum_{m<l} b_{l,m} x_m + h_{l-1}(x_1, ..., x_{l-1}),

and on the character subspace indexed by (j, k) it acts on functions of the
first j-1 coordinates as

    U_{j,k} psi = exp(2 pi i k phi_j) * (psi o T_{j-1}),
    phi_j = sum_{m<j} b_{j,m} x_m + h_{j-1}(x_1, ..., x_{j-1}).

A skew product over the rotation by y with fiber cocycle exp(2 pi i (b x +
eta(x))) is the case d = 2 of the same formulas.

Grid evaluation composes with T_{j-1} one axis at a time.  The shift along
axis a depends only on the earlier coordinates, so shifting axis 1 first, then
axis 2, and so on reproduces psi o T exactly for band-limited data (each shift
is a per-fiber Fourier phase ramp).
"""
from dataclasses import dataclass, field
import math

import numpy as np

from .errors import ConfigError, DimensionMismatch, GridTooCoarse
from .series import CorrelationSeries

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
ALIAS_TOL = 1e-22
MAX_STEPS = 2 ** 16


# ---------------------------------------------------------------------------
# points and trigonometric polynomials


@dataclass(frozen=True)
class TorusPoint:
    coords: tuple

    def __post_init__(self):
        object.__setattr__(self, "coords", tuple(float(c) % 1.0 for c in self.coords))

    @property
    def dim(self):
        return len(self.coords)

    def array(self):
        return np.array(self.coords)


@dataclass(frozen=True)
class FourierObservable:
    """Finite trigonometric sum  sum_m a_m exp(2 pi i m.x)  on T^dim."""
    dim: int
    coeffs: dict = field(default_factory=dict)
    real: bool = False

    def __post_init__(self):
        clean = {}
        for m, a in self.coeffs.items():
            m = (int(m),) if np.isscalar(m) else tuple(int(v) for v in m)
            if len(m) != self.dim:
                raise DimensionMismatch(f"frequency {m} does not have dimension {self.dim}")
            if a != 0:
                clean[m] = clean.get(m, 0j) + complex(a)
        object.__setattr__(self, "coeffs", clean)
        if self.real:
            for m, a in clean.items():
                partner = clean.get(tuple(-v for v in m), 0j)
                if abs(partner - a.conjugate()) > 1e-12 * max(1.0, abs(a)):
                    raise ValueError(f"real observable needs a_(-m) = conj(a_m); fails at {m}")

    @classmethod
    def zero(cls, dim):
        return cls(dim, {}, real=True)

    @classmethod
    def constant(cls, dim, value=1.0):
        return cls(dim, {(0,) * dim: value}, real=np.isrealobj(value))

    @classmethod
    def character(cls, m):
        m = (int(m),) if np.isscalar(m) else tuple(m)
        return cls(len(m), {m: 1.0})

    @classmethod
    def cos_mode(cls, m, amplitude=1.0, phase=0.0):
        """amplitude * cos(2 pi m.x + phase)."""
        m = (int(m),) if np.isscalar(m) else tuple(m)
        a = 0.5 * amplitude * complex(math.cos(phase), math.sin(phase))
        neg = tuple(-v for v in m)
        return cls(len(m), {m: a, neg: a.conjugate()}, real=True)

    def __add__(self, other):
        if other.dim != self.dim:
            raise DimensionMismatch("cannot add observables of different dimension")
        out = dict(self.coeffs)
        for m, a in other.coeffs.items():
            out[m] = out.get(m, 0j) + a
        return FourierObservable(self.dim, out, real=self.real and other.real)

    def scale(self, s):
        return FourierObservable(self.dim, {m: s * a for m, a in self.coeffs.items()},
                                 real=self.real and np.isrealobj(s))

    def is_zero(self):
        return not self.coeffs

    @property
    def max_frequency(self):
        return max((max(abs(v) for v in m) for m in self.coeffs), default=0)

    def norm2_squared(self):
        return float(sum(abs(a) ** 2 for a in self.coeffs.values()))

    def mean(self):
        return self.coeffs.get((0,) * self.dim, 0j)

    def sup_bound(self):
        return float(sum(abs(a) for a in self.coeffs.values()))

    def derivative(self, axis=0):
        """d/dx_axis: multiply mode m by 2 pi i m_axis."""
        return FourierObservable(self.dim, {m: 2j * math.pi * m[axis] * a for m, a in self.coeffs.items()},
                                 real=self.real)

    def P(self, axis=0):
        """P = -i d/dx_axis: multiply mode m by 2 pi m_axis."""
        return FourierObservable(self.dim, {m: 2 * math.pi * m[axis] * a for m, a in self.coeffs.items()})

    def evaluate(self, x):
        """Values at points x of shape (..., dim) (or (...,) when dim == 1)."""
        x = np.asarray(x, float)
        if self.dim == 1 and (x.ndim == 0 or x.shape[-1] != 1):
            x = x[..., None]
        if x.shape[-1] != self.dim:
            raise DimensionMismatch(f"points of dimension {x.shape[-1]} for observable of dimension {self.dim}")
        out = np.zeros(x.shape[:-1], complex)
        for m, a in self.coeffs.items():
            out += a * np.exp(2j * math.pi * (x @ np.array(m, float)))
        return out.real if self.real else out

    def on_grid(self, n, dims=None):
        """Samples on the uniform grid with n points per axis, shape (n,)*dim."""
        return self.evaluate(grid_points(n, self.dim))


def grid_points(n, dim):
    axes = np.meshgrid(*([np.arange(n) / n] * dim), indexing="ij")
    return np.stack(axes, axis=-1)


def circular_distance(a, b):
    d = np.abs((np.asarray(a) - np.asarray(b) + 0.5) % 1.0 - 0.5)
    return d


# ---------------------------------------------------------------------------
# systems


def _validate_irrational(y):
    y = float(y)
    if not 0.0 < y < 1.0:
        raise ConfigError("y", "rotation number must lie in (0, 1)")
    # rationals with small denominators are rejected; floats cannot encode irrationality
    for q in range(1, 1001):
        if abs(y * q - round(y * q)) < 1e-12:
            raise ConfigError("y", f"rotation number is (numerically) rational with denominator {q}")
    return y


@dataclass(frozen=True)
class RotationSpec:
    """Translation of T^1 by y: the pure-point negative control."""
    y: float = GOLDEN

    def __post_init__(self):
        _validate_irrational(self.y)

    @property
    def dim(self):
        return 1

    def apply_coords(self, x):
        return (np.asarray(x, float) + self.y) % 1.0

    def inverse_coords(self, x):
        return (np.asarray(x, float) - self.y) % 1.0

    def describe(self):
        return f"rotation x -> x + {self.y:.12g} on T^1"


@dataclass(frozen=True)
class FurstenbergSpec:
    """Furstenberg map on T^d together with the active subspace (j, k).

    ``b`` is a d x d integer matrix indexed from 1 in the formulas; only the
    strictly lower part enters.  ``h[l-1]`` is h_l : T^l -> R.
    """
    d: int
    y: float
    b: tuple
    h: tuple
    j: int = 2
    k: int = 1

    def __post_init__(self):
        if self.d < 2:
            raise ConfigError("d", "need d >= 2")
        if self.d > 4:
            raise ConfigError("d", "d > 4 is not supported (grid memory)")
        _validate_irrational(self.y)
        b = np.array(self.b, dtype=np.int64)
        if b.shape != (self.d, self.d):
            raise ConfigError("b", f"expected a {self.d}x{self.d} integer matrix")
        if np.any(np.triu(b, 1) != 0):
            raise ConfigError("b", "b must be lower triangular (the diagonal is ignored)")
        for l in range(2, self.d + 1):
            if b[l - 1, l - 2] == 0:
                raise ConfigError("b", f"b_{{{l},{l - 1}}} must be nonzero")
        object.__setattr__(self, "b", tuple(tuple(int(v) for v in row) for row in b))
        h = list(self.h) + [None] * (self.d - 1 - len(self.h))
        if len(h) != self.d - 1:
            raise ConfigError("h", f"expected {self.d - 1} functions h_1..h_{self.d - 1}")
        clean = []
        for l, hl in enumerate(h, start=1):
            hl = FourierObservable.zero(l) if hl is None else hl
            if hl.dim != l:
                raise ConfigError("h", f"h_{l} must be a function on T^{l}")
            if not hl.real:
                raise ConfigError("h", f"h_{l} must be real valued")
            clean.append(hl)
        object.__setattr__(self, "h", tuple(clean))
        if not 2 <= self.j <= self.d:
            raise ConfigError("j", f"j must lie in 2..{self.d}")
        if self.k == 0:
            raise ConfigError("k", "k must be nonzero")

    def bij(self, l, m):
        return self.b[l - 1][m - 1]

    @property
    def dim(self):
        return self.d

    @property
    def active_dim(self):
        return self.j - 1

    def affine(self):
        return all(hl.is_zero() for hl in self.h)

    def _step(self, x, dims, sign):
        x = np.array(x, dtype=float, copy=True)
        if x.shape[-1] != dims:
            raise DimensionMismatch(f"point of dimension {x.shape[-1]}, map of dimension {dims}")
        old = x.copy()
        out = x
        out[..., 0] = old[..., 0] + sign * self.y
        src = old if sign > 0 else out  # inverse needs the already recovered coordinates
        for l in range(2, dims + 1):
            s = self.h[l - 2].evaluate(src[..., : l - 1])
            for m in range(1, l):
                s = s + self.bij(l, m) * src[..., m - 1]
            out[..., l - 1] = old[..., l - 1] + sign * s
        return out % 1.0

    def apply_coords(self, x, dims=None):
        return self._step(x, self.d if dims is None else dims, +1)

    def inverse_coords(self, x, dims=None):
        return self._step(x, self.d if dims is None else dims, -1)

    def base_map(self):
        """T_{j-1} as a standalone system on T^{j-1}."""
        return _Truncated(self, self.j - 1)

    def phase(self, x):
        """phi_j on points of T^{j-1}."""
        j = self.j
        s = self.h[j - 2].evaluate(x[..., : j - 1])
        for m in range(1, j):
            s = s + self.bij(j, m) * x[..., m - 1]
        return s

    def derivative_field(self, order=1):
        """partial_{j-1}^order h_{j-1}, the field entering the commutator multipliers."""
        f = self.h[self.j - 2]
        for _ in range(order):
            f = f.derivative(self.j - 2)
        return f

    def H_constant(self):
        """The limit multiplier 2 pi k b_{j,j-1}."""
        return 2 * math.pi * self.k * self.bij(self.j, self.j - 1)

    def describe(self):
        return (f"Furstenberg map on T^{self.d}, y = {self.y:.12g}, b = {self.b}, "
                f"active subspace j = {self.j}, k = {self.k}")


@dataclass(frozen=True)
class _Truncated:
    spec: FurstenbergSpec
    dim: int

    def apply_coords(self, x):
        if self.dim == 1:
            return (np.asarray(x, float) + self.spec.y) % 1.0
        return self.spec.apply_coords(x, self.dim)

    def inverse_coords(self, x):
        if self.dim == 1:
            return (np.asarray(x, float) - self.spec.y) % 1.0
        return self.spec.inverse_coords(x, self.dim)


@dataclass(frozen=True)
class SkewProductSpec:
    """T(x, z) = (x + y, exp(2 pi i (b x + eta(x))) z) restricted to the character z^k."""
    y: float = GOLDEN
    b: int = 1
    eta_lift: FourierObservable = field(default_factory=lambda: FourierObservable.zero(1))
    k: int = 1

    def __post_init__(self):
        _validate_irrational(self.y)
        if int(self.b) == 0:
            raise ConfigError("b", "b = 0 makes the fiber character trivial; use RotationSpec")
        if self.k == 0:
            raise ConfigError("k", "k must be nonzero")
        if self.eta_lift.dim != 1 or not self.eta_lift.real:
            raise ConfigError("eta_lift", "eta lift must be a real observable on T^1")

    def as_furstenberg(self):
        return FurstenbergSpec(d=2, y=self.y, b=((0, 0), (int(self.b), 0)), h=(self.eta_lift,),
                               j=2, k=self.k)

    @property
    def xi0_modulus(self):
        """|xi_0| = |2 pi k b|, the limit multiplier."""
        return abs(2 * math.pi * self.k * self.b)

    def base_map(self):
        return RotationSpec(self.y)

    def describe(self):
        return f"skew product over rotation y = {self.y:.12g}, b = {self.b}, k = {self.k}"


def eta_tilde(spec):
    """Real lift of chi o eta: 2 pi k * eta_lift."""
    return spec.eta_lift.scale(2 * math.pi * spec.k)


def furstenberg_apply(spec, x):
    if x.dim != spec.d:
        raise DimensionMismatch(f"point of dimension {x.dim} for a map on T^{spec.d}")
    return TorusPoint(tuple(spec.apply_coords(x.array())))


def furstenberg_inverse(spec, x):
    if x.dim != spec.d:
        raise DimensionMismatch(f"point of dimension {x.dim} for a map on T^{spec.d}")
    return TorusPoint(tuple(spec.inverse_coords(x.array())))


# ---------------------------------------------------------------------------
# U_chi on grids


def _as_furstenberg(spec):
    return spec.as_furstenberg() if isinstance(spec, SkewProductSpec) else spec


class GridOperator:
    """Precomputed shift fields and multiplier for U on an n^D grid."""

    def __init__(self, spec, n, alias_tol=ALIAS_TOL):
        if n < 4 or n & (n - 1):
            raise GridTooCoarse(f"grid size {n} must be a power of two >= 4")
        self.n = n
        self.alias_tol = alias_tol
        if isinstance(spec, RotationSpec):
            self.D = 1
            self.shifts = [np.array(spec.y)]
            self.multiplier = None
        else:
            spec = _as_furstenberg(spec)
            D = spec.j - 1
            self.D = D
            pts = grid_points(n, D)
            self.shifts = [np.array(spec.y)]
            for l in range(2, D + 1):
                s = spec.h[l - 2].evaluate(pts[..., : l - 1])
                for m in range(1, l):
                    s = s + spec.bij(l, m) * pts[..., m - 1]
                # constant along axis l-1: keep a size-1 axis there for broadcasting
                self.shifts.append(np.take(s, [0], axis=l - 1))
            self.multiplier = np.exp(2j * math.pi * spec.k * spec.phase(pts))
        self.freq = np.fft.fftfreq(n, 1.0 / n)
        self.top = np.abs(self.freq) >= n // 4
        self.ramps = []
        for axis, s in enumerate(self.shifts):
            freq, _ = self._shape_freq(axis)
            self.ramps.append(np.exp(2j * math.pi * freq * s))

    def _shape_freq(self, axis):
        shape = [1] * self.D
        shape[axis] = self.n
        return self.freq.reshape(shape), self.top.reshape(shape)

    def alias_fraction(self, F, axis):
        e = F.real ** 2 + F.imag ** 2
        total = e.sum()
        if total == 0:
            return 0.0
        top = np.compress(self.top, e, axis=axis).sum()
        return float(top / total)

    def apply(self, psi, check=True):
        psi = np.asarray(psi, complex)
        if psi.shape != (self.n,) * self.D:
            raise DimensionMismatch(f"grid of shape {psi.shape}, expected {(self.n,) * self.D}")
        out = psi
        worst = 0.0
        for axis, ramp in enumerate(self.ramps):
            F = np.fft.fft(out, axis=axis)
            if check:
                worst = max(worst, self.alias_fraction(F, axis))
            out = np.fft.ifft(F * ramp, axis=axis)
        if check and worst > self.alias_tol:
            raise GridTooCoarse(f"aliasing energy fraction {worst:.2e} above {self.alias_tol:.0e}")
        if self.multiplier is not None:
            out = self.multiplier * out
        self.last_alias = worst
        return out


def u_chi_apply(spec, psi, check=True):
    """One application of U_chi to grid samples psi (shape (n,)*(j-1))."""
    psi = np.asarray(psi)
    return GridOperator(spec, psi.shape[0]).apply(psi, check)


def grid_inner(a, b):
    """Normalized Haar quadrature of a * conj(b) on a grid."""
    return complex(np.vdot(b, a) / a.size)


def _grid_correlations(spec, psi_obs, N, grid_log2, alias_tol):
    n = 2 ** grid_log2
    op = GridOperator(spec, n, alias_tol)
    psi0 = psi_obs.on_grid(n).astype(complex)
    cur = psi0
    vals = np.empty(N + 1, complex)
    alias = np.empty(N + 1)
    vals[0] = np.vdot(psi0, psi0).real / psi0.size
    alias[0] = 0.0
    for step in range(1, N + 1):
        try:
            cur = op.apply(cur)
        except GridTooCoarse as exc:
            raise GridTooCoarse(str(exc), n=step - 1) from None
        alias[step] = op.last_alias
        vals[step] = grid_inner(cur, psi0)
    return vals, alias


def correlation_map(spec, psi, N, grid_log2, alias_tol=ALIAS_TOL, refine=True):
    """c_n = <U^n psi, psi> for 0 <= n <= N by grid quadrature.

    Error bars are the difference to the same computation on the grid with
    half the resolution; when that grid is too coarse, the aliasing energy of
    the fine iterate (times ||psi||^2) is reported instead.
    """
    if not 0 <= N <= MAX_STEPS:
        raise ConfigError("N", f"N must lie in [0, {MAX_STEPS}]")
    if isinstance(spec, RotationSpec):
        dim = 1
    else:
        dim = _as_furstenberg(spec).j - 1
    if psi.dim != dim:
        raise DimensionMismatch(f"psi lives on T^{psi.dim}, the operator on T^{dim}")
    vals, alias = _grid_correlations(spec, psi, N, grid_log2, alias_tol)
    err_kind = "refinement"
    if refine:
        try:
            coarse, _ = _grid_correlations(spec, psi, N, grid_log2 - 1, alias_tol)
            stderr = np.abs(vals - coarse)
        except GridTooCoarse:
            err_kind = "aliasing"
            stderr = np.sqrt(alias) * vals[0].real
    else:
        err_kind = "aliasing"
        stderr = np.sqrt(alias) * vals[0].real
    stderr[0] = 0.0
    vals[0] = vals[0].real
    desc = spec.describe()
    return CorrelationSeries(np.arange(N + 1, dtype=float), vals, stderr,
                             {"method": "quadrature", "grid": 2 ** grid_log2, "grid_log2": grid_log2,
                              "samples": (2 ** grid_log2) ** dim, "seed": None, "error": err_kind},
                             desc)


# ---------------------------------------------------------------------------
# exact sparse mode (affine maps: h = 0)


def sparse_apply(spec, coeffs):
    """U on a finite Fourier sum {m: a_m} when the map is affine."""
    spec = _as_furstenberg(spec)
    if not spec.affine():
        raise ValueError("exact sparse mode needs h = 0")
    D = spec.j - 1
    A = np.eye(D, dtype=np.int64)
    for l in range(2, D + 1):
        for m in range(1, l):
            A[l - 1, m - 1] = spec.bij(l, m)
    shift = np.array([spec.k * spec.bij(spec.j, m) for m in range(1, spec.j)], dtype=np.int64)
    out = {}
    for m, a in coeffs.items():
        mv = np.array(m, dtype=np.int64)
        # exp(2 pi i m.(A x + v)) with v = (y, 0, ..., 0)
        phase = complex(math.cos(2 * math.pi * mv[0] * spec.y), math.sin(2 * math.pi * mv[0] * spec.y))
        new = tuple(int(v) for v in A.T @ mv + shift)
        out[new] = out.get(new, 0j) + a * phase
    return out


def sparse_correlations(spec, psi, N):
    """Exact c_n for affine maps, propagating the Fourier coefficients of U^n psi."""
    base = dict(psi.coeffs)
    cur = dict(base)
    vals = np.empty(N + 1, complex)
    for n in range(N + 1):
        vals[n] = sum(a * base.get(m, 0j).conjugate() for m, a in cur.items())
        if n < N:
            cur = sparse_apply(spec, cur)
    return vals


# ---------------------------------------------------------------------------
# Birkhoff sums


def birkhoff_sum_map(f, system, x, n, direction="forward"):
    """(1/n) sum_{l=1}^{n} f(F^{+-l} x) by direct iteration."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if direction not in ("forward", "backward"):
        raise ValueError("direction must be 'forward' or 'backward'")
    step = system.apply_coords if direction == "forward" else system.inverse_coords
    cur = np.atleast_1d(np.asarray(x.coords if isinstance(x, TorusPoint) else x, float))
    total = 0j
    for _ in range(n):
        cur = step(cur)
        total += complex(f.evaluate(cur[None])[0])
    return total / n


def rotation_birkhoff_averages(f, y, times, x, direction="backward"):
    """Closed-form (1/n) sum_{l=1}^n f(x -+ l y) for a trigonometric polynomial on T^1.

    Each mode m contributes a_m e(m x) (1/n) sum_l r^l with r = e(-+ m y); the
    geometric sum is r (1 - r^n) / (1 - r).  Returns shape (len(times), len(x)).
    """
    times = np.asarray(times, dtype=np.int64)
    x = np.asarray(x, float)
    sign = -1.0 if direction == "backward" else 1.0
    out = np.zeros((times.size, x.size), complex)
    for (m,), a in f.coeffs.items():
        if m == 0:
            out += a
            continue
        r = np.exp(2j * math.pi * sign * m * y)
        rn = np.exp(2j * math.pi * sign * ((m * times * y) % 1.0))
        g = r * (1.0 - rn) / (1.0 - r) / times
        out += a * g[:, None] * np.exp(2j * math.pi * m * x)[None, :]
    return out.real if f.real else out


def iterated_birkhoff_averages(f, system, times, x0, direction="backward"):
    """(1/n) sum_{l=1}^n f(F^{-+l} x0) at every n in ``times``, by one pass of iteration.

    ``x0`` has shape (npts, dim); returns shape (len(times), npts).
    """
    times = np.asarray(times, dtype=np.int64)
    step = system.inverse_coords if direction == "backward" else system.apply_coords
    cur = np.asarray(x0, float)
    acc = np.zeros(cur.shape[0], complex)
    out = np.empty((times.size, cur.shape[0]), complex)
    want = {int(t): i for i, t in enumerate(times)}
    for l in range(1, int(times.max()) + 1):
        cur = step(cur)
        acc += f.evaluate(cur)
        if l in want:
            out[want[l]] = acc / l
    return out.real if f.real else out
