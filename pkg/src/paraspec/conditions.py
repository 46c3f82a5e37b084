"""Numerical verdicts for the three commutator hypotheses of the abstract theorem.

For every implemented system the hypotheses reduce to sup-norms of explicit
scalar multiplier fields, and those fields are what is estimated here:

flows (time change alpha of the horocycle flow, commutator with X)
    (i)   (1/t) int_0^t (X alpha / alpha) o phi_tau d tau  = G(alpha, t)/t + 1
    (ii)  (G(t)/t)(Xa/a)(phi_t x) - (1/t) int (Xa/a - 1)(Xa/a) o phi_tau
          + (1/t) int X(Xa/a) o phi_tau                    (bound 4 + C'')
    (iii) (Xa/a - 1) o phi_t - (Xa/a - 1)                  (bound 2 sup|Xa/a - 1|)
twisted flows, with g = X alpha - alpha along the base horocycle
    (i)   L(t)/t + 1,  L(t) = int_0^t g o h_tau d tau
    (ii)  (1/t) int (X + tau U) g o h_tau = (1/t) int Xg o h_tau + g(h_t x) - L(t)/t
    (iii) g o h_t - g
skew products and Furstenberg maps, with f = d_{j-1} h_{j-1}
    (i)   (1/n) sum_{l=1}^n f o T^{-l} / |b_{j,j-1}|
    (ii)  (1/n) sum_{l=1}^n (d_{j-1} f) o T^{-l} / |b_{j,j-1}|
    (iii) identically zero

A limsup is replaced by the maximum over the last decade of the time grid,
inflated by 10%.  Verdicts are PASS / FAIL / INCONCLUSIVE; INCONCLUSIVE means
the estimate from the first half of the samples differs from the full
estimate by more than a quarter of the distance to the threshold.
"""
from dataclasses import asdict, dataclass, field
from functools import lru_cache, partial
import math

import numpy as np

from . import rng
from .errors import DerivativeUnstable
from .parallel import chunks, pmap
from .quadrature import PanelOrbit
from .time_change import (DERIVATIVE_TOL, TimeChange, clock_orbit, describe as describe_flow,
                          log_derivatives, sample_fundamental_domain)
from .torus import (FurstenbergSpec, SkewProductSpec, iterated_birkhoff_averages,
                    rotation_birkhoff_averages)
from .twisted import TwistedSystem

INFLATION = 1.1
STABILITY = 0.2
INCONCLUSIVE_FRACTION = 0.25
FLOW_TIMES = (10.0, 20.0, 50.0, 100.0, 200.0, 500.0, 1000.0)
MAP_TIMES = tuple(int(round(v)) for v in np.logspace(1, 4, 13))
CONSISTENT = "hypotheses numerically consistent"
NOT_CONSISTENT = "hypotheses not numerically confirmed"


@dataclass
class CommutatorProfile:
    """Per-time sup estimates of one multiplier field."""
    condition: str
    beta: float
    times: np.ndarray
    multiplier_sup: np.ndarray
    half_sup: np.ndarray
    sample_meta: dict = field(default_factory=dict)
    verdict: str = "INCONCLUSIVE"
    estimate: float = float("nan")
    paper_bound: float = float("nan")
    details: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, float)
        self.multiplier_sup = np.asarray(self.multiplier_sup, float)
        self.half_sup = np.asarray(self.half_sup, float)
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("times must be strictly increasing")
        if np.any(self.multiplier_sup < 0):
            raise ValueError("multiplier sup estimates must be nonnegative")


def _check_times(times):
    times = np.asarray(times, float)
    if times.size < 2 or times[0] <= 0 or times[-1] / times[0] < 100 * (1 - 1e-12):
        raise ValueError("times must be positive and cover at least two decades")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    return times


def last_decade(times):
    return np.asarray(times) >= np.asarray(times)[-1] / 10.0 * (1 - 1e-12)


def tail_estimate(times, sups):
    """Max over the final decade, inflated by 10%."""
    return INFLATION * float(np.max(np.asarray(sups)[last_decade(times)]))


def _tri_state(value, half_value, threshold, passes):
    margin = abs(threshold - value)
    if not np.isfinite(value):
        return "FAIL"
    if abs(value - half_value) > INCONCLUSIVE_FRACTION * margin:
        return "INCONCLUSIVE"
    return "PASS" if passes(value) else "FAIL"


def tail_variation(times, sups):
    """Growth of the last decade over the earlier record.

    max(0, max(last decade) / max(earlier) - 1); a decreasing profile is
    stable, and 0/0 counts as no growth.
    """
    sups = np.asarray(sups, float)
    mask = last_decade(times)
    late = float(np.max(sups[mask]))
    early = float(np.max(sups[~mask])) if np.any(~mask) else late
    if early == 0.0:
        return 0.0 if late == 0.0 else math.inf
    return max(0.0, late / early - 1.0)


# ---------------------------------------------------------------------------
# flow fields


def _flow_integrand(tc, frames):
    alpha = tc.on_frames(frames)
    d1, _, d2, _ = log_derivatives(tc, frames)
    return np.stack([alpha, (d1 - 1.0) * alpha, (d1 - 1.0) * d1 * alpha, d2 * alpha])


def _flow_chunk(tc, times, seed, tol_rel, idx):
    frames = sample_fundamental_domain(idx, seed, tc.y_cap)
    n, T = idx.size, times.size
    d1x, e1, d2x, e2 = log_derivatives(tc, frames)
    if tc.is_constant():
        zero = np.zeros((n, T))
        return {"i": zero, "ii": zero, "iii": zero, "g_sup": np.ones(n), "xx_sup": np.zeros(n),
                "deriv_err": np.zeros(n)}
    orbit = clock_orbit(tc, frames, times[-1], _flow_integrand, tol_rel * times[-1], error_channels=[0, 1])
    target = np.broadcast_to(times, (n, T))
    sigma = orbit.invert(target)
    cum = orbit.cumulative(sigma)                       # (4, n, T)
    end = orbit.interpolate(sigma)                      # integrand values at phi_t x
    d1_end = end[1] / end[0] + 1.0
    G = cum[1]
    m_i = np.abs(G / times + 1.0)
    m_ii = np.abs(G / times * d1_end - cum[2] / times + cum[3] / times)
    m_iii = np.abs((d1_end - 1.0) - (d1x - 1.0)[:, None])
    g_sup = np.maximum(np.abs(d1x - 1.0), np.max(np.abs(d1_end - 1.0), axis=1))
    return {"i": m_i, "ii": m_ii, "iii": m_iii, "g_sup": g_sup, "xx_sup": np.abs(d2x),
            "deriv_err": np.maximum(e1, e2)}


def _twisted_integrand(tc, frames):
    alpha = tc.on_frames(frames)
    d1, _, d2, _ = log_derivatives(tc, frames)
    return np.stack([alpha * d1 - alpha, alpha * (d2 + d1 * d1 - d1)])


def _twisted_chunk(tc, times, seed, tol_rel, idx):
    frames = sample_fundamental_domain(idx, seed, tc.y_cap)
    n, T = idx.size, times.size
    alpha = tc.on_frames(frames)
    d1x, e1, d2x, e2 = log_derivatives(tc, frames)
    gx = alpha * d1x - alpha
    orbit = PanelOrbit(frames, times[-1], partial(_twisted_integrand, tc), tol=tol_rel * times[-1],
                       error_channels=[0])
    s = np.broadcast_to(times, (n, T))
    cum = orbit.cumulative(s)
    g_end = orbit.interpolate(s)[0]
    L = cum[0]
    m_i = np.abs(L / times + 1.0)
    m_ii = np.abs(cum[1] / times + g_end - L / times)
    m_iii = np.abs(g_end - gx[:, None])
    return {"i": m_i, "ii": m_ii, "iii": m_iii,
            "g_sup": np.maximum(np.abs(gx), np.max(np.abs(g_end), axis=1)),
            "xa_sup": np.abs(alpha * d1x), "xxa_sup": np.abs(alpha * (d2x + d1x * d1x)),
            "deriv_err": np.maximum(e1, e2)}


@lru_cache(maxsize=8)
def _fields(system, times, n_samples, seed, tol_rel, workers):
    times = np.asarray(times, float)
    if isinstance(system, TwistedSystem):
        fn = partial(_twisted_chunk, system.tc, times, seed, tol_rel)
    else:
        fn = partial(_flow_chunk, system, times, seed, tol_rel)
    parts = pmap(fn, chunks(n_samples), workers)
    return {k: np.concatenate([p[k] for p in parts]) for k in parts[0]}


def flow_fields(system, times, n_samples, seed, tol_rel=1e-6, workers=1):
    """Per-sample multiplier fields (n_samples, len(times)) for a flow system."""
    out = _fields(system, tuple(float(t) for t in times), int(n_samples), int(seed), float(tol_rel),
                  int(workers))
    if np.max(out["deriv_err"], initial=0.0) > DERIVATIVE_TOL:
        raise DerivativeUnstable(f"second-derivative error estimate {np.max(out['deriv_err']):.2e}")
    return out


def _sup_profile(values, n_samples):
    full = np.max(values, axis=0)
    half = np.max(values[: max(1, n_samples // 2)], axis=0)
    return full, half


# ---------------------------------------------------------------------------
# map fields


def _map_parts(system):
    spec = system.as_furstenberg() if isinstance(system, SkewProductSpec) else system
    f = spec.derivative_field(1)
    f2 = spec.derivative_field(2)
    return spec, f, f2, abs(spec.bij(spec.j, spec.j - 1))


def map_sample_points(dim, n_samples, seed):
    idx = np.arange(n_samples)
    return np.stack([rng.uniforms(seed, rng.STREAM_TORUS, idx, a) for a in range(dim)], axis=-1)


def _map_averages(spec, f, times, x):
    if f.is_zero():
        return np.zeros((len(times), x.shape[0]))
    if spec.j == 2:
        return rotation_birkhoff_averages(f, spec.y, times, x[:, 0], "backward")
    return iterated_birkhoff_averages(f, spec.base_map(), times, x, "backward")


def map_fields(system, times, n_samples, seed):
    spec, f, f2, bnorm = _map_parts(system)
    times = np.asarray(times, dtype=np.int64)
    x = map_sample_points(spec.j - 1, n_samples, seed)
    m_i = np.abs(_map_averages(spec, f, times, x)).T / bnorm
    m_ii = np.abs(_map_averages(spec, f2, times, x)).T / bnorm
    return {"i": m_i, "ii": m_ii, "f2_bound": f2.sup_bound() / bnorm}


def _is_map(system):
    return isinstance(system, (SkewProductSpec, FurstenbergSpec))


# ---------------------------------------------------------------------------
# profiles


def _meta(system, times, n_samples, seed, **extra):
    meta = {"seed": int(seed), "samples": int(n_samples), "times": [float(t) for t in times]}
    meta.update(extra)
    return meta


def cond_i_profile(system, times=None, samples=2000, seed=0, tol_rel=1e-6, workers=1):
    if _is_map(system):
        times = _check_times(MAP_TIMES if times is None else times)
        fields = map_fields(system, times, samples, seed)
    else:
        times = _check_times(FLOW_TIMES if times is None else times)
        fields = flow_fields(system, times, samples, seed, tol_rel, workers)
    full, half = _sup_profile(fields["i"], samples)
    est, half_est = tail_estimate(times, full), tail_estimate(times, half)
    verdict = _tri_state(est, half_est, 1.0, lambda v: v < 1.0)
    return CommutatorProfile("i", 1.0, times, full, half, _meta(system, times, samples, seed, tol_rel=tol_rel),
                             verdict, est, 1.0, {"half_sample_estimate": half_est})


def cond_ii_profile(system, times=None, samples=2000, seed=0, tol_rel=1e-6, workers=1):
    if _is_map(system):
        times = _check_times(MAP_TIMES if times is None else times)
        fields = map_fields(system, times, samples, seed)
        bound = fields["f2_bound"]
        details = {"bound_desc": "sup|d^2 h| / |b| (sum of absolute Fourier coefficients)"}
    else:
        times = _check_times(FLOW_TIMES if times is None else times)
        fields = flow_fields(system, times, samples, seed, tol_rel, workers)
        if isinstance(system, TwistedSystem):
            c2, c1, c0 = (float(np.max(fields[k])) for k in ("xxa_sup", "xa_sup", "g_sup"))
            bound = c2 + c1 + 2.0 * c0
            details = {"bound_desc": "C'' + C + 2 C' with sampled sup|X(X alpha)|, sup|X alpha|, "
                                     "sup|X alpha - alpha|", "C2": c2, "C1": c1, "C0": c0}
        else:
            c2 = float(np.max(fields["xx_sup"]))
            bound = 4.0 + c2
            details = {"bound_desc": "4 + C'' with C'' the sampled sup|X(X alpha / alpha)|", "C2": c2}
    full, half = _sup_profile(fields["ii"], samples)
    est = float(np.max(full[last_decade(times)]))
    var, half_var = tail_variation(times, full), tail_variation(times, half)
    verdict = _tri_state(var, half_var, STABILITY, lambda v: v < STABILITY)
    details.update({"tail_variation": var, "half_sample_variation": half_var,
                    "within_bound": bool(est <= bound * INFLATION)})
    return CommutatorProfile("ii", 1.0, times, full, half, _meta(system, times, samples, seed, tol_rel=tol_rel),
                             verdict, est, bound, details)


def cond_iii_profile(system, times=None, samples=2000, seed=0, tol_rel=1e-6, workers=1):
    if _is_map(system):
        times = _check_times(MAP_TIMES if times is None else times)
        zero = np.zeros(times.size)
        return CommutatorProfile("iii", 1.0, times, zero, zero.copy(), _meta(system, times, samples, seed),
                                 "PASS", 0.0, 0.0, {"exact": True})
    times = _check_times(FLOW_TIMES if times is None else times)
    fields = flow_fields(system, times, samples, seed, tol_rel, workers)
    full, half = _sup_profile(fields["iii"], samples)
    est = float(np.max(full))
    bound = 2.0 * float(np.max(fields["g_sup"]))
    threshold = bound * INFLATION
    verdict = _tri_state(est, float(np.max(half)), threshold, lambda v: v <= threshold)
    return CommutatorProfile("iii", 1.0, times, full, half, _meta(system, times, samples, seed, tol_rel=tol_rel),
                             verdict, est, bound, {"exact": False})


# ---------------------------------------------------------------------------
# report


@dataclass
class ConditionReport:
    condition_i: dict
    condition_ii: dict
    condition_iii: dict
    preliminary: dict
    system_desc: str
    caveats: list
    overall: str
    profiles: dict

    def to_dict(self):
        return asdict(self)


def _system_desc(system):
    if isinstance(system, TimeChange):
        return describe_flow(system)
    return system.describe()


def _preliminary(system):
    if isinstance(system, TimeChange):
        return {"B1_desc": "(1/alpha) I", "B2_desc": "alpha I",
                "pairing": "L^2(vol_alpha) via importance weight alpha"}
    return {"B1_desc": "I", "B2_desc": "I", "pairing": "L^2 of the invariant measure"}


def _caveats(system):
    out = ["limsup replaced by the maximum over the last decade of the time grid, inflated by 10%",
           "verdicts are numerical consistency checks at finite horizon, not proofs"]
    if _is_map(system):
        out.append("sup norms estimated on seeded sample points of the torus")
        return out
    out += ["finite-volume extrapolation: the modular surface is not compact",
            "sup norms are Monte Carlo maxima over seeded points (Im z <= y_cap)",
            "condition (ii) stability uses the tail-variation convention (< 20%)"]
    if isinstance(system, TwistedSystem):
        out += ["unique ergodicity of the twisted flow is only known for cocompact lattices",
                "projection constants C_P are omitted: multipliers are reported per unit circle mode"]
    return out


def _profile_dict(p):
    return {"condition": p.condition, "beta": p.beta, "times": [float(t) for t in p.times],
            "multiplier_sup": [float(v) for v in p.multiplier_sup],
            "half_sample_sup": [float(v) for v in p.half_sup], "sample_meta": p.sample_meta}


def _clean(d):
    return {k: (float(v) if isinstance(v, (np.floating, float)) else v) for k, v in d.items()}


def assemble_report(system, profiles):
    """Combine the three profiles; overall consistent iff all three PASS."""
    p1, p2, p3 = (profiles[k] for k in ("i", "ii", "iii"))
    seeds = {p.sample_meta.get("seed") for p in (p1, p2, p3)}
    caveats = _caveats(system)
    if len(seeds) > 1:
        caveats.append("profiles were computed with different master seeds")
    verdicts = (p1.verdict, p2.verdict, p3.verdict)
    overall = CONSISTENT if all(v == "PASS" for v in verdicts) else NOT_CONSISTENT
    return ConditionReport(
        condition_i=_clean({"limsup_estimate": p1.estimate, "threshold": 1.0, "verdict": p1.verdict,
                            **p1.details}),
        condition_ii=_clean({"sup_estimate": p2.estimate, "paper_bound": p2.paper_bound,
                             "verdict": p2.verdict, **p2.details}),
        condition_iii=_clean({"sup_estimate": p3.estimate, "paper_bound": p3.paper_bound,
                              "verdict": p3.verdict, **p3.details}),
        preliminary=_preliminary(system),
        system_desc=_system_desc(system),
        caveats=caveats,
        overall=overall,
        profiles={k: _profile_dict(p) for k, p in (("i", p1), ("ii", p2), ("iii", p3))},
    )


def condition_report(system, times=None, samples=2000, seed=0, tol_rel=1e-6, workers=1):
    kw = dict(times=times, samples=samples, seed=seed, tol_rel=tol_rel, workers=workers)
    return assemble_report(system, {"i": cond_i_profile(system, **kw), "ii": cond_ii_profile(system, **kw),
                                    "iii": cond_iii_profile(system, **kw)})
