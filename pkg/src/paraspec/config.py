"""INI experiment configs: parsing, validation and canonical hashing.

A config has three required sections::

    [experiment]
    scenario = furstenberg          # furstenberg | skew | flow_timechange | flow_twisted | control_rotation
    master_seed = 12345
    output_dir = runs/furstenberg

    [system]                         # scenario parameters
    [estimator]                      # N, grid_log2, T, dt, n_samples, ...

and an optional ``[observable]`` section.  Trigonometric polynomials are
written as ``;``-separated terms, e.g. ``cos:1:0.3; cos:2:0.1:0.5; const:1``
(``cos:m:amplitude[:phase]``, ``char:m[:amplitude]``, ``const:value``; a
multi-dimensional frequency is written ``1,1``).  The golden rotation number
may be given as ``golden``.
"""
import configparser
from dataclasses import dataclass, field
import hashlib
import io
import math

from .errors import ConfigError
from .observables import names as observable_names
from .torus import GOLDEN, FourierObservable, FurstenbergSpec, RotationSpec, SkewProductSpec

SCENARIOS = ("furstenberg", "skew", "flow_timechange", "flow_twisted", "control_rotation")
SECTIONS = ("experiment", "system", "estimator", "observable")

# (section, key) -> default, per scenario; anything not listed is rejected
_MAP_ESTIMATOR = {"N": "4096", "grid_log2": "16", "n_samples": "4096", "times": "", "simulate_steps": "64",
                  "simulate_points": "4"}
_FLOW_ESTIMATOR = {"T": "200", "dt": "0.5", "n_samples": "512", "cond_samples": "256", "times": "",
                   "tol": "1e-6", "simulate_points": "4", "simulate_steps": "20"}
DEFAULTS = {
    "furstenberg": {"system": {"d": "2", "y": "golden", "b": "0 0; 1 0", "j": "2", "k": "1",
                               "h1": "0", "h2": "0", "h3": "0"},
                    "estimator": _MAP_ESTIMATOR, "observable": {"psi": "const:1"}},
    "skew": {"system": {"y": "golden", "b": "1", "k": "1", "eta": "cos:1:0.1"},
             "estimator": _MAP_ESTIMATOR, "observable": {"psi": "const:1"}},
    "control_rotation": {"system": {"y": "golden"},
                         "estimator": dict(_MAP_ESTIMATOR, n_samples="0"), "observable": {"psi": "char:1"}},
    "flow_timechange": {"system": {"epsilon": "0.1", "u": "discriminant", "norm_samples": "20000",
                                   "y_cap": "50"},
                        "estimator": _FLOW_ESTIMATOR, "observable": {"f": "discriminant"}},
    "flow_twisted": {"system": {"epsilon": "0.1", "u": "discriminant", "norm_samples": "20000",
                                "y_cap": "50", "n": "1"},
                     "estimator": _FLOW_ESTIMATOR, "observable": {"f": "discriminant"}},
}


@dataclass
class ExperimentConfig:
    scenario: str
    master_seed: int
    output_dir: str
    system: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=dict)
    observable: dict = field(default_factory=dict)

    def sections(self):
        return {"experiment": {"scenario": self.scenario, "master_seed": str(self.master_seed),
                               "output_dir": self.output_dir},
                "system": dict(self.system), "estimator": dict(self.estimator),
                "observable": dict(self.observable)}

    def to_ini(self):
        """Canonical text: sections in fixed order, keys sorted."""
        out = io.StringIO()
        for name in SECTIONS:
            out.write(f"[{name}]\n")
            for k, v in sorted(self.sections()[name].items()):
                out.write(f"{k} = {v}\n")
            out.write("\n")
        return out.getvalue()

    def hash(self):
        """sha256 of the canonical serialization, excluding the output directory."""
        secs = self.sections()
        secs["experiment"].pop("output_dir")
        text = "\n".join(f"[{n}]\n" + "\n".join(f"{k}={v}" for k, v in sorted(secs[n].items()))
                         for n in SECTIONS)
        return hashlib.sha256(text.encode()).hexdigest()

    def with_seed(self, seed):
        return ExperimentConfig(self.scenario, int(seed), self.output_dir, dict(self.system),
                                dict(self.estimator), dict(self.observable))


# ---------------------------------------------------------------------------
# parsing


def _parser():
    p = configparser.ConfigParser(inline_comment_prefixes=("#",), interpolation=None)
    p.optionxform = str
    return p


def loads(text):
    p = _parser()
    try:
        p.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("file", str(exc)) from None
    return _from_parser(p)


def load(path):
    try:
        with open(path) as fh:
            return loads(fh.read())
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc.strerror}") from None


def _from_parser(p):
    for name in p.sections():
        if name not in SECTIONS:
            raise ConfigError(name, "unknown section")
    if not p.has_section("experiment"):
        raise ConfigError("experiment", "missing section")
    exp = dict(p["experiment"])
    scenario = exp.pop("scenario", None)
    if scenario not in SCENARIOS:
        raise ConfigError("experiment.scenario", f"must be one of {', '.join(SCENARIOS)}")
    try:
        seed = int(exp.pop("master_seed", "0"), 0)
    except ValueError:
        raise ConfigError("experiment.master_seed", "must be an integer") from None
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("experiment.master_seed", "must be a 64-bit unsigned integer")
    out_dir = exp.pop("output_dir", f"runs/{scenario}")
    if exp:
        raise ConfigError(f"experiment.{sorted(exp)[0]}", "unknown key")
    defaults = DEFAULTS[scenario]
    secs = {}
    for name in ("system", "estimator", "observable"):
        given = dict(p[name]) if p.has_section(name) else {}
        for k in given:
            if k not in defaults[name]:
                raise ConfigError(f"{name}.{k}", f"unknown key for scenario {scenario}")
        secs[name] = {k: given.get(k, v) for k, v in defaults[name].items()}
    cfg = ExperimentConfig(scenario, seed, out_dir, secs["system"], secs["estimator"], secs["observable"])
    validate(cfg)
    return cfg


# ---------------------------------------------------------------------------
# typed accessors


def _get(cfg, section, key, conv, check=None, message=""):
    raw = getattr(cfg, section)[key]
    try:
        val = conv(raw)
    except (ValueError, TypeError):
        raise ConfigError(f"{section}.{key}", f"cannot parse {raw!r}") from None
    if check is not None and not check(val):
        raise ConfigError(f"{section}.{key}", message or f"invalid value {raw!r}")
    return val


def parse_real(text):
    text = text.strip()
    if text.lower() == "golden":
        return GOLDEN
    if text.lower().startswith("sqrt"):
        return math.sqrt(float(text[4:].strip("() "))) % 1.0
    return float(text)


def parse_int_matrix(text):
    return [[int(v) for v in row.split()] for row in text.split(";") if row.strip()]


def parse_frequency(text):
    return tuple(int(v) for v in text.split(","))


def parse_observable(text, dim):
    """Trigonometric polynomial from the term syntax described in the module docstring."""
    total = FourierObservable.zero(dim)
    text = text.strip()
    if text in ("", "0", "zero"):
        return total
    for term in text.split(";"):
        parts = [s.strip() for s in term.strip().split(":")]
        kind = parts[0]
        if kind == "const":
            obs = FourierObservable.constant(dim, float(parts[1]) if len(parts) > 1 else 1.0)
        elif kind in ("cos", "char"):
            m = parse_frequency(parts[1])
            if len(m) != dim:
                raise ValueError(f"frequency {m} is not {dim}-dimensional")
            amp = float(parts[2]) if len(parts) > 2 else 1.0
            if kind == "cos":
                obs = FourierObservable.cos_mode(m, amp, float(parts[3]) if len(parts) > 3 else 0.0)
            else:
                obs = FourierObservable(dim, {m: amp})
        else:
            raise ValueError(f"unknown term {kind!r}")
        total = total + obs
    return total


def _obs(cfg, section, key, dim, real=False):
    raw = getattr(cfg, section)[key]
    try:
        obs = parse_observable(raw, dim)
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"{section}.{key}", str(exc)) from None
    if real and not obs.real:
        raise ConfigError(f"{section}.{key}", "must be a real trigonometric polynomial")
    return obs


def _times(cfg, integer):
    raw = cfg.estimator["times"].strip()
    if not raw:
        return None
    try:
        vals = [float(v) for v in raw.replace(",", " ").split()]
    except ValueError:
        raise ConfigError("estimator.times", "must be a list of numbers") from None
    if len(vals) < 2 or vals[0] <= 0 or vals[-1] / vals[0] < 100 or any(b <= a for a, b in zip(vals, vals[1:])):
        raise ConfigError("estimator.times", "must be increasing, positive and cover two decades")
    return [int(round(v)) for v in vals] if integer else vals


def build_system(cfg):
    """Typed system object for the scenario (validating module preconditions)."""
    s = cfg.scenario
    try:
        if s == "control_rotation":
            return RotationSpec(_get(cfg, "system", "y", parse_real))
        if s == "skew":
            return SkewProductSpec(y=_get(cfg, "system", "y", parse_real), b=_get(cfg, "system", "b", int),
                                   eta_lift=_obs(cfg, "system", "eta", 1, real=True),
                                   k=_get(cfg, "system", "k", int))
        if s == "furstenberg":
            d = _get(cfg, "system", "d", int, lambda v: 2 <= v <= 4, "d must lie in 2..4")
            h = []
            for l in range(1, d):
                key = f"h{l}"
                raw = cfg.system[key]
                try:
                    obs = parse_observable(raw, l)
                except (ValueError, IndexError) as exc:
                    raise ConfigError(f"system.{key}", str(exc)) from None
                if not obs.real:
                    raise ConfigError(f"system.{key}", "must be a real trigonometric polynomial")
                h.append(obs)
            return FurstenbergSpec(d=d, y=_get(cfg, "system", "y", parse_real),
                                   b=_get(cfg, "system", "b", parse_int_matrix), h=tuple(h),
                                   j=_get(cfg, "system", "j", int), k=_get(cfg, "system", "k", int))
    except ConfigError as exc:
        if "." in exc.field:
            raise
        raise ConfigError(f"system.{exc.field}", str(exc).split(": ", 1)[-1]) from None
    raise ValueError(f"{s} is a flow scenario; use the time change builders")


def flow_params(cfg):
    eps = _get(cfg, "system", "epsilon", float, lambda v: 0.0 <= v < 0.9,
               "epsilon must lie in [0, 0.9) (positivity headroom)")
    u = _get(cfg, "system", "u", str, lambda v: v in observable_names(),
             f"known observables: {observable_names()}")
    out = {"epsilon": eps, "u": u,
           "norm_samples": _get(cfg, "system", "norm_samples", int, lambda v: v >= 100, "need >= 100"),
           "y_cap": _get(cfg, "system", "y_cap", float, lambda v: v > 2.0, "must exceed 2")}
    if cfg.scenario == "flow_twisted":
        out["n"] = _get(cfg, "system", "n", int, lambda v: v != 0, "circle mode must be nonzero")
    return out


def estimator_params(cfg):
    if cfg.scenario.startswith("flow"):
        f = _get(cfg, "observable", "f", str, lambda v: v in observable_names(),
                 f"known observables: {observable_names()}")
        T = _get(cfg, "estimator", "T", float, lambda v: 0 < v <= 1e4, "T must lie in (0, 1e4]")
        dt = _get(cfg, "estimator", "dt", float, lambda v: 0 < v <= T, "dt must lie in (0, T]")
        if T / dt > 1e5:
            raise ConfigError("estimator.dt", "more than 1e5 time points")
        return {"f": f, "T": T, "dt": dt,
                "n_samples": _get(cfg, "estimator", "n_samples", int, lambda v: v >= 32, "need >= 32"),
                "cond_samples": _get(cfg, "estimator", "cond_samples", int, lambda v: v >= 2, "need >= 2"),
                "tol": _get(cfg, "estimator", "tol", float, lambda v: 0 < v < 1e-2, "must lie in (0, 1e-2)"),
                "times": _times(cfg, integer=False),
                "simulate_points": _get(cfg, "estimator", "simulate_points", int, lambda v: 1 <= v <= 1000),
                "simulate_steps": _get(cfg, "estimator", "simulate_steps", int, lambda v: 1 <= v <= 10000)}
    return {"N": _get(cfg, "estimator", "N", int, lambda v: 0 <= v <= 2 ** 16, "N must lie in [0, 65536]"),
            "grid_log2": _get(cfg, "estimator", "grid_log2", int, lambda v: 3 <= v <= 20,
                              "grid_log2 must lie in 3..20"),
            "n_samples": _get(cfg, "estimator", "n_samples", int, lambda v: v >= 0, "must be >= 0"),
            "times": _times(cfg, integer=True),
            "simulate_points": _get(cfg, "estimator", "simulate_points", int, lambda v: 1 <= v <= 1000),
            "simulate_steps": _get(cfg, "estimator", "simulate_steps", int, lambda v: 1 <= v <= 100000)}


def map_observable(cfg, system):
    dim = 1 if isinstance(system, (RotationSpec, SkewProductSpec)) else system.j - 1
    return _obs(cfg, "observable", "psi", dim)


def validate(cfg):
    """Check every parameter against the module preconditions; raises ConfigError."""
    if cfg.scenario.startswith("flow"):
        flow_params(cfg)
    else:
        system = build_system(cfg)
        map_observable(cfg, system)
        est = estimator_params(cfg)
        if isinstance(system, FurstenbergSpec) and system.j > 2 and est["grid_log2"] > 10:
            raise ConfigError("estimator.grid_log2", "grids above 2^10 per axis are too large for j > 2")
    estimator_params(cfg)
    return cfg
