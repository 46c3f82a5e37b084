"""Experiment commands: one directory per run, CSV/JSON outputs stamped with the config hash.

Data files (CSV, JSON, SVG, report) depend only on the config and seed, so a
rerun is byte-identical regardless of the worker count.  Wall-clock time is
kept apart in ``timing.txt``.
"""
import csv
import io
import json
import math
import os
import time
from importlib import resources

import numpy as np

from . import __version__, rng, spectral
from .conditions import condition_report
from .config import build_system, estimator_params, flow_params, map_observable
from .errors import ConfigError, MissingArtifact
from .homogeneous import frames_horocycle, frames_z, reduce_z
from .series import CorrelationSeries
from .svg import line_plot
from .time_change import (TimeChange, clock_orbit, describe as describe_flow, kushnirenko_verdict,
                          normalize_alpha, sample_fundamental_domain)
from .torus import FurstenbergSpec, RotationSpec, correlation_map
from .twisted import TwistedSystem, theta_advance_batch

CORRELATION_COLUMNS = ("time", "re", "im", "stderr")


# ---------------------------------------------------------------------------
# file helpers


def _fmt(v):
    return repr(float(v))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    return obj


def dump_json(obj):
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n"


def write_csv(path, cfg_hash, header, rows, meta=None):
    """CSV with a ``# config_hash:`` line, optional ``# key: value`` lines, then the header."""
    buf = io.StringIO()
    buf.write(f"# config_hash: {cfg_hash}\n")
    for k, v in (meta or {}).items():
        buf.write(f"# {k}: {v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])
    _write(path, buf.getvalue())


def read_csv(path):
    """Returns (meta dict from comment lines, header, rows of strings)."""
    if not os.path.exists(path):
        raise MissingArtifact(f"{path} not found")
    meta, lines = {}, []
    with open(path) as fh:
        for line in fh:
            if line.startswith("#"):
                k, _, v = line[1:].partition(":")
                meta[k.strip()] = v.strip()
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader)
    return meta, header, list(reader)


def _write(path, text):
    with open(path, "w", newline="") as fh:
        fh.write(text)


def write_series(path, series, cfg_hash):
    rows = zip(series.times, series.values.real, series.values.imag, series.stderr)
    write_csv(path, cfg_hash, CORRELATION_COLUMNS, rows,
              {"estimator": json.dumps(_jsonable(series.estimator), sort_keys=True),
               "system": series.system_desc})


def read_series(path):
    meta, header, rows = read_csv(path)
    if tuple(header) != CORRELATION_COLUMNS:
        raise MissingArtifact(f"{path} does not have columns {','.join(CORRELATION_COLUMNS)}")
    arr = np.array(rows, float).reshape(-1, 4)
    estimator = json.loads(meta.get("estimator", "{}"))
    return CorrelationSeries(arr[:, 0], arr[:, 1] + 1j * arr[:, 2], arr[:, 3], estimator,
                             meta.get("system", "")), meta


class Run:
    """Output directory of one config; keeps manifest.json and timing.txt up to date."""

    def __init__(self, cfg, out=None):
        self.cfg = cfg
        self.hash = cfg.hash()
        self.dir = out or cfg.output_dir
        os.makedirs(self.dir, exist_ok=True)
        _write(self.path("config.ini"), cfg.to_ini())

    def path(self, name):
        return os.path.join(self.dir, name)

    def record(self, command, files, caveats, wall):
        mpath = self.path("manifest.json")
        manifest = {}
        if os.path.exists(mpath):
            with open(mpath) as fh:
                manifest = json.load(fh)
            if manifest.get("config_hash") != self.hash:
                manifest = {}
        manifest.update({"config_hash": self.hash, "code_version": __version__,
                         "scenario": self.cfg.scenario, "master_seed": self.cfg.master_seed})
        manifest.setdefault("commands", {})[command] = {"files": sorted(files), "caveats": list(caveats)}
        _write(mpath, dump_json(manifest))
        with open(self.path("timing.txt"), "a") as fh:
            fh.write(f"{command}\t{wall:.3f} s\tconfig_hash {self.hash}\n")


def _timed(fn):
    def wrapper(cfg, out=None, workers=1):
        run = Run(cfg, out)
        t0 = time.perf_counter()
        files, caveats = fn(run, workers)
        run.record(fn.__name__.replace("cmd_", ""), files, caveats, time.perf_counter() - t0)
        return run.dir
    wrapper.__name__ = fn.__name__
    wrapper.__doc__ = fn.__doc__
    return wrapper


# ---------------------------------------------------------------------------
# system construction


def flow_system(cfg):
    """Normalized time change (or twisted system) for a flow scenario."""
    p = flow_params(cfg)
    tc = normalize_alpha(p["u"], p["epsilon"], p["norm_samples"], cfg.master_seed, p["y_cap"])
    return TwistedSystem(tc, p["n"]) if cfg.scenario == "flow_twisted" else tc


def _is_flow(cfg):
    return cfg.scenario.startswith("flow")


def _tc(system):
    return system.tc if isinstance(system, TwistedSystem) else system


# ---------------------------------------------------------------------------
# simulate


def _map_orbits(system, steps, points, seed):
    if not isinstance(system, (RotationSpec, FurstenbergSpec)):
        system = system.as_furstenberg()
    dim = system.dim
    x = np.stack([rng.uniforms(seed, rng.STREAM_TORUS, np.arange(points), a) for a in range(dim)], axis=-1)
    rows = []
    for n in range(steps + 1):
        for i in range(points):
            rows.append([n, i] + [float(v) for v in x[i]])
        x = system.apply_coords(x)
    return ["step", "point"] + [f"x{a + 1}" for a in range(dim)], rows


def _flow_orbits(system, steps, points, dt, seed, tol):
    tc = _tc(system)
    frames = sample_fundamental_domain(np.arange(points), seed, tc.y_cap)
    times = dt * np.arange(steps + 1)
    grid = np.broadcast_to(times, (points, times.size))
    if isinstance(system, TwistedSystem):
        sigma = grid
        theta0 = rng.uniforms(seed, rng.STREAM_CIRCLE, np.arange(points))
        theta = np.stack([theta_advance_batch(frames, float(t), tc) if t > 0 else np.zeros(points)
                          for t in times], axis=1)
        theta = (theta0[:, None] + theta) % 1.0
    elif tc.is_constant():
        sigma = grid / tc.c
        theta = None
    else:
        orbit = clock_orbit(tc, frames, times[-1], lambda _tc, fr: tc.on_frames(fr)[None],
                            tol * max(times[-1], 1.0))
        sigma = orbit.invert(grid)
        theta = None
    z = reduce_z(frames_z(frames_horocycle(tuple(v[:, None] for v in frames), sigma)))
    header = ["time", "point", "x", "y", "sigma"] + (["theta"] if theta is not None else [])
    rows = []
    for k, t in enumerate(times):
        for i in range(points):
            row = [float(t), i, float(z[i, k].real), float(z[i, k].imag), float(sigma[i, k])]
            if theta is not None:
                row.append(float(theta[i, k]))
            rows.append(row)
    return header, rows


@_timed
def cmd_simulate(run, workers):
    """Sampled orbits of the configured system (orbit.csv)."""
    cfg = run.cfg
    est = estimator_params(cfg)
    if _is_flow(cfg):
        system = flow_system(cfg)
        header, rows = _flow_orbits(system, est["simulate_steps"], est["simulate_points"], est["dt"],
                                    cfg.master_seed, est["tol"])
        caveats = ["points are reduced to the standard fundamental domain after each flow time"]
    else:
        system = build_system(cfg)
        header, rows = _map_orbits(system, est["simulate_steps"], est["simulate_points"], cfg.master_seed)
        caveats = []
    write_csv(run.path("orbit.csv"), run.hash, header, rows, {"system": system_desc(system)})
    return ["orbit.csv"], caveats


def system_desc(system):
    if isinstance(system, TimeChange):
        return describe_flow(system)
    return system.describe()


# ---------------------------------------------------------------------------
# correlate


def correlate(cfg, workers=1):
    est = estimator_params(cfg)
    if _is_flow(cfg):
        system = flow_system(cfg)
        return spectral.correlation_flow(system, est["f"], est["T"], est["dt"], est["n_samples"],
                                         cfg.master_seed, tol=est["tol"], workers=workers)
    system = build_system(cfg)
    return correlation_map(system, map_observable(cfg, system), est["N"], est["grid_log2"])


@_timed
def cmd_correlate(run, workers):
    """Correlation series of the configured observable (correlation.csv)."""
    series = correlate(run.cfg, workers)
    write_series(run.path("correlation.csv"), series, run.hash)
    caveats = []
    if series.method == "montecarlo":
        caveats.append("Monte Carlo correlations carry batch-means error bars; tails sit at the noise floor")
    return ["correlation.csv"], caveats


# ---------------------------------------------------------------------------
# conditions


def conditions(cfg, workers=1, tol_scale=1.0):
    """Condition report as a plain dict (conditions.json payload without the hash)."""
    est = estimator_params(cfg)
    if cfg.scenario == "control_rotation":
        raise ConfigError("experiment.scenario",
                          "the commutator conditions need a skew product, Furstenberg map or flow")
    if _is_flow(cfg):
        system = flow_system(cfg)
        rep = condition_report(system, times=est["times"], samples=est["cond_samples"], seed=cfg.master_seed,
                               tol_rel=est["tol"] * tol_scale, workers=workers).to_dict()
        if not isinstance(system, TwistedSystem):
            k = kushnirenko_verdict(system, est["cond_samples"], cfg.master_seed, workers)
            rep["kushnirenko"] = {"sup_estimate": k.sup_estimate, "inflated": k.inflated,
                                  "spread": k.spread, "verdict": k.verdict, "n_samples": k.n_samples}
    else:
        system = build_system(cfg)
        rep = condition_report(system, times=est["times"], samples=est["n_samples"],
                               seed=cfg.master_seed).to_dict()
    return _jsonable(rep)


def schema():
    return json.loads(resources.files("paraspec").joinpath("schemas/condition_report.schema.json").read_text())


def validate_report(doc):
    import jsonschema
    jsonschema.validate(doc, schema())


@_timed
def cmd_conditions(run, workers):
    """Commutator-condition profiles and verdicts (conditions.json)."""
    doc = conditions(run.cfg, workers)
    doc["config_hash"] = run.hash
    validate_report(doc)
    _write(run.path("conditions.json"), dump_json(doc))
    return ["conditions.json"], doc["caveats"]


# ---------------------------------------------------------------------------
# spectrum


@_timed
def cmd_spectrum(run, workers):
    """Spectral density, partial L2 norms and decay fit from correlation.csv."""
    series, meta = read_series(run.path("correlation.csv"))
    if meta.get("config_hash") != run.hash:
        raise MissingArtifact("correlation.csv was produced by a different config; rerun correlate")
    est = spectral.spectral_density(series, seed=run.cfg.master_seed)
    write_csv(run.path("spectrum.csv"), run.hash, ["frequency", "density"], zip(est.freq_grid, est.density))
    write_csv(run.path("partial_norm.csv"), run.hash, ["time", "partial_norm"],
              zip(est.partial_norm_times, est.partial_norm_curve))
    doc = {"config_hash": run.hash, "system": series.system_desc, "estimator": series.estimator,
           "beta_hat": est.beta_hat, "beta_ci": list(est.beta_ci), "verdicts": est.verdicts,
           "diagnostics": est.diagnostics}
    _write(run.path("spectrum.json"), dump_json(doc))
    stamp = f"<!-- config_hash: {run.hash} -->\n"
    _write(run.path("density.svg"), stamp + line_plot(est.freq_grid, [est.density], "spectral density",
                                                      "frequency", "density"))
    _write(run.path("partial_norm.svg"), stamp + line_plot(est.partial_norm_times, [est.partial_norm_curve],
                                                           "partial L2 norm of the correlations",
                                                           "T", "sum |c|^2", logx=True))
    files = ["spectrum.csv", "partial_norm.csv", "spectrum.json", "density.svg", "partial_norm.svg"]
    try:
        tb, ab = spectral.envelope(series)
        _write(run.path("envelope.svg"), stamp + line_plot(tb, [ab], "correlation envelope", "time", "max |c|",
                                                           logx=True, logy=True))
        files.append("envelope.svg")
    except spectral.TooFewPoints:
        pass
    caveats = ["Hann lag window: small negative sidelobes are tolerated up to 5% of the peak"]
    return files, caveats


# ---------------------------------------------------------------------------
# report

_THEOREMS = {
    "flow_timechange": "absolutely continuous spectrum of smooth time changes of the horocycle flow "
                       "(commutator criterion; Kushnirenko-type hypothesis sup|X alpha / alpha| < 1)",
    "flow_twisted": "Lebesgue spectrum of twisted horocycle flows on each nonzero circle mode",
    "furstenberg": "Lebesgue spectrum of Furstenberg transformations on each character subspace",
    "skew": "Lebesgue spectrum of skew products over irrational rotations",
    "control_rotation": "pure point spectrum of an irrational rotation (negative control)",
}


def _load_json(path):
    if not os.path.exists(path):
        return None
    with open(path) as fh:
        return json.load(fh)


def cmd_report(run_dir):
    """Markdown summary of every artifact present in ``run_dir`` (report.md)."""
    manifest = _load_json(os.path.join(run_dir, "manifest.json"))
    if manifest is None:
        raise MissingArtifact(f"{run_dir} has no manifest.json; run another command first")
    cfg_hash = manifest["config_hash"]
    scenario = manifest["scenario"]
    lines = [f"# Run report: {scenario}", "", f"config_hash: `{cfg_hash}`  ",
             f"code version: {manifest['code_version']}  ", f"master seed: {manifest['master_seed']}", "",
             f"Relevant result: {_THEOREMS[scenario]}.", ""]
    cond = _load_json(os.path.join(run_dir, "conditions.json"))
    lines.append("## Commutator conditions")
    if cond is None:
        lines.append("not computed (run `conditions`)")
    else:
        lines += [f"system: {cond['system_desc']}", "",
                  "| condition | estimate | bound | verdict |", "|---|---|---|---|",
                  f"| (i) limsup | {_num(cond['condition_i']['limsup_estimate'])} | < 1 | "
                  f"{cond['condition_i']['verdict']} |",
                  f"| (ii) sup | {_num(cond['condition_ii']['sup_estimate'])} | "
                  f"{_num(cond['condition_ii']['paper_bound'])} | {cond['condition_ii']['verdict']} |",
                  f"| (iii) sup | {_num(cond['condition_iii']['sup_estimate'])} | "
                  f"{_num(cond['condition_iii']['paper_bound'])} | {cond['condition_iii']['verdict']} |", "",
                  f"overall: **{cond['overall']}**"]
        if "kushnirenko" in cond:
            k = cond["kushnirenko"]
            lines.append(f"Kushnirenko check: sup|X alpha / alpha| = {_num(k['sup_estimate'])} "
                         f"(inflated {_num(k['inflated'])}) {k['verdict']}")
        lines += ["", "caveats:"] + [f"- {c}" for c in cond["caveats"]]
    lines += ["", "## Spectrum"]
    spec = _load_json(os.path.join(run_dir, "spectrum.json"))
    if spec is None:
        lines.append("not computed (run `correlate` then `spectrum`)")
    else:
        v = spec["verdicts"]
        lo, hi = spec["beta_ci"]
        lines += [f"- partial L2 norm: {v['l2_bounded']}",
                  f"- density nonnegative (within window tolerance): {v['density_nonneg']}",
                  f"- Bochner minimum eigenvalue: {_num(v['bochner_min_eig'])} (ok: {v['bochner_ok']})",
                  f"- mass matches c(0): {v['mass_ok']}",
                  f"- decay exponent: {_num(spec['beta_hat'])} (95% CI {_num(lo)} to {_num(hi)}) "
                  f"flags: {', '.join(spec['diagnostics'].get('decay_flags', [])) or 'none'}"]
    lines += ["", "## Artifacts"]
    for command, entry in sorted(manifest.get("commands", {}).items()):
        lines.append(f"- {command}: " + ", ".join(f"[{f}]({f})" for f in entry["files"]))
    _write(os.path.join(run_dir, "report.md"), "\n".join(lines) + "\n")
    return run_dir


def _num(v):
    return f"{v:.4g}" if isinstance(v, (int, float)) else str(v)
