import glob
import json
import os

from hypothesis import given, settings, strategies as st
import jsonschema
import numpy as np
import pytest

from paraspec import rng
from paraspec.cli import main
from paraspec.config import ExperimentConfig, build_system, load, loads, parse_observable
from paraspec.errors import ConfigError
from paraspec.runner import read_csv, read_series, schema
from paraspec.torus import GOLDEN

from conftest import CONFIGS

SMALL_MAP = """
[experiment]
scenario = furstenberg
master_seed = 5
output_dir = {out}

[system]
b = 0 0; 1 0

[estimator]
N = 300
grid_log2 = 11
n_samples = 64
simulate_steps = 50
simulate_points = 3
"""

SMALL_FLOW = """
[experiment]
scenario = flow_timechange
master_seed = 9
output_dir = {out}

[system]
epsilon = 0.1
norm_samples = 20000

[estimator]
T = 20
dt = 0.25
n_samples = 64
cond_samples = 32
times = 10 100 1000
simulate_points = 2
simulate_steps = 8
"""


def write(tmp_path, text, name="c.ini", out="run"):
    p = tmp_path / name
    p.write_text(text.format(out=str(tmp_path / out)))
    return str(p)


# ---------------------------------------------------------------------------
# config parsing


@pytest.mark.parametrize("path", sorted(glob.glob(os.path.join(CONFIGS, "*.ini"))))
def test_shipped_configs_round_trip(path):
    cfg = load(path)
    again = loads(cfg.to_ini())
    assert again == cfg and again.hash() == cfg.hash()


def test_hash_ignores_output_dir_but_not_seed():
    cfg = loads(SMALL_MAP.format(out="a"))
    other = loads(SMALL_MAP.format(out="b"))
    assert cfg.hash() == other.hash()
    assert cfg.with_seed(6).hash() != cfg.hash()


@settings(max_examples=40, deadline=None)
@given(seed=st.integers(0, 2 ** 64 - 1), n=st.integers(0, 4096), amp=st.floats(-2, 2, allow_nan=False))
def test_round_trip_property(seed, n, amp):
    cfg = ExperimentConfig("skew", seed, "out", {"y": "golden", "b": "2", "k": "1", "eta": f"cos:1:{amp!r}"},
                           {"N": str(n), "grid_log2": "12", "n_samples": "8", "times": "",
                            "simulate_steps": "4", "simulate_points": "1"}, {"psi": "const:1"})
    back = loads(cfg.to_ini())
    assert back == cfg and back.hash() == cfg.hash()


@pytest.mark.parametrize("patch,field", [
    (("epsilon = 0.1", "epsilon = 0.95"), "system.epsilon"),
    (("dt = 0.25", "dt = -1"), "estimator.dt"),
    (("T = 20", "T = 20\nbogus = 1"), "estimator.bogus"),
    (("scenario = flow_timechange", "scenario = nothing"), "experiment.scenario"),
    (("times = 10 100 1000", "times = 10 20"), "estimator.times"),
])
def test_field_level_errors(patch, field):
    with pytest.raises(ConfigError) as e:
        loads(SMALL_FLOW.format(out="x").replace(*patch))
    assert e.value.field == field


def test_map_config_errors():
    bad = SMALL_MAP.format(out="x").replace("b = 0 0; 1 0", "b = 0 0; 0 0")
    with pytest.raises(ConfigError) as e:
        loads(bad)
    assert e.value.field.startswith("system")
    with pytest.raises(ConfigError):
        loads(SMALL_MAP.format(out="x").replace("[system]", "[system]\ny = 0.5"))


def test_observable_syntax():
    f = parse_observable("cos:1:0.3; cos:2:0.1:0.5; const:1", 1)
    assert f.real and f.mean() == 1.0
    assert parse_observable("char:1,-1:2", 2).coeffs == {(1, -1): 2.0}
    with pytest.raises(ValueError):
        parse_observable("sin:1", 1)


def test_build_system_golden():
    assert build_system(loads(SMALL_MAP.format(out="x"))).y == GOLDEN


# ---------------------------------------------------------------------------
# CLI


def run(argv):
    return main([str(a) for a in argv])


def test_simulate_matches_closed_form(tmp_path):
    cfg = write(tmp_path, SMALL_MAP)
    assert run(["simulate", "--config", cfg]) == 0
    meta, header, rows = read_csv(tmp_path / "run" / "orbit.csv")
    assert header == ["step", "point", "x1", "x2"]
    a = np.array(rows, float)
    x0 = np.stack([rng.uniforms(5, rng.STREAM_TORUS, np.arange(3), k) for k in range(2)], axis=-1)
    np.testing.assert_array_equal(a[a[:, 0] == 0][:, 2:], x0)
    n = a[:, 0]
    x1, x2 = x0[a[:, 1].astype(int)].T
    exp2 = (x2 + n * x1 + n * (n - 1) / 2 * GOLDEN) % 1.0
    d = np.abs((a[:, 3] - exp2 + 0.5) % 1.0 - 0.5)
    assert d.max() < 1e-10
    assert meta["config_hash"] == loads(open(cfg).read()).hash()


def test_full_map_pipeline(tmp_path):
    cfg = write(tmp_path, SMALL_MAP)
    for cmd in ("correlate", "conditions", "spectrum"):
        assert run([cmd, "--config", cfg]) == 0
    out = tmp_path / "run"
    series, meta = read_series(out / "correlation.csv")
    assert series.values[0] == 1.0 and np.max(np.abs(series.values[1:])) < 1e-9
    with open(out / "correlation.csv") as fh:
        lines = [l for l in fh if not l.startswith("#")]
    assert lines[0].strip() == "time,re,im,stderr"
    doc = json.load(open(out / "conditions.json"))
    jsonschema.validate(doc, schema())
    assert doc["overall"] == "hypotheses numerically consistent"
    assert run(["report", out]) == 0
    text = (out / "report.md").read_text()
    assert "PASS" in text and "BOUNDED" in text
    h = meta["config_hash"]
    for f in os.listdir(out):
        if f != "config.ini":
            assert h in (out / f).read_text(), f


def test_exit_codes(tmp_path, capsys):
    cfg = write(tmp_path, SMALL_MAP.replace("N = 300", "N = 3000"))
    assert run(["spectrum", "--config", cfg]) == 2
    assert "MissingArtifact" in capsys.readouterr().err
    # 3000 steps push the frequency support past a 2^11 grid
    assert run(["correlate", "--config", cfg]) == 3
    assert "GridTooCoarse" in capsys.readouterr().err
    bad = write(tmp_path, SMALL_MAP.replace("N = 300", "N = -1"), "bad.ini")
    assert run(["correlate", "--config", bad]) == 2
    assert "ConfigError" in capsys.readouterr().err
    assert run(["report", tmp_path / "nowhere"]) == 2


def test_rotation_has_no_conditions(tmp_path):
    assert run(["conditions", "--config", os.path.join(CONFIGS, "control_rotation.ini"),
                "--out", tmp_path / "rot"]) == 2


def test_seed_override(tmp_path):
    cfg = write(tmp_path, SMALL_MAP)
    assert run(["simulate", "--config", cfg, "--seed", 77, "--out", tmp_path / "s77"]) == 0
    text = (tmp_path / "s77" / "config.ini").read_text()
    assert "master_seed = 77" in text


def data_files(d):
    out = {}
    for f in sorted(os.listdir(d)):
        if f.endswith((".csv", ".json", ".svg")):
            out[f] = (d / f).read_bytes()
    return out


def test_flow_pipeline_worker_determinism(tmp_path):
    cfg = write(tmp_path, SMALL_FLOW)
    for workers, out in ((1, "w1"), (4, "w4")):
        for cmd in ("simulate", "correlate", "conditions", "spectrum"):
            assert run([cmd, "--config", cfg, "--workers", workers, "--out", tmp_path / out]) == 0
    a, b = data_files(tmp_path / "w1"), data_files(tmp_path / "w4")
    assert a.keys() == b.keys() and len(a) >= 8
    for k in a:
        assert a[k] == b[k], k
    meta, header, rows = read_csv(tmp_path / "w1" / "orbit.csv")
    assert header == ["time", "point", "x", "y", "sigma"]
    assert [float(v) for v in rows[0][:2]] == [0.0, 0.0]


def test_workers_env_default(tmp_path, monkeypatch):
    monkeypatch.setenv("PARASPEC_WORKERS", "2")
    cfg = write(tmp_path, SMALL_MAP)
    assert run(["simulate", "--config", cfg]) == 0
    bad = write(tmp_path, SMALL_MAP, "c2.ini")
    assert run(["simulate", "--config", bad, "--workers", 0]) == 2
