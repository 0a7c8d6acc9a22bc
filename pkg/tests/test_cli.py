import json
import shutil
from pathlib import Path

import numpy as np
import pytest

from llbtoc import cli, io
from llbtoc.config import RunConfig
from llbtoc.errors import ConfigError

ROOT = Path(__file__).resolve().parents[1]
RADIAL = json.loads((ROOT / "configs" / "radial.json").read_text())


def write_cfg(tmp_path, **over):
    cfg = json.loads(json.dumps(RADIAL))
    for k, v in over.items():
        cfg[k] = v
    p = tmp_path / "run.json"
    p.write_text(json.dumps(cfg))
    return p


def run(tmp_path, cmd, cfg, name="out", seed=0):
    out = tmp_path / name
    code = cli.main([cmd, "--config", str(cfg), "--out", str(out), "--seed", str(seed), "--quiet"])
    return code, out


def test_hit_time_radial(tmp_path):
    code, out = run(tmp_path, "hit-time", write_cfg(tmp_path))
    assert code == 0
    rep = json.loads((out / "hit_time.json").read_text())
    assert abs(rep["T_star"] - 0.45815) < 1e-3
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "hit-time" and "hit_time.json" in man["outputs"]


def test_simulate_zero_data(tmp_path):
    cfg = write_cfg(tmp_path, initial={"preset": "constant", "vector": [0, 0, 0]},
                    target={"preset": "constant", "vector": [1, 0, 0], "delta": 0.5},
                    solver={"dt": 1e-2, "horizon": 0.2})
    code, out = run(tmp_path, "simulate", cfg)
    assert code == 0
    snap = io.read_snapshot(out / "state.llbf")
    assert snap.role == "state" and not snap.frames.any()
    d = json.loads((out / "diagnostics.json").read_text())
    assert d["energy"]["sup_h2eq_sq"] == 0.0 and d["T_star"] is None


def test_manifest_reproducible(tmp_path):
    cfg = write_cfg(tmp_path, solver={"dt": 1e-2, "horizon": 1.0})
    _, a = run(tmp_path, "simulate", cfg, "a")
    _, b = run(tmp_path, "simulate", cfg, "b")
    ma, mb = (json.loads((d / "manifest.json").read_text()) for d in (a, b))
    assert ma["outputs"] == mb["outputs"] and ma["config_sha256"] == mb["config_sha256"]


def test_adjoint_and_grad_check(tmp_path):
    cfg = write_cfg(tmp_path)
    code, out = run(tmp_path, "adjoint", cfg)
    assert code == 0
    rep = json.loads((out / "adjoint.json").read_text())
    assert all(d["duality_residual"] < 1e-10 and d["bridge_residual"] < 1e-8 for d in rep["directions"])
    assert io.read_snapshot(out / "adjoint.llbf").role == "adjoint"
    code, out = run(tmp_path, "grad-check", cfg, "g")
    assert code == 0
    rep = json.loads((out / "grad_check.json").read_text())
    assert max(rep["riesz_residuals"]) < 1e-8 and rep["sweep"]["passed"]


def test_optimize_then_verify(tmp_path):
    cfg = write_cfg(tmp_path)
    code, out = run(tmp_path, "optimize", cfg)
    assert code == 0
    assert (out / "iterations.csv").read_text().startswith("iter,J,time_term,control_term,grad_norm,T,constraint_violation")
    ctrl = out / "control.llbf"
    good = write_cfg(tmp_path, control={"preset": "file", "path": str(ctrl)})
    code, vout = run(tmp_path, "verify", good, "v")
    assert code == 0
    assert json.loads((vout / "report.json").read_text())["verdict"]["optimal"]
    snap = io.read_snapshot(ctrl)
    bad_path = tmp_path / "bad.llbf"
    io.write_snapshot(bad_path, snap.grid, snap.frames + np.array([0.05, 0, 0]), snap.times, "control")
    bad = write_cfg(tmp_path, control={"preset": "file", "path": str(bad_path)})
    code, vout = run(tmp_path, "verify", bad, "vb")
    assert code == 1
    assert not json.loads((vout / "report.json").read_text())["verdict"]["first_order"]


@pytest.mark.parametrize("over, code", [
    ({"target": {"preset": "constant", "vector": [0, 0, 3.0], "delta": 0.5}}, 3),
    ({"target": {"preset": "constant", "vector": [0, 0, 0], "delta": 2.0}}, 7),
    ({"solver": {"dt": 1e-3, "horizon": 1.0, "blowup_cap": 0.5}}, 5),
    ({"solver": {"dt": -1.0}}, 2),
])
def test_exit_codes(tmp_path, over, code):
    got, _ = run(tmp_path, "hit-time", write_cfg(tmp_path, **over))
    assert got == code


def test_config_errors(tmp_path):
    assert cli.main(["simulate", "--config", str(tmp_path / "missing.json"), "--quiet"]) == 2
    p = tmp_path / "broken.json"
    p.write_text("{not json")
    assert cli.main(["simulate", "--config", str(p), "--out", str(tmp_path / "o"), "--quiet"]) == 2
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"grid": {"dim": 1, "cells": [64], "extent": [1.0]}, "bogus": {}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"control": {"preset": "file", "path": "nope.llbf"}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"optimizer": {"learning_rate": 1.0}})
    with pytest.raises(ConfigError):
        RunConfig.from_dict({"initial": {"preset": "vortex"}}).initial()


def test_config_presets(tmp_path):
    cfg = RunConfig.from_dict(json.loads((ROOT / "configs" / "bump2d.json").read_text()))
    m0 = cfg.initial()
    assert m0.shape == (32, 32, 3)
    assert np.isclose(m0[..., 0].max(), 0.6 * np.cos(np.pi / 64) ** 2)
    u = RunConfig.from_dict({"control": {"preset": "constant", "vector": [1, 2, 3], "nodes": 3}}).control()
    assert u.frames.shape == (3, 64, 3) and np.all(u.frames[..., 2] == 3)
    g = cfg.grid()
    io.write_snapshot(tmp_path / "m0.llbf", g, m0)
    shutil.copy(ROOT / "configs" / "bump2d.json", tmp_path / "c.json")
    data = json.loads((tmp_path / "c.json").read_text())
    data["initial"] = {"preset": "file", "path": "m0.llbf"}
    (tmp_path / "c.json").write_text(json.dumps(data))
    again = RunConfig.load(tmp_path / "c.json")
    assert again.initial().tobytes() == m0.tobytes()
    assert again.input_files() == [tmp_path / "m0.llbf"]
