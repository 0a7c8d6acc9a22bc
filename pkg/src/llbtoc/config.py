"""Run configuration: a single JSON document, validated and turned into solver objects.

All quantities are nondimensional (the equation is solved with unit
material constants): lengths in units of the domain scale, times in units
of the diffusion time.
"""

from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, fields
from pathlib import Path

import numpy as np

from .errors import ConfigError
from .fields import ControlTrajectory, Grid, SobolevMetric, make_grid
from .forward import TargetSpec
from .objective import HittingProblem
from .optimizer import OptimizeConfig, cosine_probes

DEFAULTS = {
    "grid": {"dim": 1, "cells": [64], "extent": [1.0]},
    "initial": {"preset": "constant", "vector": [1.0, 0.0, 0.0]},
    "target": {"preset": "constant", "vector": [0.0, 0.0, 0.0], "delta": 0.5},
    "control": {"preset": "zero", "nodes": 11},
    "solver": {
        "dt": 1e-3,
        "horizon": 1.0,
        "metric": "dct",
        "cg_tol": 1e-10,
        "blowup_cap": 1e6,
        "adjoint_mode": "discrete",
        "hit_method": "cubic",
        "eps_transv": 1e-8,
        "smallness_constant": 1.0,
        "smallness_threshold": None,
    },
    "optimizer": {},
    "diagnostics": {
        "direction": "constant",
        "vector": [-1.0, 0.0, 0.0],
        "n_directions": 10,
        "rhos": [1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3],
    },
    "output": {"stride": 10},
}


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


@dataclass
class RunConfig:
    data: dict
    base_dir: Path

    @classmethod
    def from_dict(cls, data: dict, base_dir=".") -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = set(data) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown configuration sections: {sorted(unknown)}")
        cfg = cls(_merge(DEFAULTS, data), Path(base_dir))
        cfg.validate()
        return cfg

    @classmethod
    def load(cls, path) -> "RunConfig":
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"configuration file {p} does not exist")
        try:
            data = json.loads(p.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"cannot parse {p}: {exc}") from exc
        return cls.from_dict(data, p.parent)

    # -- validation ---------------------------------------------------------

    def validate(self) -> None:
        s = self.data["solver"]
        for key in ("dt", "horizon", "cg_tol", "blowup_cap"):
            if not (isinstance(s[key], (int, float)) and s[key] > 0 and math.isfinite(s[key])):
                raise ConfigError(f"solver.{key} must be a positive number")
        if s["metric"] not in ("dct", "cg"):
            raise ConfigError("solver.metric must be 'dct' or 'cg'")
        if s["adjoint_mode"] not in ("discrete", "continuous"):
            raise ConfigError("solver.adjoint_mode must be 'discrete' or 'continuous'")
        if s["hit_method"] not in ("linear", "cubic"):
            raise ConfigError("solver.hit_method must be 'linear' or 'cubic'")
        delta = self.data["target"].get("delta")
        if not (isinstance(delta, (int, float)) and delta > 0):
            raise ConfigError("target.delta must be positive")
        for section in ("initial", "target", "control"):
            spec = self.data[section]
            if spec.get("preset") == "file":
                self._path(spec)
        self.optimize_config()
        self.grid()

    def _path(self, spec) -> Path:
        if "path" not in spec:
            raise ConfigError("file preset needs a 'path'")
        p = Path(spec["path"])
        p = p if p.is_absolute() else self.base_dir / p
        if not p.is_file():
            raise ConfigError(f"input file {p} does not exist")
        return p

    def input_files(self) -> list[Path]:
        return [self._path(self.data[s]) for s in ("initial", "target", "control")
                if self.data[s].get("preset") == "file"]

    # -- builders -------------------------------------------------------------

    def grid(self) -> Grid:
        g = self.data["grid"]
        try:
            return make_grid(g["dim"], g["cells"], g["extent"])
        except (KeyError, TypeError) as exc:
            raise ConfigError(f"invalid grid section: {exc}") from exc

    def metric(self) -> SobolevMetric:
        s = self.data["solver"]
        return SobolevMetric(self.grid(), method=s["metric"], tol=s["cg_tol"])

    def _field(self, spec: dict, grid: Grid, what: str) -> np.ndarray:
        preset = spec.get("preset")
        if preset == "constant":
            return grid.constant(_vector(spec, what))
        if preset == "cosine-bump":
            v = np.asarray(_vector(spec, what))
            amp = float(spec.get("amplitude", 1.0))
            modes = spec.get("modes", [1] * grid.dim)
            shape = np.ones(grid.cells)
            for ax, (x, j) in enumerate(zip(grid.mesh(), modes)):
                shape = shape * np.cos(j * math.pi * x / grid.extent[ax])
            return amp * shape[..., None] * v
        if preset == "file":
            from .io import read_snapshot

            snap = read_snapshot(self._path(spec))
            if snap.grid != grid:
                raise ConfigError(f"{what} file grid does not match the configured grid")
            return snap.frames[int(spec.get("frame", 0))]
        raise ConfigError(f"unknown {what} preset {preset!r}")

    def initial(self) -> np.ndarray:
        return self._field(self.data["initial"], self.grid(), "initial")

    def target(self) -> TargetSpec:
        spec = self.data["target"]
        return TargetSpec(self._field(spec, self.grid(), "target"), float(spec["delta"]))

    def control(self) -> ControlTrajectory:
        spec = self.data["control"]
        grid = self.grid()
        horizon = float(self.data["solver"]["horizon"])
        preset = spec.get("preset")
        if preset == "file":
            from .io import read_snapshot

            snap = read_snapshot(self._path(spec))
            if snap.grid != grid:
                raise ConfigError("control file grid does not match the configured grid")
            u = ControlTrajectory(grid, snap.times, snap.frames)
            if not math.isclose(u.horizon, horizon, rel_tol=1e-12):
                raise ConfigError(f"control spans [0, {u.horizon}] but the horizon is {horizon}")
            return u
        nodes = int(spec.get("nodes", 11))
        if nodes < 2:
            raise ConfigError("control.nodes must be at least 2")
        u = ControlTrajectory.zeros(grid, horizon, nodes)
        if preset == "zero":
            return u
        if preset in ("constant", "cosine-bump"):
            f = self._field(spec, grid, "control")
            return u.like(np.broadcast_to(f, u.frames.shape).copy())
        raise ConfigError(f"unknown control preset {preset!r}")

    def problem(self) -> HittingProblem:
        s = self.data["solver"]
        return HittingProblem(
            self.initial(), self.target(), float(s["horizon"]), float(s["dt"]), self.metric(),
            mode=s["adjoint_mode"], hit_method=s["hit_method"],
            blowup_cap=float(s["blowup_cap"]), eps_transv=float(s["eps_transv"]),
        )

    def optimize_config(self, seed: int | None = None) -> OptimizeConfig:
        opts = dict(self.data["optimizer"])
        names = {f.name for f in fields(OptimizeConfig)}
        unknown = set(opts) - names
        if unknown:
            raise ConfigError(f"unknown optimizer options: {sorted(unknown)}")
        if "rho_sweep" in opts:
            opts["rho_sweep"] = tuple(opts["rho_sweep"])
        if seed is not None:
            opts["probe_seed"] = int(seed)
        try:
            return OptimizeConfig(**opts)
        except TypeError as exc:
            raise ConfigError(str(exc)) from exc

    def directions(self, u: ControlTrajectory, metric: SobolevMetric, seed: int = 0, n: int | None = None):
        """Perturbation directions for sweeps and duality checks."""
        d = self.data["diagnostics"]
        n = int(d["n_directions"]) if n is None else n
        if d["direction"] == "constant":
            h = u.like(np.broadcast_to(np.asarray(d["vector"], float), u.frames.shape).copy())
            return [h] * n
        if d["direction"] == "cosine":
            return cosine_probes(u, n, seed, metric)
        if d["direction"] == "random":
            rng = np.random.default_rng(seed)
            return [u.like(rng.standard_normal(u.frames.shape)) for _ in range(n)]
        raise ConfigError(f"unknown diagnostics.direction {d['direction']!r}")


def _vector(spec: dict, what: str):
    v = spec.get("vector")
    if v is None or len(v) != 3:
        raise ConfigError(f"{what}.vector must have three components")
    return [float(x) for x in v]
