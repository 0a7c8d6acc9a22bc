"""Binary field snapshots, CSV time series and run manifests.

Snapshot layout (all little-endian):

    4 bytes   magic "LLBF"
    u32       format version
    u32       role (0 state, 1 control, 2 adjoint, 3 field)
    u32       dim
    u32 x dim cells per axis
    f64 x dim extent per axis
    u32       frame count F
    f64 x F   frame times
    f64 ...   values, shape (F, *cells, 3), C order (xyz interleaved per cell)
"""

from __future__ import annotations

import csv
import hashlib
import json
import platform
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .fields import Grid, l2, laplacian

MAGIC = b"LLBF"
VERSION = 1
ROLES = {"state": 0, "control": 1, "adjoint": 2, "field": 3}
_ROLE_NAMES = {v: k for k, v in ROLES.items()}


@dataclass
class Snapshot:
    grid: Grid
    role: str
    times: np.ndarray
    frames: np.ndarray


def write_snapshot(path, grid: Grid, frames: np.ndarray, times=None, role: str = "state") -> None:
    frames = np.asarray(frames, dtype=float)
    if frames.shape == grid.shape:
        frames = frames[None]
    if frames.shape[1:] != grid.shape:
        raise ValueError(f"frames of shape {frames.shape} do not match grid {grid.shape}")
    times = np.zeros(len(frames)) if times is None else np.asarray(times, dtype=float)
    if len(times) != len(frames):
        raise ValueError("one time per frame required")
    if role not in ROLES:
        raise ValueError(f"unknown role {role!r}")
    d = grid.dim
    header = MAGIC + struct.pack(
        f"<III{d}I{d}dI", VERSION, ROLES[role], d, *grid.cells, *grid.extent, len(frames)
    )
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(times.astype("<f8").tobytes())
        fh.write(np.ascontiguousarray(frames, dtype="<f8").tobytes())


def read_snapshot(path) -> Snapshot:
    buf = Path(path).read_bytes()
    if buf[:4] != MAGIC:
        raise ValueError(f"{path}: not a field snapshot (bad magic)")
    version, role, d = struct.unpack_from("<III", buf, 4)
    if version != VERSION:
        raise ValueError(f"{path}: unsupported snapshot version {version}")
    if role not in _ROLE_NAMES or d not in (1, 2, 3):
        raise ValueError(f"{path}: corrupt header")
    off = 16
    cells = struct.unpack_from(f"<{d}I", buf, off)
    off += 4 * d
    extent = struct.unpack_from(f"<{d}d", buf, off)
    off += 8 * d
    (nf,) = struct.unpack_from("<I", buf, off)
    off += 4
    times = np.frombuffer(buf, "<f8", nf, off).astype(float)
    off += 8 * nf
    grid = Grid(d, tuple(cells), tuple(extent))
    count = nf * int(np.prod(grid.shape))
    if len(buf) - off != 8 * count:
        raise ValueError(f"{path}: payload size does not match header")
    frames = np.frombuffer(buf, "<f8", count, off).astype(float).reshape((nf,) + grid.shape)
    return Snapshot(grid, _ROLE_NAMES[role], times, frames)


def write_timeseries(path, traj, m_target: np.ndarray, stride: int = 1) -> None:
    """CSV with columns t, dist_to_target_L2, norm_H2eq for every ``stride``-th frame."""
    grid = traj.grid
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t", "dist_to_target_L2", "norm_H2eq"])
        idx = list(range(0, len(traj.frames), max(1, int(stride))))
        if idx[-1] != len(traj.frames) - 1:
            idx.append(len(traj.frames) - 1)
        for k in idx:
            m = traj.frames[k]
            r = m - m_target
            lap = laplacian(grid, m)
            h2 = np.sqrt(l2(grid, m, m)) + np.sqrt(l2(grid, lap, lap))
            w.writerow([repr(float(traj.times[k])), repr(float(np.sqrt(l2(grid, r, r)))), repr(float(h2))])


def canonical_json(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def versions() -> dict:
    import scipy

    from . import __version__, kernels

    return {
        "llbtoc": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
        "kernel_backend": kernels.BACKEND,
    }


def write_manifest(out_dir, command: str, config: dict, inputs: list, outputs: list, seed=None) -> Path:
    out = Path(out_dir)
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": config_hash(config),
        "seed": seed,
        "inputs": {str(p): file_hash(p) for p in inputs},
        "outputs": {str(Path(p).relative_to(out)): file_hash(p) for p in outputs},
        "versions": versions(),
    }
    path = out / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path
