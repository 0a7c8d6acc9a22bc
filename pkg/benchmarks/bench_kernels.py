"""Compare the compiled and NumPy kernel backends.

    python3 benchmarks/bench_kernels.py [--repeat N] [--json out.json]

Times each per-cell kernel on 1D/2D/3D grids, then one full forward solve,
and checks that both backends agree.
"""

from __future__ import annotations

import argparse
import json
import sys
import timeit

import numpy as np

from llbtoc import kernels
from llbtoc.fields import ControlTrajectory, SobolevMetric, make_grid
from llbtoc.forward import simulate

GRIDS = {"1d-256": (1, [256], [1.0]), "2d-128": (2, [128, 128], [1.0, 1.0]), "3d-32": (3, [32] * 3, [1.0] * 3)}


def _kernel_calls(grid, rng):
    a = [kernels.as_block(0.5 * rng.standard_normal(grid.shape)) for _ in range(4)]
    m, lap, u, z = a
    ih2 = grid.inv_h2
    return {
        "laplacian": lambda: kernels.laplacian(m, ih2),
        "llb_rhs": lambda: kernels.llb_rhs(m, u, ih2),
        "lin_apply": lambda: kernels.lin_apply(m, lap, u, z, ih2),
        "lin_apply_t": lambda: kernels.lin_apply_t(m, lap, u, z, ih2),
        "xi_source": lambda: kernels.xi_source(m, z, u, ih2),
    }


def bench(repeat: int) -> dict:
    backends = kernels.available_backends()
    results = {}
    for gname, spec in GRIDS.items():
        grid = make_grid(*spec)
        for b in backends:
            kernels.use_backend(b)
            calls = _kernel_calls(grid, np.random.default_rng(0))
            for kname, fn in calls.items():
                t = min(timeit.repeat(fn, number=5, repeat=repeat)) / 5
                results.setdefault(f"{gname}/{kname}", {})[b] = t
    # full forward solve
    grid = make_grid(1, [64], [1.0])
    metric = SobolevMetric(grid)
    x = grid.centers()[0]
    m0 = np.zeros(grid.shape)
    m0[:, 0] = np.cos(np.pi * x)
    m0[:, 1] = 0.5
    u = ControlTrajectory.zeros(grid, 0.5, 6)
    finals = {}
    for b in backends:
        kernels.use_backend(b)
        t = min(timeit.repeat(lambda: simulate(m0, u, 0.5, 1e-3, metric), number=1, repeat=repeat))
        results.setdefault("simulate-1d-64-500steps", {})[b] = t
        finals[b] = simulate(m0, u, 0.5, 1e-3, metric).frames[-1]
    if len(finals) == 2:
        results["max_abs_diff"] = float(np.max(np.abs(finals["python"] - finals["compiled"])))
    kernels.use_backend(backends[-1])
    return results


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="write results to this file")
    args = ap.parse_args(argv)
    res = bench(args.repeat)
    print(f"{'case':40s} {'python [ms]':>12s} {'compiled [ms]':>14s} {'speedup':>8s}")
    for case, row in res.items():
        if not isinstance(row, dict):
            continue
        py, cc = row.get("python"), row.get("compiled")
        sp = f"{py / cc:8.1f}" if py and cc else "     n/a"
        print(f"{case:40s} {1e3 * py:12.3f} {(1e3 * cc if cc else float('nan')):14.3f} {sp}")
    if "max_abs_diff" in res:
        print(f"backend agreement on the forward solve: max |diff| = {res['max_abs_diff']:.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(res, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
