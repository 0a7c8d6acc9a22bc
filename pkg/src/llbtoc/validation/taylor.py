"""Taylor-remainder sweeps for the state, hitting-time and gradient expansions.

=========  ===========================================  ========
kind       remainder                                    expected
=========  ===========================================  ========
state1     max_t ||m_rho - m - rho z||                  2
state2     max_t ||m_rho - m - rho z - rho^2/2 xi||     3
time1      |T_rho - T - rho D|                          2
time2      |T_rho - T - rho D - rho^2 G|                3
gradient   |J(u + rho h) - J(u) - rho Y(h)|             2
=========  ===========================================  ========
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..errors import TargetUnreachableError
from ..fields import ControlTrajectory
from ..sensitivity import solve_linearized, solve_second_variation

EXPECTED = {"state1": 2.0, "state2": 3.0, "time1": 2.0, "time2": 3.0, "gradient": 2.0}
DEFAULT_RHOS = (1e-1, 5e-2, 2.5e-2, 1.25e-2, 6.25e-3, 3.125e-3)


@dataclass
class SweepReport:
    kind: str
    rhos: list[float]
    residuals: list[float]
    slope: float
    expected: float
    passed: bool
    excluded: list[float] = field(default_factory=list)
    tolerance: float = 0.2

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2)

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rho", "residual"])
            for r, e in zip(self.rhos, self.residuals):
                w.writerow([repr(r), repr(e)])


def fit_slope(rhos, residuals, trim: bool = True) -> float:
    """Least-squares slope of log(residual) against log(rho).

    With ``trim`` and at least five points the extreme ends are dropped: the
    largest rho is outside the asymptotic regime and the smallest sits on
    the rounding floor.
    """
    r = np.asarray(rhos, dtype=float)
    e = np.asarray(residuals, dtype=float)
    keep = e > 0
    r, e = r[keep], e[keep]
    if trim and len(r) >= 5:
        r, e = r[1:-1], e[1:-1]
    if len(r) < 2:
        return float("nan")
    return float(np.polyfit(np.log(r), np.log(e), 1)[0])


def _state_err(grid, a, b):
    d = (a - b).reshape(len(a), -1)
    return float(np.sqrt(grid.cell_volume * np.max(np.sum(d * d, axis=1))))


def taylor_sweep(problem, kind: str, u: ControlTrajectory, h: ControlTrajectory,
                 rhos=DEFAULT_RHOS, tolerance: float = 0.2) -> SweepReport:
    """Remainders of the chosen expansion along u + rho h, with a log-log slope fit."""
    if kind not in EXPECTED:
        raise ValueError(f"unknown sweep kind {kind!r}; expected one of {sorted(EXPECTED)}")
    rhos = sorted((float(r) for r in rhos), reverse=True)
    ev = problem.evaluate(u, with_adjoint=kind == "gradient")
    traj = ev.traj
    grid = problem.grid
    if kind in ("state1", "state2"):
        z = solve_linearized(traj, h, problem.metric)
        xi = solve_second_variation(traj, z, problem.metric) if kind == "state2" else None
    elif kind in ("time1", "time2"):
        z = problem.linearize(ev, h)
        D = problem.D(ev, z)
        G = problem.G(ev, h, z) if kind == "time2" else 0.0
    else:
        Y = problem.Y(ev, h)

    kept, res, excluded = [], [], []
    for rho in rhos:
        up = u + rho * h
        try:
            if kind in ("state1", "state2"):
                m = problem.simulate(up).frames
                pred = traj.frames + rho * z.frames
                if xi is not None:
                    pred = pred + 0.5 * rho**2 * xi.frames
                e = _state_err(grid, m, pred)
            elif kind in ("time1", "time2"):
                T = problem.hitting_time(up)
                if T is None:
                    raise TargetUnreachableError("sweep point misses the tube")
                e = abs(T - ev.T - rho * D - rho**2 * G)
            else:
                e = abs(problem.cost(up).total - ev.cost.total - rho * Y)
        except TargetUnreachableError:
            excluded.append(rho)
            continue
        kept.append(rho)
        res.append(e)

    expected = EXPECTED[kind]
    if res and max(res) == 0.0:
        slope, passed = float("inf"), True
    else:
        slope = fit_slope(kept, res)
        passed = bool(math.isfinite(slope) and slope >= expected - tolerance)
    return SweepReport(kind, kept, res, slope, expected, passed, excluded, tolerance)
