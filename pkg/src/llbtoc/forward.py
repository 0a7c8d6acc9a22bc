"""Forward LLB solver, delta-tube hitting time and energy diagnostics.

The reduced LLB system with unit constants,

    m_t - lap m = m x lap m + m x u - (1 + |m|^2) m + u,   dm/dn = 0,

is marched with semi-implicit Euler: the diffusion is implicit, everything
else (including the control, sampled at step midpoints) explicit.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import DivergedError, TargetUnreachableError, TrivialCaseError
from .fields import ControlTrajectory, Grid, SobolevMetric, l2, laplacian, norm


@dataclass
class TargetSpec:
    m_target: np.ndarray
    delta: float

    def __post_init__(self):
        if not (self.delta > 0 and math.isfinite(self.delta)):
            raise ValueError("delta must be positive")


@dataclass
class StepSampler:
    """Linear map from control nodes to per-step control samples.

    Step k uses the control at its midpoint, ``(1 - w[k]) u[idx[k]] + w[k] u[idx[k] + 1]``.
    """

    idx: np.ndarray
    w: np.ndarray
    n_nodes: int

    @classmethod
    def build(cls, control_times: np.ndarray, step_times: np.ndarray) -> "StepSampler":
        mid = 0.5 * (step_times[:-1] + step_times[1:])
        n = len(control_times)
        idx = np.clip(np.searchsorted(control_times, mid, side="right") - 1, 0, n - 2)
        w = (mid - control_times[idx]) / (control_times[idx + 1] - control_times[idx])
        return cls(idx, np.clip(w, 0.0, 1.0), n)

    def _wb(self, w, ref):
        return w.reshape((-1,) + (1,) * (ref.ndim - 1))

    def sample(self, frames: np.ndarray) -> np.ndarray:
        a = frames[self.idx]
        b = frames[self.idx + 1]
        return self._wb(1.0 - self.w, a) * a + self._wb(self.w, b) * b

    def transpose(self, values: np.ndarray) -> np.ndarray:
        """Adjoint of :meth:`sample` with respect to plain sums over steps/nodes."""
        out = np.zeros((self.n_nodes,) + values.shape[1:])
        np.add.at(out, self.idx, self._wb(1.0 - self.w, values) * values)
        np.add.at(out, self.idx + 1, self._wb(self.w, values) * values)
        return out


@dataclass
class StateTrajectory:
    grid: Grid
    dt: float
    times: np.ndarray
    frames: np.ndarray
    control: ControlTrajectory
    u_steps: np.ndarray
    sampler: StepSampler

    @property
    def final_time(self) -> float:
        return float(self.times[-1])

    @property
    def n_steps(self) -> int:
        return len(self.times) - 1

    @property
    def step_sizes(self) -> np.ndarray:
        return np.diff(self.times)

    def laplacians(self) -> np.ndarray:
        """Laplacian of every frame, computed once."""
        if getattr(self, "_lap", None) is None:
            self._lap = laplacian(self.grid, self.frames)
        return self._lap

    def frame_at(self, t: float) -> np.ndarray:
        """Linear interpolation between stored frames."""
        k, w = _bracket(self.times, t)
        return (1.0 - w) * self.frames[k] + w * self.frames[k + 1]


def _bracket(times, t):
    if t < times[0] - 1e-12 or t > times[-1] + 1e-12:
        raise ValueError(f"t = {t} outside trajectory [{times[0]}, {times[-1]}]")
    k = int(np.clip(np.searchsorted(times, t, side="right") - 1, 0, len(times) - 2))
    w = (t - times[k]) / (times[k + 1] - times[k])
    return k, float(np.clip(w, 0.0, 1.0))


def step_times(horizon: float, dt: float) -> np.ndarray:
    """Uniform steps of size dt; the last step is shortened to land on the horizon."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    n = max(1, math.ceil(horizon / dt - 1e-9))
    t = np.arange(n + 1) * dt
    t[-1] = horizon
    return t


def llb_rhs(grid: Grid, m: np.ndarray, u: np.ndarray) -> np.ndarray:
    """N(m, u) = m x lap m + m x u - (1 + |m|^2) m + u (diffusion excluded)."""
    if m.shape != u.shape:
        raise ValueError(f"grid mismatch: {m.shape} vs {u.shape}")
    out = kernels.llb_rhs(kernels.as_block(m), kernels.as_block(u), grid.inv_h2)
    return out.reshape(grid.shape)


def step_semi_implicit(m: np.ndarray, u: np.ndarray, dt: float, metric: SobolevMetric) -> np.ndarray:
    """One step of (I - dt lap) m+ = m + dt N(m, u)."""
    if not dt > 0:
        raise ValueError("time step must be positive")
    return metric.solve(m + dt * llb_rhs(metric.grid, m, u), dt)


def simulate(
    m0: np.ndarray,
    control: ControlTrajectory,
    horizon: float,
    dt: float,
    metric: SobolevMetric,
    blowup_cap: float = 1e6,
    smallness_threshold: float | None = None,
) -> StateTrajectory:
    grid = metric.grid
    m0 = grid.check_field(m0, "m0")
    if control.grid != grid:
        raise ValueError("control lives on a different grid")
    if control.horizon < horizon - 1e-12:
        raise ValueError("control does not cover the simulation horizon")
    if grid.dim == 3 and smallness_threshold is not None:
        report = smallness_terms(grid, m0, control, metric)
        if report["M_proxy"] >= smallness_threshold:
            warnings.warn(
                f"smallness proxy M = {report['M_proxy']:.3e} exceeds threshold "
                f"{smallness_threshold:.3e}; global existence is not guaranteed in 3D",
                RuntimeWarning,
                stacklevel=2,
            )
    times = step_times(horizon, dt)
    sampler = StepSampler.build(control.times, times)
    u_steps = sampler.sample(control.frames)
    frames = np.empty((len(times),) + grid.shape)
    frames[0] = m0
    m = m0
    for k in range(len(times) - 1):
        m = step_semi_implicit(m, u_steps[k], times[k + 1] - times[k], metric)
        peak = float(np.max(np.abs(m))) if m.size else 0.0
        if not math.isfinite(peak) or peak > blowup_cap:
            raise DivergedError(
                f"|m| reached {peak:.3e} at t = {times[k + 1]:.6g} (cap {blowup_cap:.3e})"
            )
        frames[k + 1] = m
    return StateTrajectory(grid, float(dt), times, frames, control, u_steps, sampler)


# -- hitting time ------------------------------------------------------------


def lagrange_weights(nodes: np.ndarray, t: float) -> np.ndarray:
    """Weights of the interpolating polynomial through ``nodes`` and its first two
    time derivatives at t; shape ``(3, len(nodes))``."""
    n = len(nodes)
    # local coordinates keep the monomial expansion well conditioned
    c = nodes[0]
    scale = nodes[-1] - nodes[0]
    x = (nodes - c) / scale
    s = (t - c) / scale
    out = np.zeros((3, n))
    for j in range(n):
        others = np.delete(x, j)
        poly = np.poly(others) / np.prod(x[j] - others)
        out[0, j] = np.polyval(poly, s)
        out[1, j] = np.polyval(np.polyder(poly, 1), s) / scale
        out[2, j] = np.polyval(np.polyder(poly, 2), s) / scale**2 if n > 2 else 0.0
    return out


def interpolation_stencil(times: np.ndarray, t: float, order: int = 3) -> np.ndarray:
    """Indices of the ``order + 1`` nodes used around the step containing t."""
    k, _ = _bracket(times, t)
    last = len(times) - 1
    npts = min(order + 1, last + 1)
    start = int(np.clip(k - (npts - 1) // 2, 0, last + 1 - npts))
    return np.arange(start, start + npts)


@dataclass
class Hit:
    """Hitting time with the interpolation rule used to evaluate frames at it.

    ``weights[d, j]`` is the weight of frame ``stencil[j]`` in the d-th time
    derivative of the interpolant at ``time``.
    """

    time: float
    step: int
    stencil: np.ndarray
    weights: np.ndarray
    method: str

    def value(self, frames: np.ndarray, deriv: int = 0) -> np.ndarray:
        return np.tensordot(self.weights[deriv], frames[self.stencil], axes=1)


def _squared_distances(traj: StateTrajectory, target: TargetSpec) -> np.ndarray:
    diff = traj.frames - target.m_target
    return traj.grid.cell_volume * np.sum(diff.reshape(len(diff), -1) ** 2, axis=1)


def stencil_hit(times: np.ndarray, t: float, method: str) -> Hit:
    """Interpolation data at an arbitrary time (used for a free final time)."""
    k, w = _bracket(times, t)
    if method == "linear":
        stencil = np.array([k, k + 1])
        dt = times[k + 1] - times[k]
        weights = np.array([[1.0 - w, w], [-1.0 / dt, 1.0 / dt], [0.0, 0.0]])
    else:
        stencil = interpolation_stencil(times, t)
        weights = lagrange_weights(times[stencil], t)
    return Hit(float(t), k, stencil, weights, method)


def locate_hit(traj: StateTrajectory, target: TargetSpec, method: str = "linear") -> Hit | None:
    """First entry into the delta-tube, or None if the trajectory never enters.

    ``linear`` interpolates the squared distance linearly inside the bracketing
    step. ``cubic`` refines that root on the squared distance of the cubic
    Lagrange interpolant of the frames, which is smooth in the control.
    """
    if method not in ("linear", "cubic"):
        raise ValueError(f"unknown hitting-time method {method!r}")
    traj.grid.check_field(target.m_target, "m_target")
    d2 = _squared_distances(traj, target)
    delta2 = target.delta**2
    if d2[0] <= delta2:
        raise TrivialCaseError(
            f"||m0 - m_target|| = {math.sqrt(d2[0]):.6g} <= delta = {target.delta:.6g}"
        )
    inside = np.nonzero(d2 <= delta2)[0]
    if len(inside) == 0:
        return None
    k = int(inside[0]) - 1
    t0, t1 = traj.times[k], traj.times[k + 1]
    theta = (d2[k] - delta2) / (d2[k] - d2[k + 1])
    t_lin = float(t0 + theta * (t1 - t0))
    if method == "linear":
        hit = stencil_hit(traj.times, t_lin, "linear")
        hit.step = k
        return hit

    stencil = interpolation_stencil(traj.times, 0.5 * (t0 + t1))
    nodes = traj.times[stencil]
    resid = (traj.frames[stencil] - target.m_target).reshape(len(stencil), -1)
    gram = traj.grid.cell_volume * (resid @ resid.T)

    def f(t):
        w = lagrange_weights(nodes, t)
        return float(w[0] @ gram @ w[0]) - delta2, 2.0 * float(w[1] @ gram @ w[0])

    # safeguarded Newton on [t0, t1]; f(t0) > 0 >= f(t1) by construction
    lo, hi = t0, t1
    t = t_lin
    for _ in range(100):
        val, der = f(t)
        if val > 0:
            lo = t
        else:
            hi = t
        step = val / der if der != 0 else np.inf
        t_new = t - step
        if not (lo < t_new < hi):
            t_new = 0.5 * (lo + hi)
        if abs(t_new - t) <= 4e-16 * max(1.0, abs(t)):
            t = t_new
            break
        t = t_new
    return Hit(float(t), k, stencil, lagrange_weights(nodes, t), "cubic")


def hitting_time(traj: StateTrajectory, target: TargetSpec, method: str = "linear") -> float | None:
    hit = locate_hit(traj, target, method)
    return None if hit is None else hit.time


def require_hit(traj: StateTrajectory, target: TargetSpec, method: str = "cubic") -> Hit:
    hit = locate_hit(traj, target, method)
    if hit is None:
        raise TargetUnreachableError(
            f"trajectory does not enter the delta-tube before t = {traj.final_time:.6g}"
        )
    return hit


# -- diagnostics ---------------------------------------------------------------


@dataclass
class EnergyReport:
    sup_h2eq_sq: float
    int_h3eq_sq: float
    prefactor: float
    exp_base: float
    exp_inner: float
    m_proxy: float
    flagged: bool


def smallness_terms(grid: Grid, m0, control: ControlTrajectory, metric, constant: float = 1.0) -> dict:
    """Computable factors of the smallness quantity M(m0, u, Omega, T).

    ``M_proxy`` evaluates the bound with the generic constant set to
    ``constant``; the true constant is not computable.
    """
    from .fields import trapezoid_weights

    w = trapezoid_weights(control.times)
    u_l2h1 = sum(wi * norm(grid, f, "H1") ** 2 for wi, f in zip(w, control.frames))
    u_l2l2 = sum(wi * norm(grid, f) ** 2 for wi, f in zip(w, control.frames))
    lap0 = laplacian(grid, m0)
    prefactor = l2(grid, m0, m0) + l2(grid, lap0, lap0) + u_l2h1
    exp_base = (1.0 + norm(grid, m0, "H1") ** 2 + u_l2l2) ** 2
    exp_inner = u_l2h1
    with np.errstate(over="ignore"):
        proxy = prefactor * math.exp(min(constant * exp_base * math.exp(min(constant * exp_inner, 700)), 700))
    return {"prefactor": prefactor, "exp_base": exp_base, "exp_inner": exp_inner, "M_proxy": proxy}


def energy_diagnostics(
    traj: StateTrajectory,
    metric: SobolevMetric | None = None,
    constant: float = 1.0,
    threshold: float = np.inf,
) -> EnergyReport:
    """Discrete norms entering the regularity estimate, plus the smallness proxy."""
    grid = traj.grid
    metric = metric or SobolevMetric(grid)
    h2 = np.empty(len(traj.frames))
    h3 = np.empty(len(traj.frames))
    for i, m in enumerate(traj.frames):
        lap = laplacian(grid, m)
        mm = l2(grid, m, m)
        h2[i] = mm + l2(grid, lap, lap)
        # ||grad lap m||^2 = -<lap m, lap lap m>
        h3[i] = mm - l2(grid, lap, laplacian(grid, lap))
    tau = np.diff(traj.times)
    int_h3 = float(np.sum(0.5 * tau * (h3[:-1] + h3[1:])))
    terms = smallness_terms(grid, traj.frames[0], traj.control, metric, constant)
    flagged = grid.dim == 3 and terms["M_proxy"] >= threshold
    return EnergyReport(
        float(h2.max()), int_h3, terms["prefactor"], terms["exp_base"],
        terms["exp_inner"], terms["M_proxy"], bool(flagged),
    )
