"""Linearized and second-variation systems, and time derivatives at a given time.

Both systems reuse the forward splitting step for step, so the discrete
trajectories are the exact first and second derivatives of the discrete
control-to-state map.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .fields import ControlTrajectory, Grid, SobolevMetric, laplacian
from .forward import StateTrajectory, _bracket, llb_rhs


@dataclass
class LinearizedTrajectory:
    grid: Grid
    times: np.ndarray
    frames: np.ndarray
    direction: ControlTrajectory
    h_steps: np.ndarray


@dataclass
class SecondVariationTrajectory:
    grid: Grid
    times: np.ndarray
    frames: np.ndarray


def _blk(a):
    return kernels.as_block(a)


def jacobian_apply(grid: Grid, m, lap_m, u, z) -> np.ndarray:
    """J(m, u) z, the derivative of the reaction term N(m, u) in m."""
    out = kernels.lin_apply(_blk(m), _blk(lap_m), _blk(u), _blk(z), grid.inv_h2)
    return out.reshape(grid.shape)


def jacobian_transpose(grid: Grid, m, lap_m, u, q) -> np.ndarray:
    out = kernels.lin_apply_t(_blk(m), _blk(lap_m), _blk(u), _blk(q), grid.inv_h2)
    return out.reshape(grid.shape)


def apply_linearized_operator(grid: Grid, z, m, u) -> np.ndarray:
    """-z x lap m - m x lap z - z x u + 2 (m.z) m + (1 + |m|^2) z.

    With this term, the linearized operator reads L z = z_t - lap z + (term).
    """
    return -jacobian_apply(grid, m, laplacian(grid, m), u, z)


def control_source(m, h) -> np.ndarray:
    """h + m x h: derivative of the right-hand side in the control."""
    return h + np.cross(m, h)


def xi_source(grid: Grid, m, z, h) -> np.ndarray:
    """2 z x lap z + 2 z x h - 4 (z.m) z - 2 |z|^2 m."""
    out = kernels.xi_source(_blk(m), _blk(z), _blk(h), grid.inv_h2)
    return out.reshape(grid.shape)


def _march(traj, metric, n_steps, source):
    grid = traj.grid
    lap = traj.laplacians()
    frames = np.zeros((n_steps + 1,) + grid.shape)
    z = frames[0]
    for k in range(n_steps):
        dt = traj.times[k + 1] - traj.times[k]
        m, u = traj.frames[k], traj.u_steps[k]
        rhs = z + dt * (jacobian_apply(grid, m, lap[k], u, z) + source(k, z))
        z = metric.solve(rhs, dt)
        frames[k + 1] = z
    return frames


def solve_linearized(
    traj: StateTrajectory, h: ControlTrajectory, metric: SobolevMetric, n_steps: int | None = None
) -> LinearizedTrajectory:
    """March L z = h + m x h from z(0) = 0 over the first ``n_steps`` steps."""
    if h.grid != traj.grid or np.any(h.times != traj.control.times):
        raise ValueError("direction must live on the control's grid and time nodes")
    n = traj.n_steps if n_steps is None else int(n_steps)
    h_steps = traj.sampler.sample(h.frames)
    frames = _march(traj, metric, n, lambda k, z: control_source(traj.frames[k], h_steps[k]))
    return LinearizedTrajectory(traj.grid, traj.times[: n + 1], frames, h, h_steps)


def solve_second_variation(
    traj: StateTrajectory, z: LinearizedTrajectory, metric: SobolevMetric
) -> SecondVariationTrajectory:
    """March L xi = 2 z x lap z + 2 z x h - 4 (z.m) z - 2 |z|^2 m from xi(0) = 0."""
    n = len(z.times) - 1
    grid = traj.grid
    frames = _march(
        traj, metric, n,
        lambda k, _xi: xi_source(grid, traj.frames[k], z.frames[k], z.h_steps[k]),
    )
    return SecondVariationTrajectory(grid, z.times, frames)


def temporal_derivatives(traj: StateTrajectory, t: float) -> tuple[np.ndarray, np.ndarray]:
    """m_t and m_tt at time t, evaluated from the equation on the interpolated frame."""
    grid = traj.grid
    m = traj.frame_at(t)
    u = traj.control.sample(t)
    u_t = traj.control.time_derivative(t)
    lap = laplacian(grid, m)
    m_t = lap + llb_rhs(grid, m, u)
    lap_t = laplacian(grid, m_t)
    m_tt = (
        lap_t
        + np.cross(m_t, lap)
        + np.cross(m, lap_t)
        + np.cross(m_t, u)
        + np.cross(m, u_t)
        - (1.0 + np.sum(m * m, axis=-1, keepdims=True)) * m_t
        - 2.0 * np.sum(m * m_t, axis=-1, keepdims=True) * m
        + u_t
    )
    return m_t, m_tt


def z_t_at(z: LinearizedTrajectory, traj: StateTrajectory, t: float) -> np.ndarray:
    """z_t = lap z + J(m, u) z + h + m x h at time t (linearly interpolated frames)."""
    grid = traj.grid
    k, w = _bracket(z.times, t)
    zt = (1.0 - w) * z.frames[k] + w * z.frames[k + 1]
    m = traj.frame_at(t)
    u = traj.control.sample(t)
    h = z.direction.sample(t)
    lap_m = laplacian(grid, m)
    return laplacian(grid, zt) + jacobian_apply(grid, m, lap_m, u, zt) + control_source(m, h)
