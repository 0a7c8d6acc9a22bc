"""Adjoint state for the hitting-time functional.

Two realisations are provided. ``discrete`` (default) runs the exact
transpose of the discrete linearized scheme, so pairing the linearized state
with the terminal condition reproduces the space-time source pairing to
rounding. ``continuous`` discretises the backward system directly on
[0, T~] and converges to the same quantities at O(dt) + O(dx^2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import TransversalityError
from .fields import Grid, SobolevMetric, l2, laplacian
from .forward import Hit, StateTrajectory, stencil_hit
from .sensitivity import control_source, jacobian_transpose

MODES = ("discrete", "continuous")


@dataclass
class TransversalityCheck:
    numerator: float
    denominator: float
    threshold: float
    passed: bool


@dataclass
class AdjointTrajectory:
    """Adjoint frames plus the data needed to pair them with forward quantities.

    ``step_weights[k]`` already contains the time-quadrature weight of forward
    step k; a per-step source f pairs as ``sum_k <step_weights[k], f[k]>_L2``.
    ``terminal_stencil``/``terminal_weights`` say how z(T~) is built from
    frames, so that ``(z(T~), terminal)`` is evaluated consistently.
    """

    grid: Grid
    times: np.ndarray
    frames: np.ndarray
    terminal: np.ndarray
    multiplier: float
    mode: str
    step_weights: np.ndarray
    terminal_stencil: np.ndarray
    terminal_weights: np.ndarray

    @property
    def n_steps(self) -> int:
        return len(self.step_weights)

    def pair_steps(self, f_steps: np.ndarray) -> float:
        n = self.n_steps
        return l2(self.grid, self.step_weights, f_steps[:n])

    def terminal_pairing(self, frames: np.ndarray) -> float:
        zT = np.tensordot(self.terminal_weights, frames[self.terminal_stencil], axes=1)
        return l2(self.grid, zT, self.terminal)


def terminal_condition(
    grid: Grid, residual: np.ndarray, m_t: np.ndarray, T_tilde: float, eps_rel: float = 1e-8
) -> tuple[np.ndarray, float, TransversalityCheck]:
    """phi(T~) = -lambda (m(T~) - m_target) with lambda = T~ / (m(T~) - m_target, m_t(T~))."""
    den = l2(grid, residual, m_t)
    threshold = eps_rel * math.sqrt(l2(grid, residual, residual) * l2(grid, m_t, m_t))
    check = TransversalityCheck(float(T_tilde), den, threshold, den < -threshold)
    if not check.passed:
        raise TransversalityError(
            f"(m(T) - m_target, m_t(T)) = {den:.3e} is not below -{threshold:.3e}: "
            "the trajectory does not cross the tube boundary transversally"
        )
    lam = T_tilde / den
    return -lam * residual, lam, check


def hit_quantities(traj: StateTrajectory, hit: Hit, m_target: np.ndarray, mode: str = "discrete"):
    """Residual m(T~) - m_target and m_t(T~) as used by the given adjoint mode.

    Discrete mode differentiates the frame interpolant behind ``hit`` (the
    exact derivative of the discrete hitting time); continuous mode takes the
    linearly interpolated frame and m_t from the equation.
    """
    from .sensitivity import temporal_derivatives

    if mode == "discrete":
        return hit.value(traj.frames) - m_target, hit.value(traj.frames, 1)
    if mode == "continuous":
        m_t, _ = temporal_derivatives(traj, hit.time)
        return traj.frame_at(hit.time) - m_target, m_t
    raise ValueError(f"unknown adjoint mode {mode!r}")


def solve_adjoint(
    traj: StateTrajectory,
    hit: Hit,
    phi_T: np.ndarray,
    metric: SobolevMetric,
    mode: str = "discrete",
    multiplier: float = float("nan"),
) -> AdjointTrajectory:
    """March the adjoint system backward from T~ to 0."""
    if mode == "discrete":
        adj = _discrete_adjoint(traj, hit, phi_T, metric)
    elif mode == "continuous":
        adj = _continuous_adjoint(traj, hit, phi_T, metric)
    else:
        raise ValueError(f"unknown adjoint mode {mode!r}")
    adj.multiplier = float(multiplier)
    return adj


def seeded_adjoint(traj, stencil, seeds, metric) -> tuple[np.ndarray, np.ndarray]:
    """Transpose sweep for the functional sum_j <seeds[j], z[stencil[j]]>.

    Returns per-step adjoint fields q_k (k below the top stencil node) and the
    step weights dt_k q_k.
    """
    grid = traj.grid
    top = int(np.max(stencil))
    lap = traj.laplacians()
    seed_at = {int(j): s for j, s in zip(stencil, seeds)}
    p = seed_at.get(top, np.zeros(grid.shape)).copy()
    q = np.zeros((top,) + grid.shape)
    for k in range(top - 1, -1, -1):
        dt = traj.times[k + 1] - traj.times[k]
        qk = metric.solve(p, dt)
        q[k] = qk
        p = qk + dt * jacobian_transpose(grid, traj.frames[k], lap[k], traj.u_steps[k], qk)
        if k in seed_at:
            p = p + seed_at[k]
    dts = np.diff(traj.times[: top + 1])
    return q, dts.reshape((-1,) + (1,) * grid.dim + (1,)) * q


def _discrete_adjoint(traj, hit, phi_T, metric):
    w = hit.weights[0]
    q, weights = seeded_adjoint(traj, hit.stencil, [wj * phi_T for wj in w], metric)
    return AdjointTrajectory(
        traj.grid, traj.times[1: len(q) + 1], q, phi_T, float("nan"), "discrete",
        weights, hit.stencil, w,
    )


def _continuous_adjoint(traj, hit, phi_T, metric):
    grid = traj.grid
    k = hit.step
    T = hit.time
    nodes = np.append(traj.times[: k + 1], T)
    lap = traj.laplacians()
    m_T = traj.frame_at(T)
    lap_T = laplacian(grid, m_T)
    frames = np.empty((k + 2,) + grid.shape)
    frames[-1] = phi_T
    phi = phi_T
    for j in range(k, -1, -1):
        s = nodes[j + 1] - nodes[j]
        if s > 0:
            m_hi, lap_hi = (m_T, lap_T) if j == k else (traj.frames[j + 1], lap[j + 1])
            rhs = phi + s * jacobian_transpose(grid, m_hi, lap_hi, traj.u_steps[j], phi)
            phi = metric.solve(rhs, s)
        frames[j] = phi
    tau = np.diff(nodes)
    avg = 0.5 * (frames[:-1] + frames[1:])
    weights = tau.reshape((-1,) + (1,) * grid.dim + (1,)) * avg
    lin = stencil_hit(traj.times, T, "linear")
    return AdjointTrajectory(
        grid, nodes, frames, phi_T, float("nan"), "continuous", weights, lin.stencil, lin.weights[0]
    )


def source_steps(traj: StateTrajectory, h_steps: np.ndarray, n: int) -> np.ndarray:
    """Per-step linearized source h + m x h for the first n steps."""
    return control_source(traj.frames[:n], h_steps[:n])


def duality_residual(z_frames: np.ndarray, adj: AdjointTrajectory, traj: StateTrajectory, h_steps) -> float:
    """Relative mismatch between (z(T~), phi(T~)) and the space-time source pairing."""
    lhs = adj.terminal_pairing(z_frames)
    rhs = adj.pair_steps(source_steps(traj, h_steps, adj.n_steps))
    scale = max(abs(lhs), abs(rhs))
    return 0.0 if scale == 0.0 else abs(lhs - rhs) / scale
