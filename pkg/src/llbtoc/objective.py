"""Cost functional and first/second-order optimality quantities.

For a control u~ with hitting time T~ and residual r = m~(T~) - m_target:

    J(u)   = 1/2 T*(u)^2 + 1/2 ||u||_U^2
    D[h]   = -(z_h(T~), r) / (r, m~_t(T~))
    Y(h)   = int int (phi + phi x m~) . h + ((u~, h))_U       (= T~ D[h] + ((u~, h))_U)
    G[h,h] : second-order coefficient of the hitting time along h
    Q(h)   = D[h]^2 + 2 T~ G[h,h] + ||h||_U^2
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .adjoint import (
    AdjointTrajectory,
    TransversalityCheck,
    hit_quantities,
    solve_adjoint,
    source_steps,
    terminal_condition,
)
from .errors import TargetUnreachableError
from .fields import ControlTrajectory, SobolevMetric, inner_U, l2, norm_U, solve_gram_U
from .forward import Hit, StateTrajectory, TargetSpec, locate_hit, simulate
from .sensitivity import (
    LinearizedTrajectory,
    solve_linearized,
    solve_second_variation,
    temporal_derivatives,
    xi_source,
    z_t_at,
)


@dataclass
class CostBreakdown:
    T_star: float
    time_term: float
    control_term: float
    total: float


@dataclass
class Evaluation:
    """Everything the optimality quantities need at one control."""

    control: ControlTrajectory
    traj: StateTrajectory
    hit: Hit
    cost: CostBreakdown
    residual: np.ndarray
    m_t: np.ndarray
    denominator: float
    adjoint: AdjointTrajectory | None = None
    check: TransversalityCheck | None = None

    @property
    def T(self) -> float:
        return self.hit.time


@dataclass
class HittingProblem:
    """Forward model, target and discretisation choices for one control problem.

    ``mode`` selects the adjoint realisation (see :mod:`llbtoc.adjoint`);
    ``hit_method`` the hitting-time interpolation.
    """

    m0: np.ndarray
    target: TargetSpec
    horizon: float
    dt: float
    metric: SobolevMetric
    mode: str = "discrete"
    hit_method: str = "cubic"
    blowup_cap: float = 1e6
    eps_transv: float = 1e-8

    @property
    def grid(self):
        return self.metric.grid

    def simulate(self, u: ControlTrajectory) -> StateTrajectory:
        return simulate(self.m0, u, self.horizon, self.dt, self.metric, self.blowup_cap)

    def hitting_time(self, u: ControlTrajectory) -> float | None:
        hit = locate_hit(self.simulate(u), self.target, self.hit_method)
        return None if hit is None else hit.time

    def evaluate(self, u: ControlTrajectory, with_adjoint: bool = False) -> Evaluation:
        traj = self.simulate(u)
        hit = locate_hit(traj, self.target, self.hit_method)
        if hit is None:
            raise TargetUnreachableError(
                f"trajectory does not enter the delta-tube before t = {self.horizon:.6g}"
            )
        ctrl = 0.5 * norm_U(u, self.metric) ** 2
        cost = CostBreakdown(hit.time, 0.5 * hit.time**2, ctrl, 0.5 * hit.time**2 + ctrl)
        r, m_t = hit_quantities(traj, hit, self.target.m_target, self.mode)
        ev = Evaluation(u, traj, hit, cost, r, m_t, l2(self.grid, r, m_t))
        if with_adjoint:
            self.attach_adjoint(ev)
        return ev

    def attach_adjoint(self, ev: Evaluation) -> Evaluation:
        if ev.adjoint is None:
            phi_T, lam, check = terminal_condition(
                self.grid, ev.residual, ev.m_t, ev.T, self.eps_transv
            )
            ev.adjoint = solve_adjoint(ev.traj, ev.hit, phi_T, self.metric, self.adjoint_mode, lam)
            ev.check = check
        return ev

    @property
    def adjoint_mode(self) -> str:
        return self.mode

    def cost(self, u: ControlTrajectory) -> CostBreakdown:
        return self.evaluate(u).cost

    def linearize(self, ev: Evaluation, h: ControlTrajectory) -> LinearizedTrajectory:
        return solve_linearized(ev.traj, h, self.metric, int(np.max(ev.hit.stencil)))

    # -- first order -----------------------------------------------------

    def z_at_hit(self, ev: Evaluation, z: LinearizedTrajectory, deriv: int = 0) -> np.ndarray:
        if self.adjoint_mode == "discrete":
            return ev.hit.value(z.frames, deriv)
        if deriv == 0:
            k = ev.hit.step
            w = (ev.T - z.times[k]) / (z.times[k + 1] - z.times[k])
            return (1.0 - w) * z.frames[k] + w * z.frames[k + 1]
        return z_t_at(z, ev.traj, ev.T)

    def D(self, ev: Evaluation, z: LinearizedTrajectory) -> float:
        return hitting_time_derivative_D(self.grid, self.z_at_hit(ev, z), ev.residual, ev.m_t)

    def Y(self, ev: Evaluation, h: ControlTrajectory) -> float:
        self.attach_adjoint(ev)
        return first_order_Y(h, ev.adjoint, ev.traj, ev.control, self.metric)

    def gradient(self, ev: Evaluation) -> ControlTrajectory:
        self.attach_adjoint(ev)
        return riesz_gradient(ev.adjoint, ev.traj, ev.control, self.metric)

    # -- second order ----------------------------------------------------

    def second_order_ingredients(self, ev: Evaluation, z: LinearizedTrajectory):
        """m_tt(T~) and z_t(T~) consistent with the adjoint mode."""
        if self.adjoint_mode == "discrete":
            return ev.hit.value(ev.traj.frames, 2), ev.hit.value(z.frames, 1)
        _, m_tt = temporal_derivatives(ev.traj, ev.T)
        return m_tt, z_t_at(z, ev.traj, ev.T)

    def phi_integral(self, ev: Evaluation, z: LinearizedTrajectory) -> float:
        """int int (z x lap z + z x h - 2 (z.m) z - |z|^2 m) . phi over [0, T~]."""
        self.attach_adjoint(ev)
        adj = ev.adjoint
        n = adj.n_steps
        src = np.stack([
            xi_source(self.grid, ev.traj.frames[k], z.frames[k], z.h_steps[k]) for k in range(n)
        ])
        return 0.5 * adj.pair_steps(src)

    def G(self, ev: Evaluation, h: ControlTrajectory, z: LinearizedTrajectory | None = None) -> float:
        z = z if z is not None else self.linearize(ev, h)
        m_tt, z_t = self.second_order_ingredients(ev, z)
        D = self.D(ev, z)
        return curvature_G(
            self.grid, D, self.z_at_hit(ev, z), z_t, ev.residual, ev.m_t, m_tt,
            self.phi_integral(ev, z), ev.T,
        )

    def Q(self, ev: Evaluation, h: ControlTrajectory) -> dict:
        z = self.linearize(ev, h)
        D = self.D(ev, z)
        G = self.G(ev, h, z)
        return {"D": D, "G": G, "Q": quadratic_Q(D, G, ev.T, norm_U(h, self.metric) ** 2)}

    def xi_identity(self, ev: Evaluation, h: ControlTrajectory) -> tuple[float, float]:
        """Both sides of 2 int int (...) . phi = -T~ (xi(T~), r) / (m_t, r)."""
        z = self.linearize(ev, h)
        xi = solve_second_variation(ev.traj, z, self.metric)
        lhs = 2.0 * self.phi_integral(ev, z)
        xi_T = self.z_at_hit(ev, xi)
        rhs = -ev.T * l2(self.grid, xi_T, ev.residual) / ev.denominator
        return lhs, rhs


def hitting_time_derivative_D(grid, z_T, residual, m_t) -> float:
    """D = -(z(T~), r) / (r, m_t(T~))."""
    return -l2(grid, z_T, residual) / l2(grid, residual, m_t)


def curvature_G(grid, D, z_T, z_t, residual, m_t, m_tt, phi_integral, T_tilde) -> float:
    """Second-order hitting-time coefficient from its defining identity.

    (m_t, r) G = -1/2 ||m_t D + z||^2 - (1/2 m_tt D^2 + z_t D, r) + (m_t, r) / T~ * phi_integral
    """
    den = l2(grid, m_t, residual)
    a = m_t * D + z_T
    rhs = (
        -0.5 * l2(grid, a, a)
        - l2(grid, 0.5 * m_tt * D**2 + z_t * D, residual)
        + den / T_tilde * phi_integral
    )
    return rhs / den


def quadratic_Q(D: float, G: float, T_tilde: float, h_norm_sq: float) -> float:
    return D**2 + 2.0 * T_tilde * G + h_norm_sq


def _gradient_density(step_weights: np.ndarray, traj: StateTrajectory) -> np.ndarray:
    """Per-step (phi + phi x m) with quadrature weights folded in."""
    W = step_weights
    return W + np.cross(W, traj.frames[: len(W)])


def first_order_Y(h, adj: AdjointTrajectory, traj: StateTrajectory, u, metric: SobolevMetric) -> float:
    h_steps = traj.sampler.sample(h.frames)
    return adj.pair_steps(source_steps(traj, h_steps, adj.n_steps)) + inner_U(u, h, metric)


def riesz_from_weights(step_weights, traj: StateTrajectory, u, metric: SobolevMetric) -> ControlTrajectory:
    """g in U with ((g, h))_U = sum_k <W_k, h_k + m_k x h_k> + ((u, h))_U."""
    dens = _gradient_density(step_weights, traj)
    full = np.zeros((traj.n_steps,) + traj.grid.shape)
    full[: len(dens)] = dens  # zero beyond the adjoint window
    rhs = traj.sampler.transpose(full)
    g0 = solve_gram_U(rhs, u.times, metric)
    return u.like(u.frames + g0)


def riesz_gradient(adj: AdjointTrajectory, traj: StateTrajectory, u, metric: SobolevMetric) -> ControlTrajectory:
    """g in U with ((g, h))_U = Y(h) for every h on the control nodes."""
    return riesz_from_weights(adj.step_weights, traj, u, metric)


@dataclass
class OptimalityReport:
    gradient_norm: float
    T_tilde: float
    horizon: float
    Y_values: list[float] = field(default_factory=list)
    probes: list[dict] = field(default_factory=list)
    transversality: dict = field(default_factory=dict)
    con1: bool = False
    y_tolerance: float = 1e-8
    verdict: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2, default=_json_default)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(type(o))


def con1(T_tilde: float, horizon: float) -> bool:
    return 0.0 < T_tilde < horizon and math.isfinite(T_tilde)
