import math

import numpy as np
import pytest

from conftest import radial_direction, radial_problem, smooth_control
from llbtoc.errors import TargetUnreachableError
from llbtoc.fields import ControlTrajectory, inner_U, norm_U
from llbtoc.forward import TargetSpec
from llbtoc.objective import HittingProblem, quadratic_Q
from llbtoc.validation.radial import radial_hit_time


def test_cost_radial(radial):
    u = ControlTrajectory.zeros(radial.grid, 1.0, 11)
    c = radial.cost(u)
    assert c.control_term == 0.0
    assert math.isclose(c.total, c.time_term + c.control_term)
    assert abs(c.total - 0.5 * (0.5 * math.log(2.5)) ** 2) < 1e-3


def test_cost_unreachable_and_delta_scaling(radial):
    u = ControlTrajectory.zeros(radial.grid, 1.0, 11)
    far = HittingProblem(radial.m0, TargetSpec(radial.grid.constant([0, 0, 2.0]), 0.5), 1.0, 1e-3, radial.metric)
    with pytest.raises(TargetUnreachableError):
        far.cost(u)
    wide = HittingProblem(radial.m0, TargetSpec(radial.grid.zeros(), 0.6), 1.0, 1e-3, radial.metric)
    assert wide.cost(u).time_term < radial.cost(u).time_term


def test_bridge_and_Y_identity(bump):
    prob, u = bump
    ev = prob.evaluate(u, with_adjoint=True)
    rng = np.random.default_rng(2)
    for _ in range(4):
        h = u.like(rng.standard_normal(u.frames.shape))
        TD = ev.T * prob.D(ev, prob.linearize(ev, h))
        Y = prob.Y(ev, h)
        phi_part = Y - inner_U(u, h, prob.metric)
        assert abs(TD - phi_part) <= 1e-8 * max(abs(TD), abs(phi_part))
    assert prob.Y(ev, u * 0.0) == 0.0


def test_linearity_and_homogeneity(bump):
    prob, u = bump
    ev = prob.evaluate(u, with_adjoint=True)
    rng = np.random.default_rng(3)
    h1, h2 = (u.like(rng.standard_normal(u.frames.shape)) for _ in range(2))
    Y = lambda h: prob.Y(ev, h)  # noqa: E731
    D = lambda h: prob.D(ev, prob.linearize(ev, h))  # noqa: E731
    assert math.isclose(Y(2 * h1 - h2), 2 * Y(h1) - Y(h2), rel_tol=1e-10, abs_tol=1e-12)
    assert math.isclose(D(2 * h1 - h2), 2 * D(h1) - D(h2), rel_tol=1e-10, abs_tol=1e-12)
    q1 = prob.Q(ev, h1)["Q"]
    assert math.isclose(prob.Q(ev, 3.0 * h1)["Q"], 9.0 * q1, rel_tol=1e-9)
    zero = prob.Q(ev, h1 * 0.0)
    assert zero == {"D": 0.0, "G": 0.0, "Q": 0.0}


def test_riesz_gradient(bump):
    prob, u = bump
    ev = prob.evaluate(u, with_adjoint=True)
    g = prob.gradient(ev)
    gn = norm_U(g, prob.metric)
    assert math.isclose(prob.Y(ev, g), gn**2, rel_tol=1e-10)
    rng = np.random.default_rng(7)
    for _ in range(10):
        h = u.like(rng.standard_normal(u.frames.shape))
        assert abs(inner_U(g, h, prob.metric) - prob.Y(ev, h)) <= 1e-8 * gn * norm_U(h, prob.metric)


def test_gradient_central_difference(bump):
    prob, u = bump
    ev = prob.evaluate(u, with_adjoint=True)
    g = prob.gradient(ev)
    # smooth probe: a unit-norm white-noise direction barely moves J
    h = smooth_control(prob.grid, u.horizon, len(u.times), 3)
    h = h * (1.0 / norm_U(h, prob.metric))
    exact = inner_U(g, h, prob.metric)
    errs = []
    for rho in (4e-2, 2e-2, 1e-2):
        cd = (prob.cost(u + rho * h).total - prob.cost(u - rho * h).total) / (2 * rho)
        errs.append(abs(cd - exact))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.7), rates


def test_D_and_G_radial_closed_form():
    """Spatially constant u = c(t) e1 keeps the state radial: r' = -(1 + r^2) r + c.

    With c = -rho the hitting time solves an ODE whose rho-derivatives at 0
    follow from the closed form; compare D, G against finite differences of
    the exact map rho -> T(rho) computed by quadrature.
    """
    from scipy.integrate import quad

    def T_exact(rho):
        # dt = dr / (-(1 + r^2) r - rho) from r = 1 down to r = 0.5
        return quad(lambda r: 1.0 / ((1 + r * r) * r + rho), 0.5, 1.0, epsabs=1e-14, epsrel=1e-14)[0]

    assert math.isclose(T_exact(0.0), radial_hit_time(1.0, 0.25), rel_tol=1e-12)
    e = 1e-3
    D_ex = (T_exact(e) - T_exact(-e)) / (2 * e)
    G_ex = 0.5 * (T_exact(e) - 2 * T_exact(0) + T_exact(-e)) / e**2
    prob = radial_problem(dt=1e-4, horizon=0.6)
    u = ControlTrajectory.zeros(prob.grid, 0.6, 13)
    ev = prob.evaluate(u, with_adjoint=True)
    q = prob.Q(ev, radial_direction(u))
    assert abs(q["D"] - D_ex) < 2e-3 * abs(D_ex)
    assert abs(q["G"] - G_ex) < 5e-3 * abs(G_ex)
    assert q["Q"] == quadratic_Q(q["D"], q["G"], ev.T, norm_U(radial_direction(u), prob.metric) ** 2)


def test_xi_identity(bump):
    prob, u = bump
    ev = prob.evaluate(u, with_adjoint=True)
    h = u.like(np.random.default_rng(11).standard_normal(u.frames.shape))
    lhs, rhs = prob.xi_identity(ev, h)
    assert abs(lhs - rhs) <= 1e-8 * max(abs(lhs), abs(rhs))


def test_continuous_mode_bridge_first_order():
    """In continuous mode the bridge holds up to O(dt)."""
    errs = []
    for dt in (2e-3, 1e-3, 5e-4):
        prob = radial_problem(dt=dt, horizon=0.6, mode="continuous", hit_method="linear")
        u = ControlTrajectory.zeros(prob.grid, 0.6, 7)
        ev = prob.evaluate(u, with_adjoint=True)
        h = radial_direction(u)
        TD = ev.T * prob.D(ev, prob.linearize(ev, h))
        errs.append(abs(TD - prob.Y(ev, h)))
    assert errs[0] > errs[1] > errs[2]
