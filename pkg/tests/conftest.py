import math

import numpy as np
import pytest

from llbtoc.fields import ControlTrajectory, SobolevMetric, l2, make_grid
from llbtoc.forward import TargetSpec
from llbtoc.objective import HittingProblem

# acceptance lines collected by tests/test_acceptance.py
ACCEPTANCE: dict[str, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
            terminalreporter.write_line(ACCEPTANCE[key])


@pytest.fixture(scope="session")
def grid1():
    return make_grid(1, [64], [1.0])


@pytest.fixture(scope="session")
def metric1(grid1):
    return SobolevMetric(grid1)


def radial_problem(dt=1e-3, horizon=1.0, cells=64, **kw):
    g = make_grid(1, [cells], [1.0])
    return HittingProblem(g.constant([1.0, 0.0, 0.0]), TargetSpec(g.zeros(), 0.5), horizon, dt,
                          SobolevMetric(g), **kw)


def radial_direction(u: ControlTrajectory, sign=-1.0) -> ControlTrajectory:
    h = u.like(np.zeros_like(u.frames))
    h.frames[..., 0] = sign
    return h


def bump_problem(cells=64, dt=1e-3, horizon=0.8, seed=1, **kw):
    """Non-constant state with a smooth random control: every kernel term is active."""
    g = make_grid(1, [cells], [1.0])
    x = g.centers()[0]
    m0 = np.stack([0.7 + 0.3 * np.cos(np.pi * x), 0.4 * np.cos(2 * np.pi * x), 0.2 + 0 * x], -1)
    target = g.constant([0.0, 0.1, 0.0])
    delta = 0.6 * math.sqrt(l2(g, m0 - target, m0 - target))
    u = smooth_control(g, horizon, 9, seed, 0.3)
    prob = HittingProblem(m0, TargetSpec(target, delta), horizon, dt, SobolevMetric(g), **kw)
    return prob, u


def smooth_control(grid, horizon, nodes, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, horizon, nodes)
    x = grid.mesh()
    frames = np.zeros((nodes,) + grid.shape)
    for a in range(3):
        for b in range(3):
            cx = np.ones(grid.cells)
            for ax in range(grid.dim):
                cx = cx * np.cos(b * math.pi * x[ax] / grid.extent[ax])
            frames += np.cos(a * math.pi * t / horizon).reshape((-1,) + (1,) * grid.dim + (1,)) * cx[None, ..., None] * rng.standard_normal(3)
    return ControlTrajectory(grid, t, scale * frames / 3.0)


@pytest.fixture(scope="session")
def radial():
    return radial_problem()


@pytest.fixture(scope="session")
def bump():
    return bump_problem()
