import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llbtoc.errors import DivergedError, TrivialCaseError
from llbtoc.fields import ControlTrajectory, SobolevMetric, l2, make_grid, norm
from llbtoc.forward import (
    TargetSpec,
    energy_diagnostics,
    hitting_time,
    lagrange_weights,
    llb_rhs,
    locate_hit,
    simulate,
    step_semi_implicit,
    step_times,
)
from llbtoc.validation.radial import radial_hit_time, radial_oracle


@pytest.fixture(scope="module")
def g():
    return make_grid(1, [32], [1.0])


@pytest.fixture(scope="module")
def M(g):
    return SobolevMetric(g)


def test_llb_rhs_examples(g):
    e1, e2 = g.constant([1, 0, 0]), g.constant([0, 1, 0])
    np.testing.assert_allclose(llb_rhs(g, e1, g.zeros()), -2 * e1)
    c = g.constant([0.1, 0.2, 0.3])
    np.testing.assert_allclose(llb_rhs(g, g.zeros(), c), c)
    np.testing.assert_allclose(llb_rhs(g, e1, e2), g.constant([-2, 1, 1]))
    with pytest.raises(ValueError):
        llb_rhs(g, e1, np.zeros((3, 3)))


def test_step_examples(g, M):
    np.testing.assert_allclose(step_semi_implicit(g.constant([1, 0, 0]), g.zeros(), 0.1, M), g.constant([0.8, 0, 0]))
    c = g.constant([0.3, -0.1, 0.2])
    np.testing.assert_allclose(step_semi_implicit(g.zeros(), c, 0.05, M), 0.05 * c)
    with pytest.raises(ValueError):
        step_semi_implicit(g.zeros(), c, 0.0, M)


def test_step_local_error_second_order(g, M):
    x = g.centers()[0]
    m = np.stack([0.5 * np.cos(np.pi * x), 0.3 + 0 * x, 0.2 * np.cos(2 * np.pi * x)], -1)
    u = g.zeros()
    errs = []
    for dt in (4e-3, 2e-3, 1e-3):
        ref = m
        for _ in range(400):
            ref = step_semi_implicit(ref, u, dt / 400, M)
        errs.append(math.sqrt(l2(g, step_semi_implicit(m, u, dt, M) - ref, step_semi_implicit(m, u, dt, M) - ref)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    assert np.all(rates > 1.8), rates


def test_step_times_last_step_short():
    t = step_times(0.35, 0.1)
    np.testing.assert_allclose(t, [0, 0.1, 0.2, 0.3, 0.35])
    assert len(step_times(1.0, 1e-3)) == 1001


def test_zero_and_constant_trajectories(g, M):
    u = ControlTrajectory.zeros(g, 0.2, 3)
    assert not simulate(g.zeros(), u, 0.2, 1e-2, M).frames.any()
    tr = simulate(g.constant([0.3, 0.4, 0.5]), u, 0.2, 1e-2, M)
    assert np.max(np.ptp(tr.frames, axis=1)) < 1e-14
    np.testing.assert_array_equal(tr.frames[0], g.constant([0.3, 0.4, 0.5]))


def test_radial_first_order(g, M):
    u = ControlTrajectory.zeros(g, 0.5, 2)
    errs = []
    for dt in (2e-3, 1e-3, 5e-4):
        tr = simulate(g.constant([1, 0, 0]), u, 0.5, dt, M)
        errs.append(abs(tr.frames[-1, 0, 0] ** 2 - radial_oracle(1.0, 0.5)))
    rates = np.log2(np.array(errs[:-1]) / errs[1:])
    np.testing.assert_allclose(rates, 1.0, atol=0.1)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 10_000))
def test_l2_norm_non_increasing_without_control(seed):
    g = make_grid(1, [16], [1.0])
    M = SobolevMetric(g)
    m0 = np.random.default_rng(seed).standard_normal(g.shape)
    tr = simulate(m0, ControlTrajectory.zeros(g, 0.1, 2), 0.1, 1e-3, M)
    n = [norm(g, f) for f in tr.frames]
    assert np.all(np.diff(n) <= 1e-14)


def test_simulate_deterministic(g, M):
    rng = np.random.default_rng(0)
    u = ControlTrajectory(g, np.linspace(0, 0.3, 4), rng.standard_normal((4,) + g.shape))
    m0 = rng.standard_normal(g.shape) * 0.3
    a = simulate(m0, u, 0.3, 1e-3, M).frames
    b = simulate(m0, u, 0.3, 1e-3, M).frames
    assert a.tobytes() == b.tobytes()


def test_blowup_guard(g, M):
    u = ControlTrajectory(g, [0.0, 1.0], np.stack([g.constant([50, 0, 0])] * 2))
    with pytest.raises(DivergedError):
        simulate(g.constant([1, 0, 0]), u, 1.0, 1e-3, M, blowup_cap=2.0)


def test_smallness_warning_3d():
    g = make_grid(3, [3, 3, 3], [1.0, 1.0, 1.0])
    M = SobolevMetric(g)
    u = ControlTrajectory.zeros(g, 0.01, 2)
    with warnings.catch_warnings(record=True) as w:
        warnings.simplefilter("always")
        simulate(g.constant([1, 0, 0]), u, 0.01, 1e-3, M, smallness_threshold=1.0)
    assert any("smallness" in str(x.message) for x in w)


def test_hitting_time_radial(g, M):
    tr = simulate(g.constant([1, 0, 0]), ControlTrajectory.zeros(g, 1.0, 2), 1.0, 1e-3, M)
    target = TargetSpec(g.zeros(), 0.5)
    exact = radial_hit_time(1.0, 0.25)
    assert math.isclose(exact, 0.5 * math.log(2.5))
    for method in ("linear", "cubic"):
        hit = locate_hit(tr, target, method)
        assert abs(hit.time - exact) < 2e-3
        r = hit.value(tr.frames) - target.m_target
        if method == "cubic":
            assert abs(math.sqrt(l2(g, r, r)) - 0.5) < 1e-12


def test_hitting_time_guards(g, M):
    tr = simulate(g.constant([1, 0, 0]), ControlTrajectory.zeros(g, 0.2, 2), 0.2, 1e-3, M)
    with pytest.raises(TrivialCaseError):
        hitting_time(tr, TargetSpec(g.zeros(), 1.0))
    assert hitting_time(tr, TargetSpec(g.constant([0, 0, 3.0]), 0.5)) is None
    with pytest.raises(ValueError):
        TargetSpec(g.zeros(), 0.0)


@settings(max_examples=15, deadline=None)
@given(st.floats(0.2, 0.9), st.floats(0.01, 0.5))
def test_hitting_time_monotone_in_delta(d1, gap):
    g = make_grid(1, [4], [1.0])
    M = SobolevMetric(g)
    tr = simulate(g.constant([1, 0, 0]), ControlTrajectory.zeros(g, 3.0, 2), 3.0, 1e-2, M)
    d2 = min(d1 + gap, 0.99)
    target = lambda d: TargetSpec(g.zeros(), d)  # noqa: E731
    for method in ("linear", "cubic"):
        assert hitting_time(tr, target(d2), method) <= hitting_time(tr, target(d1), method)


def test_lagrange_weights_exact_for_cubics():
    nodes = np.array([0.1, 0.15, 0.2, 0.25])
    w = lagrange_weights(nodes, 0.17)
    p = lambda t: 2 - t + 3 * t**2 - 5 * t**3  # noqa: E731
    assert math.isclose(w[0] @ p(nodes), p(0.17), rel_tol=1e-12)
    assert math.isclose(w[1] @ p(nodes), -1 + 6 * 0.17 - 15 * 0.17**2, rel_tol=1e-9)
    assert math.isclose(w[2] @ p(nodes), 6 - 30 * 0.17, rel_tol=1e-7)


def test_energy_diagnostics(g, M):
    u = ControlTrajectory.zeros(g, 0.1, 2)
    z = energy_diagnostics(simulate(g.zeros(), u, 0.1, 1e-2, M), M)
    assert z.sup_h2eq_sq == 0.0 and z.int_h3eq_sq == 0.0 and z.prefactor == 0.0
    tr = simulate(g.constant([0.5, 0, 0]), u, 0.1, 1e-2, M)
    rep = energy_diagnostics(tr, M)
    assert math.isclose(rep.sup_h2eq_sq, max(l2(g, f, f) for f in tr.frames), rel_tol=1e-12)
    sups = []
    for n in (16, 32, 64):
        gn = make_grid(1, [n], [1.0])
        Mn = SobolevMetric(gn)
        x = gn.centers()[0]
        m0 = np.stack([0.5 * np.cos(np.pi * x), 0 * x, 0 * x], -1)
        r = energy_diagnostics(simulate(m0, ControlTrajectory.zeros(gn, 0.05, 2), 0.05, 1e-3, Mn), Mn)
        assert all(math.isfinite(v) for v in (r.sup_h2eq_sq, r.int_h3eq_sq, r.m_proxy))
        sups.append(r.sup_h2eq_sq)
    assert sups[0] <= sups[1] <= sups[2]
