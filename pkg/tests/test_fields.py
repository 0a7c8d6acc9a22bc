import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from llbtoc.errors import ConfigError
from llbtoc.fields import (
    ControlTrajectory,
    SobolevMetric,
    cross_field,
    gram_U,
    inner_U,
    inner_product,
    l2,
    laplacian,
    make_grid,
    norm,
    norm_U,
    riesz_h1dual,
    solve_gram_U,
)

seeds = st.integers(0, 2**31 - 1)


def rand_field(grid, seed):
    return np.random.default_rng(seed).standard_normal(grid.shape)


def test_make_grid_spacing():
    g = make_grid(1, [4], [1.0])
    assert g.spacing == (0.25,) and g.n_cells == 4
    np.testing.assert_allclose(g.centers()[0], [0.125, 0.375, 0.625, 0.875])
    assert make_grid(2, [8, 8], [1.0, 1.0]).n_cells == 64


@pytest.mark.parametrize("args", [(1, [1], [1.0]), (4, [4] * 4, [1.0] * 4), (1, [4], [0.0]), (2, [4], [1.0])])
def test_make_grid_rejects(args):
    with pytest.raises(ConfigError):
        make_grid(*args)


def test_cross_field_basis():
    g = make_grid(2, [3, 3], [1.0, 1.0])
    np.testing.assert_array_equal(cross_field(g.constant([1, 0, 0]), g.constant([0, 1, 0])), g.constant([0, 0, 1]))
    with pytest.raises(ValueError):
        cross_field(g.zeros(), np.zeros((3, 3)))


@settings(max_examples=25, deadline=None)
@given(seeds)
def test_cross_product_identities(seed):
    g = make_grid(1, [16], [1.0])
    a, b = rand_field(g, seed), rand_field(g, seed + 1)
    assert np.max(np.abs(cross_field(a, a))) == 0.0
    assert np.max(np.abs(np.sum(a * cross_field(a, b), -1))) < 1e-13
    np.testing.assert_allclose(cross_field(a, b), -cross_field(b, a))


def test_laplacian_constant_is_zero():
    g = make_grid(3, [4, 5, 6], [1.0, 2.0, 3.0])
    assert np.max(np.abs(laplacian(g, g.constant([1.0, -2.0, 3.0])))) < 1e-11


def test_laplacian_eigenfunction_order_two():
    errs = []
    for n in (16, 32, 64):
        g = make_grid(1, [n], [2.0])
        x = g.centers()[0]
        f = np.zeros(g.shape)
        f[:, 0] = np.cos(np.pi * x / 2.0)
        errs.append(np.max(np.abs(laplacian(g, f) + (np.pi / 2.0) ** 2 * f)))
    ratios = np.array(errs[:-1]) / errs[1:]
    np.testing.assert_allclose(ratios, 4.0, rtol=0.05)


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from([1, 2, 3]))
def test_laplacian_symmetric_negative(seed, dim):
    g = make_grid(dim, [6] * dim, [1.0 + 0.5 * i for i in range(dim)])
    a, b = rand_field(g, seed), rand_field(g, seed + 7)
    lab, alb = l2(g, laplacian(g, a), b), l2(g, a, laplacian(g, b))
    assert abs(lab - alb) <= 1e-12 * max(1.0, abs(lab)) * 1e2
    assert l2(g, laplacian(g, a), a) <= 1e-12


def test_inner_products():
    g = make_grid(1, [128], [1.0])
    b = rand_field(g, 0)
    for kind in ("L2", "H1", "H2eq"):
        assert inner_product(g, g.zeros(), b, kind) == 0.0
    c = np.array([0.3, -0.4, 1.2])
    assert math.isclose(norm(g, g.constant(c)), np.linalg.norm(c), rel_tol=1e-14)
    f = np.zeros(g.shape)
    f[:, 0] = np.cos(np.pi * g.centers()[0])
    assert abs(norm(g, f) ** 2 - 0.5) < 1e-3
    with pytest.raises(ValueError):
        inner_product(g, b, b, "H7")


@pytest.mark.parametrize("method", ["dct", "cg"])
def test_riesz(method):
    g = make_grid(1, [64], [1.0])
    M = SobolevMetric(g, method=method)
    rep, n0 = riesz_h1dual(g.zeros(), M)
    assert n0 == 0.0 and not rep.any()
    c = np.array([1.0, 2.0, -2.0])
    rep, nc = riesz_h1dual(g.constant(c), M)
    np.testing.assert_allclose(rep, g.constant(c), atol=1e-9)
    assert math.isclose(nc, 3.0, rel_tol=1e-9)
    f = np.zeros(g.shape)
    f[:, 0] = np.cos(np.pi * g.centers()[0])
    _, nf = riesz_h1dual(f, M)
    assert abs(nf**2 - 0.5 / (1 + np.pi**2)) < 1e-4


def test_dct_and_cg_agree():
    g = make_grid(2, [12, 10], [1.0, 1.5])
    f = rand_field(g, 3)
    a = SobolevMetric(g, "dct").solve(f, 0.3)
    b = SobolevMetric(g, "cg", tol=1e-13).solve(f, 0.3)
    np.testing.assert_allclose(a, b, atol=1e-11)


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_metric_spd_and_riesz_bound(seed):
    g = make_grid(2, [8, 8], [1.0, 1.0])
    M = SobolevMetric(g)
    a, b = rand_field(g, seed), rand_field(g, seed + 1)
    assert abs(l2(g, M.apply(a), b) - l2(g, a, M.apply(b))) <= 1e-12 * max(1.0, abs(l2(g, M.apply(a), b))) * 10
    assert l2(g, M.apply(a), a) > 0
    _, nr = riesz_h1dual(a, M)
    assert nr <= norm(g, a) * (1 + 1e-12)


def test_inner_U_examples():
    g = make_grid(1, [16], [1.0])
    M = SobolevMetric(g)
    u = ControlTrajectory.zeros(g, 1.0, 21)
    assert inner_U(u, u, M) == 0.0
    c = np.array([0.5, -1.0, 2.0])
    uc = u.like(np.broadcast_to(g.constant(c), u.frames.shape).copy())
    assert math.isclose(norm_U(uc, M), np.linalg.norm(c), rel_tol=1e-12)
    ut = u.like(u.times[:, None, None] * g.constant(c)[None])
    exact = np.dot(c, c) * (1.0 / 3.0 + 1.0)
    assert abs(norm_U(ut, M) ** 2 - exact) < 1e-3 * exact


@settings(max_examples=15, deadline=None)
@given(seeds)
def test_inner_U_cauchy_schwarz_and_gram(seed):
    g = make_grid(1, [8], [1.0])
    M = SobolevMetric(g)
    rng = np.random.default_rng(seed)
    times = np.concatenate([[0.0], np.sort(rng.uniform(0.05, 1.0, 5))])
    times = np.unique(times)
    u = ControlTrajectory(g, times, rng.standard_normal((len(times),) + g.shape))
    v = u.like(rng.standard_normal(u.frames.shape))
    assert abs(inner_U(u, v, M)) <= norm_U(u, M) * norm_U(v, M) * (1 + 1e-12)
    # Gram operator reproduces the inner product
    assert math.isclose(g.cell_volume * np.sum(u.frames * gram_U(v.frames, times, M)), inner_U(u, v, M), rel_tol=1e-10)
    x = solve_gram_U(v.frames, times, M)
    np.testing.assert_allclose(gram_U(x, times, M), v.frames, atol=1e-9 * np.max(np.abs(v.frames)))


def test_control_trajectory_validation():
    g = make_grid(1, [4], [1.0])
    with pytest.raises(ConfigError):
        ControlTrajectory(g, [0.0, 0.0], np.zeros((2,) + g.shape))
    with pytest.raises(ConfigError):
        ControlTrajectory(g, [0.1, 1.0], np.zeros((2,) + g.shape))
    with pytest.raises(ConfigError):
        ControlTrajectory(g, [0.0, 1.0], np.zeros((3,) + g.shape))
    u = ControlTrajectory(g, [0.0, 1.0], np.stack([g.zeros(), g.constant([2, 0, 0])]))
    np.testing.assert_allclose(u.sample(0.25), g.constant([0.5, 0, 0]))
    np.testing.assert_allclose(u.time_derivative(0.9), g.constant([2, 0, 0]))
