"""Grids, vector fields, Neumann finite differences and the function-space norms.

A vector field on a grid is a float64 array of shape ``(*grid.cells, 3)``:
one R^3 value per cell centre, row-major, components interleaved. Time
series of fields carry one extra leading axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.fft

from . import kernels
from .errors import ConfigError, ConvergenceError


@dataclass(frozen=True)
class Grid:
    """Uniform cell-centred mesh of a rectangle in R^dim."""

    dim: int
    cells: tuple[int, ...]
    extent: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2, 3):
            raise ConfigError(f"invalid dimension {self.dim}; expected 1, 2 or 3")
        if len(self.cells) != self.dim or len(self.extent) != self.dim:
            raise ConfigError("cells and extent must have one entry per axis")
        if any(int(n) < 2 for n in self.cells):
            raise ConfigError(f"invalid cells {self.cells}: need at least 2 per axis")
        if any(not (float(e) > 0.0 and math.isfinite(e)) for e in self.extent):
            raise ConfigError(f"non-positive extent {self.extent}")
        object.__setattr__(self, "cells", tuple(int(n) for n in self.cells))
        object.__setattr__(self, "extent", tuple(float(e) for e in self.extent))

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple(e / n for e, n in zip(self.extent, self.cells))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.cells + (3,)

    @property
    def n_cells(self) -> int:
        return int(np.prod(self.cells))

    @property
    def cell_volume(self) -> float:
        return float(np.prod(self.spacing))

    @property
    def volume(self) -> float:
        return float(np.prod(self.extent))

    @property
    def inv_h2(self) -> np.ndarray:
        out = np.zeros(3)
        out[: self.dim] = [1.0 / h**2 for h in self.spacing]
        return out

    def centers(self) -> list[np.ndarray]:
        """Cell-centre coordinates per axis, ``(i + 1/2) * h``."""
        return [(np.arange(n) + 0.5) * h for n, h in zip(self.cells, self.spacing)]

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*self.centers(), indexing="ij"))

    def zeros(self) -> np.ndarray:
        return np.zeros(self.shape)

    def constant(self, vector) -> np.ndarray:
        return np.broadcast_to(np.asarray(vector, dtype=float), self.shape).copy()

    def check_field(self, a: np.ndarray, name: str = "field") -> np.ndarray:
        a = np.asarray(a, dtype=float)
        if a.shape != self.shape:
            raise ValueError(f"{name} has shape {a.shape}, grid expects {self.shape}")
        if not np.all(np.isfinite(a)):
            raise ValueError(f"{name} contains non-finite values")
        return a


def make_grid(dim: int, cells_per_axis, extent_per_axis) -> Grid:
    return Grid(int(dim), tuple(cells_per_axis), tuple(extent_per_axis))


def _same_shape(a, b):
    if a.shape != b.shape:
        raise ValueError(f"grid mismatch: {a.shape} vs {b.shape}")


def cross_field(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    _same_shape(a, b)
    return np.cross(a, b)


def laplacian(grid: Grid, f: np.ndarray) -> np.ndarray:
    """Second-order Neumann Laplacian of a field (or a stack of fields)."""
    if f.shape == grid.shape:
        return kernels.laplacian(kernels.as_block(f), grid.inv_h2).reshape(grid.shape)
    return np.stack([laplacian(grid, fk) for fk in f])


def l2(grid: Grid, a: np.ndarray, b: np.ndarray) -> float:
    """Cell-volume weighted L2 pairing; works on stacks too (sums everything)."""
    _same_shape(a, b)
    return grid.cell_volume * float(np.sum(a * b))


def inner_product(grid: Grid, a: np.ndarray, b: np.ndarray, kind: str = "L2") -> float:
    """``L2``, ``H1`` (L2 plus gradient term) or ``H2eq`` (L2 plus Laplacian pairing)."""
    _same_shape(a, b)
    if kind == "L2":
        return l2(grid, a, b)
    if kind == "H1":
        # summation by parts is exact for the mirror-ghost stencil
        return l2(grid, a, b) - l2(grid, a, laplacian(grid, b))
    if kind == "H2eq":
        return l2(grid, a, b) + l2(grid, laplacian(grid, a), laplacian(grid, b))
    raise ValueError(f"unknown inner product kind {kind!r}")


def norm(grid: Grid, a: np.ndarray, kind: str = "L2") -> float:
    return math.sqrt(max(inner_product(grid, a, a, kind), 0.0))


def cg(
    apply: Callable[[np.ndarray], np.ndarray],
    b: np.ndarray,
    dot: Callable[[np.ndarray, np.ndarray], float],
    tol: float = 1e-10,
    maxiter: int = 1000,
    precond: Callable[[np.ndarray], np.ndarray] | None = None,
    x0: np.ndarray | None = None,
) -> tuple[np.ndarray, int]:
    """Preconditioned conjugate gradients for an SPD operator.

    Stops when the residual norm drops below ``tol`` times the norm of ``b``.
    Returns the solution and the number of iterations.
    """
    x = np.zeros_like(b) if x0 is None else x0.copy()
    bnorm = math.sqrt(dot(b, b))
    if bnorm == 0.0:
        return np.zeros_like(b), 0
    r = b - apply(x) if x0 is not None else b.copy()
    z = precond(r) if precond else r
    p = z.copy()
    rz = dot(r, z)
    for it in range(1, maxiter + 1):
        if math.sqrt(dot(r, r)) <= tol * bnorm:
            return x, it - 1
        ap = apply(p)
        alpha = rz / dot(p, ap)
        x += alpha * p
        r -= alpha * ap
        z = precond(r) if precond else r
        rz_new = dot(r, z)
        p = z + (rz_new / rz) * p
        rz = rz_new
    if math.sqrt(dot(r, r)) <= tol * bnorm:
        return x, maxiter
    raise ConvergenceError(f"CG did not converge in {maxiter} iterations")


@dataclass(frozen=True)
class SobolevMetric:
    """The operator A = (-lap_h + I) on a grid, with solvers for (I - s lap_h).

    ``method="dct"`` diagonalises the Neumann Laplacian with an orthonormal
    DCT-II (exact to rounding); ``method="cg"`` runs matrix-free CG to
    ``tol`` with an iteration cap of 10 x unknowns.
    """

    grid: Grid
    method: str = "dct"
    tol: float = 1e-10
    _eig: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.method not in ("dct", "cg"):
            raise ConfigError(f"unknown linear solver {self.method!r}")
        if not self.tol > 0:
            raise ConfigError("solver tolerance must be positive")
        # eigenvalues of -lap_h, broadcastable against (*cells, 3)
        lam = np.zeros(self.grid.cells)
        for axis, (n, h) in enumerate(zip(self.grid.cells, self.grid.spacing)):
            shape = [1] * self.grid.dim
            shape[axis] = n
            lam = lam + (4.0 / h**2 * np.sin(np.pi * np.arange(n) / (2 * n)) ** 2).reshape(shape)
        object.__setattr__(self, "_eig", lam[..., None])

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalues of -lap_h in DCT-II index order, shape ``(*cells, 1)``."""
        return self._eig

    def _axes(self, f):
        return tuple(range(f.ndim - 1 - self.grid.dim, f.ndim - 1))

    def to_modes(self, f: np.ndarray) -> np.ndarray:
        return scipy.fft.dctn(f, type=2, norm="ortho", axes=self._axes(f))

    def from_modes(self, c: np.ndarray) -> np.ndarray:
        return scipy.fft.idctn(c, type=2, norm="ortho", axes=self._axes(c))

    def apply(self, f: np.ndarray, s: float = 1.0) -> np.ndarray:
        """(I - s lap_h) f."""
        return f - s * laplacian(self.grid, f)

    def solve(self, f: np.ndarray, s: float = 1.0) -> np.ndarray:
        """Solve (I - s lap_h) x = f for a field or a stack of fields."""
        if self.method == "dct":
            return self.from_modes(self.to_modes(f) / (1.0 + s * self._eig))
        if f.shape != self.grid.shape:
            return np.stack([self.solve(fk, s) for fk in f])
        x, _ = cg(
            lambda v: self.apply(v, s),
            f,
            lambda a, b: float(np.sum(a * b)),
            tol=self.tol,
            maxiter=10 * f.size,
        )
        return x


def riesz_h1dual(f: np.ndarray, metric: SobolevMetric) -> tuple[np.ndarray, float]:
    """Riesz representative of f in H^1 and the dual norm ||f||_{H^1*}."""
    rep = metric.solve(f, 1.0)
    return rep, math.sqrt(max(l2(metric.grid, rep, f), 0.0))


@dataclass
class ControlTrajectory:
    """Piecewise-linear control u(t, x) on its own time nodes."""

    grid: Grid
    times: np.ndarray
    frames: np.ndarray

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.frames = np.asarray(self.frames, dtype=float)
        if self.times.ndim != 1 or len(self.times) < 2:
            raise ConfigError("a control needs at least two time nodes")
        if self.times[0] != 0.0 or np.any(np.diff(self.times) <= 0):
            raise ConfigError("control time nodes must start at 0 and increase strictly")
        if self.frames.shape != (len(self.times),) + self.grid.shape:
            raise ConfigError(
                f"control frames have shape {self.frames.shape}, "
                f"expected {(len(self.times),) + self.grid.shape}"
            )

    @classmethod
    def zeros(cls, grid: Grid, horizon: float, nodes: int) -> "ControlTrajectory":
        times = np.linspace(0.0, horizon, nodes)
        return cls(grid, times, np.zeros((nodes,) + grid.shape))

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def like(self, frames: np.ndarray) -> "ControlTrajectory":
        return ControlTrajectory(self.grid, self.times, frames)

    def __add__(self, other):
        return self.like(self.frames + other.frames)

    def __sub__(self, other):
        return self.like(self.frames - other.frames)

    def __mul__(self, s: float):
        return self.like(self.frames * s)

    __rmul__ = __mul__

    def __neg__(self):
        return self.like(-self.frames)

    def _locate(self, t: float) -> tuple[int, float]:
        i = int(np.clip(np.searchsorted(self.times, t, side="right") - 1, 0, len(self.times) - 2))
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        return i, float(np.clip(w, 0.0, 1.0))

    def sample(self, t: float) -> np.ndarray:
        i, w = self._locate(t)
        return (1.0 - w) * self.frames[i] + w * self.frames[i + 1]

    def time_derivative(self, t: float) -> np.ndarray:
        """Forward difference on the interval containing t (one-sided at the end)."""
        i, _ = self._locate(t)
        return (self.frames[i + 1] - self.frames[i]) / (self.times[i + 1] - self.times[i])


def _check_nodes(u: ControlTrajectory, v: ControlTrajectory):
    if u.grid != v.grid or u.times.shape != v.times.shape or np.any(u.times != v.times):
        raise ValueError("control trajectories live on different nodes")


def trapezoid_weights(times: np.ndarray) -> np.ndarray:
    tau = np.diff(times)
    w = np.zeros(len(times))
    w[:-1] += 0.5 * tau
    w[1:] += 0.5 * tau
    return w


def _bcast(w, ref):
    return w.reshape((-1,) + (1,) * (ref.ndim - 1))


def gram_U(frames: np.ndarray, times: np.ndarray, metric: SobolevMetric) -> np.ndarray:
    """Operator M with ((a, b))_U = sum over nodes of the L2 pairing <M a, b>."""
    tau = np.diff(times)
    w = trapezoid_weights(times)
    out = _bcast(w, frames) * metric.apply(frames, 1.0)
    du = np.diff(frames, axis=0) / _bcast(tau, frames[1:])
    y = metric.solve(du, 1.0)
    out[:-1] -= y
    out[1:] += y
    return out


def inner_U(u: ControlTrajectory, v: ControlTrajectory, metric: SobolevMetric) -> float:
    """((u, v))_U: trapezoid-in-time H1 pairing plus H1* pairing of the time derivatives."""
    _check_nodes(u, v)
    grid = metric.grid
    tau = np.diff(u.times)
    w = trapezoid_weights(u.times)
    h1 = sum(wi * inner_product(grid, a, b, "H1") for wi, a, b in zip(w, u.frames, v.frames))
    du = np.diff(u.frames, axis=0) / _bcast(tau, u.frames[1:])
    dv = np.diff(v.frames, axis=0) / _bcast(tau, v.frames[1:])
    rep = metric.solve(du, 1.0)
    dual = sum(ti * l2(grid, a, b) for ti, a, b in zip(tau, rep, dv))
    return float(h1 + dual)


def norm_U(u: ControlTrajectory, metric: SobolevMetric) -> float:
    return math.sqrt(max(inner_U(u, u, metric), 0.0))


def solve_gram_U(
    rhs: np.ndarray, times: np.ndarray, metric: SobolevMetric, tol: float = 1e-12
) -> np.ndarray:
    """Solve M g = rhs for the space-time Gram operator of ((., .))_U by CG.

    With the DCT metric the preconditioner is the exact mode-by-mode
    tridiagonal inverse, so CG only certifies the residual.
    """
    grid = metric.grid
    dot = lambda a, b: grid.cell_volume * float(np.sum(a * b))  # noqa: E731
    apply = lambda a: gram_U(a, times, metric)  # noqa: E731
    if metric.method == "dct":
        precond = lambda r: _modewise_inverse(r, times, metric)  # noqa: E731
    else:
        w = trapezoid_weights(times)
        precond = lambda r: metric.solve(r, 1.0) / _bcast(w, r)  # noqa: E731
    g, _ = cg(apply, rhs, dot, tol=tol, maxiter=max(50, 10 * len(times)), precond=precond)
    return g


def _modewise_inverse(r, times, metric):
    tau = np.diff(times)
    w = trapezoid_weights(times)
    a = 1.0 + metric.eigenvalues  # eigenvalues of A per mode
    rhat = metric.to_modes(r)
    n = len(times)
    inv_tau = 1.0 / tau
    diag = [w[i] * a + (1.0 / a) * ((inv_tau[i - 1] if i > 0 else 0.0)
                                    + (inv_tau[i] if i < n - 1 else 0.0)) for i in range(n)]
    off = [-(1.0 / a) * inv_tau[i] for i in range(n - 1)]
    # Thomas algorithm, vectorised over modes and components
    cp = [None] * n
    dp = [None] * n
    cp[0] = off[0] / diag[0] if n > 1 else None
    dp[0] = rhat[0] / diag[0]
    for i in range(1, n):
        den = diag[i] - off[i - 1] * cp[i - 1]
        if i < n - 1:
            cp[i] = off[i] / den
        dp[i] = (rhat[i] - off[i - 1] * dp[i - 1]) / den
    x = np.empty_like(rhat)
    x[-1] = dp[-1]
    for i in range(n - 2, -1, -1):
        x[i] = dp[i] - cp[i] * x[i + 1]
    return metric.from_modes(x)
