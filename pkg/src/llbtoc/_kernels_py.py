"""NumPy implementations of the per-cell kernels.

Every kernel works on C-contiguous float64 arrays of shape ``(n0, n1, n2, 3)``;
lower-dimensional grids are padded with unit axes by the caller. A unit axis
contributes nothing to the Laplacian because its mirror ghosts equal the cell.
"""

import numpy as np


def laplacian(f, inv_h2):
    """Cell-centred 7-point Laplacian with mirror (homogeneous Neumann) ghosts."""
    out = np.zeros_like(f)
    for axis in range(3):
        n = f.shape[axis]
        if n < 2:
            continue
        fp = np.concatenate(
            [f.take([0], axis=axis), f, f.take([n - 1], axis=axis)], axis=axis
        )
        lo = fp.take(np.arange(0, n), axis=axis)
        hi = fp.take(np.arange(2, n + 2), axis=axis)
        out += (lo - 2.0 * f + hi) * inv_h2[axis]
    return out


def _dot(a, b):
    return np.einsum("...i,...i->...", a, b)[..., None]


def llb_rhs(m, u, inv_h2):
    """m x lap(m) + m x u - (1 + |m|^2) m + u."""
    lap = laplacian(m, inv_h2)
    return np.cross(m, lap) + np.cross(m, u) - (1.0 + _dot(m, m)) * m + u


def lin_apply(m, lap_m, u, z, inv_h2):
    """Jacobian of the reaction part of the LLB right-hand side applied to z."""
    lap_z = laplacian(z, inv_h2)
    return (
        np.cross(z, lap_m)
        + np.cross(m, lap_z)
        + np.cross(z, u)
        - (1.0 + _dot(m, m)) * z
        - 2.0 * _dot(m, z) * m
    )


def lin_apply_t(m, lap_m, u, q, inv_h2):
    """L2 transpose of :func:`lin_apply`."""
    return (
        np.cross(lap_m, q)
        + laplacian(np.cross(q, m), inv_h2)
        + np.cross(u, q)
        - (1.0 + _dot(m, m)) * q
        - 2.0 * _dot(m, q) * m
    )


def xi_source(m, z, h, inv_h2):
    """2 z x lap(z) + 2 z x h - 4 (z.m) z - 2 |z|^2 m."""
    lap_z = laplacian(z, inv_h2)
    return (
        2.0 * np.cross(z, lap_z)
        + 2.0 * np.cross(z, h)
        - 4.0 * _dot(z, m) * z
        - 2.0 * _dot(z, z) * m
    )
