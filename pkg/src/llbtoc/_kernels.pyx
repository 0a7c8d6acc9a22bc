# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled per-cell kernels; same contracts as ``_kernels_py``.

Loops run in a fixed cell order so results are reproducible run to run.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


cdef inline void _lap_cell(const double[:, :, :, ::1] f, Py_ssize_t i, Py_ssize_t j,
                           Py_ssize_t k, double cx, double cy, double cz,
                           double* out) noexcept nogil:
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    cdef Py_ssize_t im, ip, jm, jp, km, kp, c
    im = i - 1 if i > 0 else 0
    ip = i + 1 if i < n0 - 1 else n0 - 1
    jm = j - 1 if j > 0 else 0
    jp = j + 1 if j < n1 - 1 else n1 - 1
    km = k - 1 if k > 0 else 0
    kp = k + 1 if k < n2 - 1 else n2 - 1
    for c in range(3):
        out[c] = (cx * (f[im, j, k, c] - 2.0 * f[i, j, k, c] + f[ip, j, k, c])
                  + cy * (f[i, jm, k, c] - 2.0 * f[i, j, k, c] + f[i, jp, k, c])
                  + cz * (f[i, j, km, c] - 2.0 * f[i, j, k, c] + f[i, j, kp, c]))


def laplacian(const double[:, :, :, ::1] f, inv_h2):
    cdef double cx = inv_h2[0], cy = inv_h2[1], cz = inv_h2[2]
    cdef Py_ssize_t n0 = f.shape[0], n1 = f.shape[1], n2 = f.shape[2]
    out_arr = np.empty((n0, n1, n2, 3))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double lap[3]
    cdef Py_ssize_t i, j, k, c
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    _lap_cell(f, i, j, k, cx, cy, cz, lap)
                    for c in range(3):
                        out[i, j, k, c] = lap[c]
    return out_arr


def llb_rhs(const double[:, :, :, ::1] m, const double[:, :, :, ::1] u, inv_h2):
    cdef double cx = inv_h2[0], cy = inv_h2[1], cz = inv_h2[2]
    cdef Py_ssize_t n0 = m.shape[0], n1 = m.shape[1], n2 = m.shape[2]
    out_arr = np.empty((n0, n1, n2, 3))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double L[3]
    cdef double m0, m1, m2, u0, u1, u2, s
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    _lap_cell(m, i, j, k, cx, cy, cz, L)
                    m0 = m[i, j, k, 0]; m1 = m[i, j, k, 1]; m2 = m[i, j, k, 2]
                    u0 = u[i, j, k, 0]; u1 = u[i, j, k, 1]; u2 = u[i, j, k, 2]
                    s = 1.0 + m0 * m0 + m1 * m1 + m2 * m2
                    out[i, j, k, 0] = (m1 * L[2] - m2 * L[1]) + (m1 * u2 - m2 * u1) - s * m0 + u0
                    out[i, j, k, 1] = (m2 * L[0] - m0 * L[2]) + (m2 * u0 - m0 * u2) - s * m1 + u1
                    out[i, j, k, 2] = (m0 * L[1] - m1 * L[0]) + (m0 * u1 - m1 * u0) - s * m2 + u2
    return out_arr


def lin_apply(const double[:, :, :, ::1] m, const double[:, :, :, ::1] lap_m,
              const double[:, :, :, ::1] u, const double[:, :, :, ::1] z, inv_h2):
    cdef double cx = inv_h2[0], cy = inv_h2[1], cz = inv_h2[2]
    cdef Py_ssize_t n0 = m.shape[0], n1 = m.shape[1], n2 = m.shape[2]
    out_arr = np.empty((n0, n1, n2, 3))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double Lz[3]
    cdef double m0, m1, m2, u0, u1, u2, z0, z1, z2, a0, a1, a2, s, mz
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    _lap_cell(z, i, j, k, cx, cy, cz, Lz)
                    m0 = m[i, j, k, 0]; m1 = m[i, j, k, 1]; m2 = m[i, j, k, 2]
                    u0 = u[i, j, k, 0]; u1 = u[i, j, k, 1]; u2 = u[i, j, k, 2]
                    z0 = z[i, j, k, 0]; z1 = z[i, j, k, 1]; z2 = z[i, j, k, 2]
                    a0 = lap_m[i, j, k, 0]; a1 = lap_m[i, j, k, 1]; a2 = lap_m[i, j, k, 2]
                    s = 1.0 + m0 * m0 + m1 * m1 + m2 * m2
                    mz = 2.0 * (m0 * z0 + m1 * z1 + m2 * z2)
                    out[i, j, k, 0] = ((z1 * a2 - z2 * a1) + (m1 * Lz[2] - m2 * Lz[1])
                                       + (z1 * u2 - z2 * u1) - s * z0 - mz * m0)
                    out[i, j, k, 1] = ((z2 * a0 - z0 * a2) + (m2 * Lz[0] - m0 * Lz[2])
                                       + (z2 * u0 - z0 * u2) - s * z1 - mz * m1)
                    out[i, j, k, 2] = ((z0 * a1 - z1 * a0) + (m0 * Lz[1] - m1 * Lz[0])
                                       + (z0 * u1 - z1 * u0) - s * z2 - mz * m2)
    return out_arr


def lin_apply_t(const double[:, :, :, ::1] m, const double[:, :, :, ::1] lap_m,
                const double[:, :, :, ::1] u, const double[:, :, :, ::1] q, inv_h2):
    cdef double cx = inv_h2[0], cy = inv_h2[1], cz = inv_h2[2]
    cdef Py_ssize_t n0 = m.shape[0], n1 = m.shape[1], n2 = m.shape[2]
    qxm_arr = np.empty((n0, n1, n2, 3))
    out_arr = np.empty((n0, n1, n2, 3))
    cdef double[:, :, :, ::1] qxm = qxm_arr
    cdef double[:, :, :, ::1] out = out_arr
    cdef double L[3]
    cdef double m0, m1, m2, u0, u1, u2, q0, q1, q2, a0, a1, a2, s, mq
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    m0 = m[i, j, k, 0]; m1 = m[i, j, k, 1]; m2 = m[i, j, k, 2]
                    q0 = q[i, j, k, 0]; q1 = q[i, j, k, 1]; q2 = q[i, j, k, 2]
                    qxm[i, j, k, 0] = q1 * m2 - q2 * m1
                    qxm[i, j, k, 1] = q2 * m0 - q0 * m2
                    qxm[i, j, k, 2] = q0 * m1 - q1 * m0
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    _lap_cell(qxm, i, j, k, cx, cy, cz, L)
                    m0 = m[i, j, k, 0]; m1 = m[i, j, k, 1]; m2 = m[i, j, k, 2]
                    u0 = u[i, j, k, 0]; u1 = u[i, j, k, 1]; u2 = u[i, j, k, 2]
                    q0 = q[i, j, k, 0]; q1 = q[i, j, k, 1]; q2 = q[i, j, k, 2]
                    a0 = lap_m[i, j, k, 0]; a1 = lap_m[i, j, k, 1]; a2 = lap_m[i, j, k, 2]
                    s = 1.0 + m0 * m0 + m1 * m1 + m2 * m2
                    mq = 2.0 * (m0 * q0 + m1 * q1 + m2 * q2)
                    out[i, j, k, 0] = ((a1 * q2 - a2 * q1) + L[0] + (u1 * q2 - u2 * q1)
                                       - s * q0 - mq * m0)
                    out[i, j, k, 1] = ((a2 * q0 - a0 * q2) + L[1] + (u2 * q0 - u0 * q2)
                                       - s * q1 - mq * m1)
                    out[i, j, k, 2] = ((a0 * q1 - a1 * q0) + L[2] + (u0 * q1 - u1 * q0)
                                       - s * q2 - mq * m2)
    return out_arr


def xi_source(const double[:, :, :, ::1] m, const double[:, :, :, ::1] z,
              const double[:, :, :, ::1] h, inv_h2):
    cdef double cx = inv_h2[0], cy = inv_h2[1], cz = inv_h2[2]
    cdef Py_ssize_t n0 = m.shape[0], n1 = m.shape[1], n2 = m.shape[2]
    out_arr = np.empty((n0, n1, n2, 3))
    cdef double[:, :, :, ::1] out = out_arr
    cdef double Lz[3]
    cdef double m0, m1, m2, h0, h1, h2, z0, z1, z2, zz, zm
    cdef Py_ssize_t i, j, k
    with nogil:
        for i in range(n0):
            for j in range(n1):
                for k in range(n2):
                    _lap_cell(z, i, j, k, cx, cy, cz, Lz)
                    m0 = m[i, j, k, 0]; m1 = m[i, j, k, 1]; m2 = m[i, j, k, 2]
                    h0 = h[i, j, k, 0]; h1 = h[i, j, k, 1]; h2 = h[i, j, k, 2]
                    z0 = z[i, j, k, 0]; z1 = z[i, j, k, 1]; z2 = z[i, j, k, 2]
                    zz = 2.0 * (z0 * z0 + z1 * z1 + z2 * z2)
                    zm = 4.0 * (z0 * m0 + z1 * m1 + z2 * m2)
                    out[i, j, k, 0] = (2.0 * (z1 * Lz[2] - z2 * Lz[1]) + 2.0 * (z1 * h2 - z2 * h1)
                                       - zm * z0 - zz * m0)
                    out[i, j, k, 1] = (2.0 * (z2 * Lz[0] - z0 * Lz[2]) + 2.0 * (z2 * h0 - z0 * h2)
                                       - zm * z1 - zz * m1)
                    out[i, j, k, 2] = (2.0 * (z0 * Lz[1] - z1 * Lz[0]) + 2.0 * (z0 * h1 - z1 * h0)
                                       - zm * z2 - zz * m2)
    return out_arr
