# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled implementation of the hot kernels.

Potentials enter as one-sided cell-endpoint samples (vlo[j] = V(x_j^+),
vhi[j] = V(x_{j+1}^-)) so node-aligned jumps are exact. Same semantics as
``_pykernels``: product-trapezoid Volterra iterations for
the Jost factors and the free-propagator quadrature. The recurrences here
are anchored locally (phase factors per cell), so there is no overflow
limit on Im(z)*x_max.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport M_PI, fabs, sqrt

cdef extern from "complex.h" nogil:
    double complex cexp(double complex)
    double cabs(double complex)

BACKEND = "compiled"

cdef double _SERIES_CUT = 1e-3


cdef inline double complex _phi1(double complex w) nogil:
    if cabs(w) < _SERIES_CUT:
        return 1.0 + w * (1.0 / 2 + w * (1.0 / 6 + w * (1.0 / 24 + w * (1.0 / 120 + w / 720))))
    return (cexp(w) - 1.0) / w


cdef inline double complex _phi2(double complex w) nogil:
    if cabs(w) < _SERIES_CUT:
        return 1.0 / 2 + w * (1.0 / 6 + w * (1.0 / 24 + w * (1.0 / 120 + w * (1.0 / 720 + w / 5040))))
    return (cexp(w) - 1.0 - w) / (w * w)


def phi1(w):
    """(e^w - 1)/w, extended by 1 at w = 0."""
    w_arr = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    shape = w_arr.shape
    cdef double complex[::1] wv = np.ascontiguousarray(w_arr.ravel())
    out = np.empty(wv.shape[0], dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    for i in range(wv.shape[0]):
        ov[i] = _phi1(wv[i])
    out = out.reshape(shape)
    return out[()] if np.asarray(w).ndim == 0 else out


def phi2(w):
    """(e^w - 1 - w)/w^2, extended by 1/2 at w = 0."""
    w_arr = np.atleast_1d(np.asarray(w, dtype=np.complex128))
    shape = w_arr.shape
    cdef double complex[::1] wv = np.ascontiguousarray(w_arr.ravel())
    out = np.empty(wv.shape[0], dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef Py_ssize_t i
    for i in range(wv.shape[0]):
        ov[i] = _phi2(wv[i])
    out = out.reshape(shape)
    return out[()] if np.asarray(w).ndim == 0 else out


cdef int _solve_one(double[::1] x, double[::1] vlo, double[::1] vhi,
                    double complex z, int sign,
                    double tol, int max_iter,
                    double complex[::1] m, double complex[::1] mp,
                    double* residual) nogil:
    """Picard iteration for one spectral point; returns iterations used."""
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, it
    cdef double complex tiz = 2j * z
    cdef bint zero = (z.real == 0.0 and z.imag == 0.0)
    cdef double h, diff, dv
    cdef double complex w, p2, acc_a, acc_b, acc_d, cell, cellb, cellm, e, g0, g1, val

    for i in range(n):
        m[i] = 1.0

    cdef double complex[::1] mn = mp  # reuse mp as scratch for the new iterate
    it = 0
    diff = tol + 1.0
    while it < max_iter and diff >= tol:
        it += 1
        diff = 0.0
        if sign > 0:
            acc_a = 0.0
            acc_b = 0.0
            acc_d = 0.0
            mn[n - 1] = 1.0
            for i in range(n - 2, -1, -1):
                h = x[i + 1] - x[i]
                g0 = vlo[i] * m[i]
                g1 = vhi[i] * m[i + 1]
                cellb = h * (g0 + g1) / 2.0
                if zero:
                    cellm = h * h * (g0 / 6.0 + g1 / 3.0)
                    acc_d = acc_d + h * acc_b + cellm
                    acc_b = acc_b + cellb
                    val = 1.0 + acc_d
                else:
                    w = tiz * h
                    p2 = _phi2(w)
                    cell = h * (p2 * g0 + (_phi1(w) - p2) * g1)
                    acc_a = cell + cexp(w) * acc_a
                    acc_b = acc_b + cellb
                    val = 1.0 + (acc_a - acc_b) / tiz
                dv = cabs(val - m[i])
                if dv > diff:
                    diff = dv
                mn[i] = val
            for i in range(n):
                m[i] = mn[i]
        else:
            acc_a = 0.0
            acc_b = 0.0
            acc_d = 0.0
            mn[0] = 1.0
            for i in range(1, n):
                h = x[i] - x[i - 1]
                g0 = vlo[i - 1] * m[i - 1]
                g1 = vhi[i - 1] * m[i]
                cellb = h * (g0 + g1) / 2.0
                if zero:
                    cellm = h * h * (g1 / 6.0 + g0 / 3.0)
                    acc_d = acc_d + h * acc_b + cellm
                    acc_b = acc_b + cellb
                    val = 1.0 + acc_d
                else:
                    w = tiz * h
                    p2 = _phi2(w)
                    cell = h * (p2 * g1 + (_phi1(w) - p2) * g0)
                    acc_a = cexp(w) * acc_a + cell
                    acc_b = acc_b + cellb
                    val = 1.0 + (acc_a - acc_b) / tiz
                dv = cabs(val - m[i])
                if dv > diff:
                    diff = dv
                mn[i] = val
            for i in range(n):
                m[i] = mn[i]

    # final pass: fixed-point defect and the derivative integral
    residual[0] = 0.0
    if sign > 0:
        acc_a = 0.0
        acc_b = 0.0
        acc_d = 0.0
        mp[n - 1] = 0.0
        for i in range(n - 2, -1, -1):
            h = x[i + 1] - x[i]
            g0 = vlo[i] * m[i]
            g1 = vhi[i] * m[i + 1]
            cellb = h * (g0 + g1) / 2.0
            if zero:
                cellm = h * h * (g0 / 6.0 + g1 / 3.0)
                acc_d = acc_d + h * acc_b + cellm
                acc_b = acc_b + cellb
                val = 1.0 + acc_d
                mp[i] = -acc_b
            else:
                w = tiz * h
                p2 = _phi2(w)
                cell = h * (p2 * g0 + (_phi1(w) - p2) * g1)
                acc_a = cell + cexp(w) * acc_a
                acc_b = acc_b + cellb
                val = 1.0 + (acc_a - acc_b) / tiz
                mp[i] = -acc_a
            dv = cabs(val - m[i])
            if dv > residual[0]:
                residual[0] = dv
    else:
        acc_a = 0.0
        acc_b = 0.0
        acc_d = 0.0
        mp[0] = 0.0
        for i in range(1, n):
            h = x[i] - x[i - 1]
            g0 = vlo[i - 1] * m[i - 1]
            g1 = vhi[i - 1] * m[i]
            cellb = h * (g0 + g1) / 2.0
            if zero:
                cellm = h * h * (g1 / 6.0 + g0 / 3.0)
                acc_d = acc_d + h * acc_b + cellm
                acc_b = acc_b + cellb
                val = 1.0 + acc_d
                mp[i] = acc_b
            else:
                w = tiz * h
                p2 = _phi2(w)
                cell = h * (p2 * g1 + (_phi1(w) - p2) * g0)
                acc_a = cexp(w) * acc_a + cell
                acc_b = acc_b + cellb
                val = 1.0 + (acc_a - acc_b) / tiz
                mp[i] = acc_a
            dv = cabs(val - m[i])
            if dv > residual[0]:
                residual[0] = dv
    return <int>it


def volterra_m_batch(x, vlo, vhi, z, int sign, double tol=1e-10, int max_iter=200):
    """Picard iteration for the de-oscillated Jost factors, batched over z."""
    cdef double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    cdef double[::1] vlov = np.ascontiguousarray(vlo, dtype=np.float64)
    cdef double[::1] vhiv = np.ascontiguousarray(vhi, dtype=np.float64)
    z_arr = np.atleast_1d(np.asarray(z, dtype=np.complex128))
    cdef double complex[::1] zv = np.ascontiguousarray(z_arr)
    cdef Py_ssize_t bsz = zv.shape[0], n = xv.shape[0], b
    m = np.empty((bsz, n), dtype=np.complex128)
    mp = np.empty((bsz, n), dtype=np.complex128)
    niter = np.empty(bsz, dtype=np.int64)
    residual = np.empty(bsz, dtype=np.float64)
    cdef double complex[:, ::1] mv = m
    cdef double complex[:, ::1] mpv = mp
    cdef long long[::1] nv = niter
    cdef double[::1] rv = residual
    cdef double res
    with nogil:
        for b in range(bsz):
            nv[b] = _solve_one(xv, vlov, vhiv, zv[b], sign, tol, max_iter, mv[b], mpv[b], &res)
            rv[b] = res
    return m, mp, niter, residual


def volterra_m(x, vlo, vhi, z, sign, tol=1e-10, max_iter=200):
    """Single-z wrapper around :func:`volterra_m_batch`."""
    m, mp, niter, residual = volterra_m_batch(x, vlo, vhi, np.asarray([z]), sign, tol, max_iter)
    return m[0], mp[0], int(niter[0]), float(residual[0])


def free_propagator_apply(x_out, y, wq, f, double t, chunk=None):
    """u(x) = (-4 pi i t)^{-1/2} sum_j wq_j e^{-i(x - y_j)^2/(4t)} f_j."""
    if t == 0.0:
        raise ValueError("free propagator kernel is singular at t = 0")
    cdef double[::1] xv = np.ascontiguousarray(x_out, dtype=np.float64)
    cdef double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    wf = np.ascontiguousarray(np.asarray(wq, dtype=np.float64) * np.asarray(f, dtype=np.complex128))
    cdef double complex[::1] wv = wf
    out = np.empty(xv.shape[0], dtype=np.complex128)
    cdef double complex[::1] ov = out
    cdef double s = -1.0 / (4.0 * t)
    cdef double complex c, acc
    cdef double d
    cdef Py_ssize_t i, j, no = xv.shape[0], ni = yv.shape[0]
    c = cexp(1j * (M_PI / 4.0) * (1.0 if t > 0 else -1.0)) / sqrt(4.0 * M_PI * fabs(t))
    with nogil:
        for i in range(no):
            acc = 0.0
            for j in range(ni):
                d = xv[i] - yv[j]
                acc = acc + wv[j] * cexp(1j * (s * d * d))
            ov[i] = c * acc
    return out
