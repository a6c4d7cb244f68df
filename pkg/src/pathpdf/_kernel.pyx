# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled path-exponent kernels. Same contract as ``pathpdf._fallback``.

Exponents 1, 1.5 and 2 are evaluated inline. For other exponents the step
magnitudes are collected in C and raised to the power by numpy's vectorized
``power``, which beats a scalar libm loop.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, fabs, sqrt

cnp.import_array()

cdef double EXPONENT_CAP = 1e300


cdef inline bint _inline_power(double p) noexcept nogil:
    return p == 2.0 or p == 1.0 or p == 1.5


cdef inline double _step_power(double omega, double p) noexcept nogil:
    cdef double a
    if p == 2.0:
        return omega * omega
    a = fabs(omega)
    if p == 1.0:
        return a
    return a * sqrt(a)


cdef inline double _finish(double s, double dtf, double gamma, double beta) noexcept nogil:
    cdef double e
    s = s * dtf
    if gamma == 1.0:
        e = beta * s
    else:
        e = beta * pow(s, gamma)
    if not e < EXPONENT_CAP:
        e = EXPONENT_CAP
    return e


cdef void _steps(const double[:, ::1] yunit, double scale, double slope, double x0, double xT,
                 double dt, double r, double[:, ::1] out) noexcept nogil:
    # |Omega| for every step; row i of ``yunit`` gives interior points scale*y + slope*(k+1)
    cdef Py_ssize_t n = yunit.shape[0]
    cdef Py_ssize_t d = yunit.shape[1]
    cdef Py_ssize_t i, k
    cdef double prev, cur
    for i in range(n):
        prev = x0
        for k in range(d):
            cur = scale * yunit[i, k] + slope * (k + 1)
            out[i, k] = fabs((cur - prev) / dt - r)
            prev = cur
        out[i, d] = fabs((xT - prev) / dt - r)


cdef void _reduce(const double[:, ::1] powered, double dtf, double gamma, double beta,
                  double[::1] e) noexcept nogil:
    cdef Py_ssize_t i, k
    cdef double s
    for i in range(powered.shape[0]):
        s = 0.0
        for k in range(powered.shape[1]):
            s = s + powered[i, k]
        e[i] = _finish(s, dtf, gamma, beta)


cdef _exponents(const double[:, ::1] yunit, double scale, double slope, double x0, double xT,
                double dt, double r, double p, double gamma, double beta, double dtf):
    cdef Py_ssize_t n = yunit.shape[0]
    cdef Py_ssize_t d = yunit.shape[1]
    cdef Py_ssize_t i, k
    cdef double prev, cur, s
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] e = out
    cdef double[:, ::1] buf
    if _inline_power(p):
        with nogil:
            for i in range(n):
                s = 0.0
                prev = x0
                for k in range(d):
                    cur = scale * yunit[i, k] + slope * (k + 1)
                    s = s + _step_power((cur - prev) / dt - r, p)
                    prev = cur
                s = s + _step_power((xT - prev) / dt - r, p)
                e[i] = _finish(s, dtf, gamma, beta)
        return out
    steps = np.empty((n, d + 1), dtype=np.float64)
    buf = steps
    with nogil:
        _steps(yunit, scale, slope, x0, xT, dt, r, buf)
    np.power(steps, p, out=steps)
    with nogil:
        _reduce(buf, dtf, gamma, beta, e)
    return out


def path_exponents(const double[:, ::1] inner, double x0, double xT, double dt, double r,
                   double p, double gamma, double beta, double dtf):
    return _exponents(inner, 1.0, 0.0, x0, xT, dt, r, p, gamma, beta, dtf)


def bridge_log_weights(const double[:, ::1] yunit, const double[::1] base_logq, double scale,
                       double xt_rel, double dt, double r, double p, double gamma,
                       double beta, double dtf):
    cdef double slope = xt_rel / (yunit.shape[1] + 1)
    out = _exponents(yunit, scale, slope, 0.0, xt_rel, dt, r, p, gamma, beta, dtf)
    cdef double[::1] lw = out
    cdef Py_ssize_t i
    with nogil:
        for i in range(lw.shape[0]):
            lw[i] = -lw[i] - base_logq[i]
    return out
