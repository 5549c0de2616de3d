# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled coordinate-descent kernel; mirrors ``_cd_py.cd_quadratic`` exactly."""

from libc.math cimport fabs

import numpy as np


cdef double _soft(double rho, double l1) nogil:
    if rho > l1:
        return rho - l1
    if rho < -l1:
        return rho + l1
    return 0.0


cdef double _violation(double[::1] s, double[::1] lin, double l1, double l2,
                       double[::1] beta) nogil:
    cdef Py_ssize_t k, q = beta.shape[0]
    cdef double g, v, worst = 0.0
    for k in range(q):
        g = s[k] - lin[k] + l2 * beta[k]
        if beta[k] > 0.0:
            v = fabs(g + l1)
        elif beta[k] < 0.0:
            v = fabs(g - l1)
        else:
            v = fabs(g) - l1
            if v < 0.0:
                v = 0.0
        if v > worst:
            worst = v
    return worst


cdef void _refresh(double[:, ::1] gram, double[::1] beta, double[::1] s) nogil:
    cdef Py_ssize_t j, k, q = beta.shape[0]
    cdef double acc
    for j in range(q):
        acc = 0.0
        for k in range(q):
            acc += gram[j, k] * beta[k]
        s[j] = acc


def cd_quadratic(double[:, ::1] gram, double[::1] lin, double l1, double l2,
                 double[::1] beta, int max_sweeps, double tol):
    """Run up to ``max_sweeps`` cyclic sweeps; return ``(sweeps, kkt_violation)``."""
    cdef Py_ssize_t j, k, q = beta.shape[0]
    if q == 0:
        return 0, 0.0
    cdef double[::1] s = np.empty(q, dtype=np.float64)
    cdef double[::1] denom = np.empty(q, dtype=np.float64)
    cdef double old, new, rho, diff, viol
    cdef int sweeps = 0
    with nogil:
        for k in range(q):
            denom[k] = gram[k, k] + l2
        _refresh(gram, beta, s)
        while sweeps < max_sweeps:
            sweeps += 1
            for k in range(q):
                old = beta[k]
                rho = lin[k] - s[k] + gram[k, k] * old
                if denom[k] <= 0.0:
                    new = 0.0
                else:
                    new = _soft(rho, l1) / denom[k]
                if new != old:
                    diff = new - old
                    for j in range(q):
                        s[j] += gram[j, k] * diff
                    beta[k] = new
            if sweeps % 32 == 0:
                _refresh(gram, beta, s)
            if _violation(s, lin, l1, l2, beta) <= tol:
                _refresh(gram, beta, s)
                if _violation(s, lin, l1, l2, beta) <= tol:
                    break
    _refresh(gram, beta, s)
    viol = _violation(s, lin, l1, l2, beta)
    return sweeps, viol
