# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: pointwise power laws and deterministic reductions.

Every reduction accumulates sequentially in row-major node order, so the
results are bit-identical to a plain node loop over the same values.  The
numpy fallback in `_kernels_py` reproduces the same order.
"""

from libc.math cimport fabs, pow, sqrt

import numpy as np

cimport numpy as cnp

cnp.import_array()


cdef inline double _pow_fast(double x, double e) noexcept nogil:
    # half-integer fast paths (the production gamma values); each stays
    # within 1 ulp of the correctly rounded pow
    if e == 1.0:
        return x
    if e == 2.0:
        return x * x
    if e == 0.5:
        return sqrt(x)
    if e == 1.5:
        return x * sqrt(x)
    return pow(x, e)


def abs_pow_sum(const double[::1] x, double q):
    """Return sum_i |x_i|**q, accumulated in index order."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef double acc = 0.0
    for i in range(n):
        acc += _pow_fast(fabs(x[i]), q)
    return acc


def count_above(const double[::1] x, double k):
    """Return #{i : x_i > k} (strict inequality)."""
    cdef Py_ssize_t i, n = x.shape[0]
    cdef long cnt = 0
    for i in range(n):
        if x[i] > k:
            cnt += 1
    return cnt


def grad_norm_sq(const double[:, ::1] p):
    """Return s_i = sum_j p[j, i]**2 for a (d, n) stack of gradient components."""
    cdef Py_ssize_t j, i, d = p.shape[0], n = p.shape[1]
    cdef cnp.ndarray[double] out = np.empty(n)
    cdef double[::1] ov = out
    cdef double acc
    for i in range(n):
        acc = p[0, i] * p[0, i]
        for j in range(1, d):
            acc += p[j, i] * p[j, i]
        ov[i] = acc
    return out


def ham_power(const double[::1] s, double gamma, double c1):
    """Return c1 * s**(gamma/2) elementwise (s = |p|^2, so this is c1*|p|^gamma)."""
    cdef Py_ssize_t i, n = s.shape[0]
    cdef cnp.ndarray[double] out = np.empty(n)
    cdef double[::1] ov = out
    cdef double e = 0.5 * gamma
    for i in range(n):
        ov[i] = c1 * _pow_fast(s[i], e)
    return out


def dh_scale(const double[::1] s, double gamma, double c1):
    """Return c1*gamma*s**((gamma-2)/2) with the value 0 at s = 0.

    Multiplied by p this is the gradient of c1|p|^gamma, extended by zero
    at p = 0 (continuous for gamma > 1).
    """
    cdef Py_ssize_t i, n = s.shape[0]
    cdef cnp.ndarray[double] out = np.empty(n)
    cdef double[::1] ov = out
    cdef double e = 0.5 * (gamma - 2.0)
    cdef double cg = c1 * gamma
    if e == 0.0:
        for i in range(n):
            ov[i] = cg if s[i] > 0.0 else 0.0
        return out
    for i in range(n):
        if s[i] > 0.0:
            ov[i] = cg * _pow_fast(s[i], e)
        else:
            ov[i] = 0.0
    return out


def yk_curve(const double[::1] s, const double[::1] kgrid, double delta, double expo):
    """Superlevel functional sums for an ascending k-grid.

    For v_i = (1+s_i)**((1+delta)/2) returns, per k,
      y[k]   = sum_i ((v_i - k)^+)**expo        (sequential, node order)
      cnt[k] = #{i : 1 + s_i > k**(2/(1+delta))}
    The caller multiplies y by the cell volume to get the rectangle rule.
    """
    cdef Py_ssize_t i, j, nk = kgrid.shape[0], n = s.shape[0]
    cdef cnp.ndarray[double] y = np.zeros(nk)
    cdef cnp.ndarray[cnp.int64_t] cnt = np.zeros(nk, dtype=np.int64)
    cdef cnp.ndarray[double] thr = np.empty(nk)
    cdef double[::1] yv = y
    cdef cnp.int64_t[::1] cv = cnt
    cdef double[::1] tv = thr
    cdef double half = 0.5 * (1.0 + delta)
    cdef double texp = 2.0 / (1.0 + delta)
    cdef double v, onps
    for j in range(nk):
        tv[j] = pow(kgrid[j], texp)
    for i in range(n):
        onps = 1.0 + s[i]
        v = pow(onps, half)
        for j in range(nk):
            if v > kgrid[j]:
                yv[j] += pow(v - kgrid[j], expo)
            else:
                break  # kgrid ascends, later k only larger
        for j in range(nk):
            if onps > tv[j]:
                cv[j] += 1
            else:
                break  # thresholds ascend with k
    return y, cnt
