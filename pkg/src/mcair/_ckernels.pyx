# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled equivocation kernels; semantics mirror ``_pykernels``."""
import numpy as np
cimport numpy as cnp
from libc.math cimport erfc, log, sqrt

cnp.import_array()

cdef double INV_SQRT2 = 0.7071067811865475244
cdef double INV_LN2 = 1.4426950408889634074
cdef Py_ssize_t BLOCK = 64


cdef inline void _tails(double z, double* p0, double* p1) noexcept nogil:
    cdef double t
    # erfc underflows to zero beyond |z| = 39, so skip the call there
    if z > 39.0:
        p0[0] = 1.0
        p1[0] = 0.0
    elif z < -39.0:
        p0[0] = 0.0
        p1[0] = 1.0
    elif z >= 0.0:
        t = 0.5 * erfc(z * INV_SQRT2)
        p1[0] = t
        p0[0] = 1.0 - t
    else:
        t = 0.5 * erfc(-z * INV_SQRT2)
        p0[0] = t
        p1[0] = 1.0 - t


cdef inline double _xlogx(double c) noexcept nogil:
    if c <= 0.0:
        return 0.0
    return c * log(c)


cdef inline double _pair_entropy(double a, double b) noexcept nogil:
    # a log2((a + b) / a) + b log2((a + b) / b) with three logarithms
    if a <= 0.0 or b <= 0.0:
        return 0.0
    return (_xlogx(a + b) - a * log(a) - b * log(b)) * INV_LN2


cdef inline double _xlogratio(double c, double tot) noexcept nogil:
    # c * log2(tot / c), zero when c == 0
    if c <= 0.0:
        return 0.0
    return c * log(tot / c) * INV_LN2


cdef double _pairwise(double* x, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, half
    cdef double s
    if n <= BLOCK:
        s = 0.0
        for i in range(n):
            s += x[i]
        return s
    half = n // 2
    return _pairwise(x, half) + _pairwise(x + half, n - half)


def equivocation(const double[::1] mean0, const double[::1] std0,
                 const double[::1] mean1, const double[::1] std1,
                 const double[::1] w, const double[::1] r,
                 taus, bint aware):
    """Conditional entropy of the current symbol, one value per threshold.

    ``w[h]`` is the probability of history h and ``r[h]`` = P(s = 1 | h).
    Aware: H(S | history, S_hat). Unaware: H(S | S_hat).
    """
    cdef double[::1] tv = np.ascontiguousarray(taus, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t nh = mean0.shape[0], nt = tv.shape[0]
    cdef Py_ssize_t k, h
    cdef double tau, z, a1, b1, a0, b0, pr, wr, tot
    cdef double acc00, acc01, acc10, acc11, hs
    out = np.empty(nt, dtype=np.float64)
    cdef double[::1] ov = out
    buf = np.empty(nh, dtype=np.float64)
    cdef double[::1] bv = buf
    cdef double[::1] b00, b01, b10, b11
    if not aware:
        b00 = np.empty(nh); b01 = np.empty(nh); b10 = np.empty(nh); b11 = np.empty(nh)
    with nogil:
        for k in range(nt):
            tau = tv[k]
            for h in range(nh):
                wr = w[h]
                if wr == 0.0:
                    if aware:
                        bv[h] = 0.0
                    else:
                        b00[h] = 0.0; b01[h] = 0.0; b10[h] = 0.0; b11[h] = 0.0
                    continue
                # P(s_hat = 1 | h, s) and its complement; the smaller tail is
                # evaluated directly, the larger one by complement
                z = (tau - mean0[h]) / std0[h]
                _tails(z, &a0, &a1)
                z = (tau - mean1[h]) / std1[h]
                _tails(z, &b0, &b1)
                pr = r[h]
                # joint weights c_{s, s_hat}
                a0 = wr * (1.0 - pr) * a0
                a1 = wr * (1.0 - pr) * a1
                b0 = wr * pr * b0
                b1 = wr * pr * b1
                if aware:
                    bv[h] = _pair_entropy(a0, b0) + _pair_entropy(a1, b1)
                else:
                    b00[h] = a0
                    b01[h] = a1
                    b10[h] = b0
                    b11[h] = b1
            if aware:
                ov[k] = _pairwise(&bv[0], nh)
            else:
                acc00 = _pairwise(&b00[0], nh)
                acc01 = _pairwise(&b01[0], nh)
                acc10 = _pairwise(&b10[0], nh)
                acc11 = _pairwise(&b11[0], nh)
                tot = acc00 + acc10
                hs = _xlogratio(acc00, tot) + _xlogratio(acc10, tot)
                tot = acc01 + acc11
                ov[k] = hs + _xlogratio(acc01, tot) + _xlogratio(acc11, tot)
    return out
