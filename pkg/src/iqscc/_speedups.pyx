# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled special-function kernels.

Same algorithms and signatures as :mod:`iqscc._kernels`.
"""
from libc.math cimport exp, log, sqrt, ceil, lgamma, fabs, pow
from libc.stdlib cimport malloc, free

cdef double BIG = 1e250
MAX_ARG = 700.0


def bessel_i(n, double x):
    cdef long nn = abs(int(n))
    cdef double half, q, term, total, val
    cdef long m = 0
    if fabs(x) > 700.0:
        raise OverflowError("bessel_i argument %g exceeds %g" % (x, 700.0))
    if x == 0.0:
        return 1.0 if nn == 0 else 0.0
    half = 0.5 * fabs(x)
    q = half * half
    term = 1.0
    total = 1.0
    while True:
        m += 1
        term *= q / (m * (m + nn))
        total += term
        if term < 1e-17 * total:
            break
    val = exp(nn * log(half) - lgamma(nn + 1.0) + log(total))
    if x < 0.0 and nn % 2 == 1:
        val = -val
    return val


cdef int _sequence(double x, long kmax, double* vals) nogil:
    cdef long start = kmax + <long>(10.0 * sqrt(x)) + 40
    cdef long k, j
    cdef double i_next = 0.0, i_cur = 1e-30, i_prev, total
    total = 2.0 * i_cur
    for j in range(kmax + 1):
        vals[j] = 0.0
    k = start
    while k > 0:
        i_prev = i_next + (2.0 * k / x) * i_cur
        i_next = i_cur
        i_cur = i_prev
        if k - 1 <= kmax:
            vals[k - 1] = i_cur
        if k == 1:
            total += i_cur
        else:
            total += 2.0 * i_cur
        if i_cur > BIG:
            i_cur /= BIG
            i_next /= BIG
            total /= BIG
            j = k - 1
            while j <= kmax:
                vals[j] /= BIG
                j += 1
        k -= 1
    for j in range(kmax + 1):
        vals[j] /= total
    return 0


def scaled_bessel_sequence(double x, long kmax):
    cdef double* vals = <double*>malloc((kmax + 1) * sizeof(double))
    if vals == NULL:
        raise MemoryError()
    try:
        _sequence(x, kmax, vals)
        return [vals[j] for j in range(kmax + 1)]
    finally:
        free(vals)


cdef double _gamma_upper_regularized(long m, double h) nogil:
    cdef double term = exp(-h), total
    cdef long k
    total = term
    for k in range(1, m):
        term *= h / k
        total += term
    return total if total < 1.0 else 1.0


def marcum_q(long m, double a, double b, double rtol=1e-10):
    cdef double pref, x, r, rk, term, total, out
    cdef long nterms, k
    cdef double* seq
    if m < 1:
        raise ValueError("marcum_q order must be >= 1")
    if a < 0.0 or b < 0.0:
        raise ValueError("marcum_q arguments must be nonnegative")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return _gamma_upper_regularized(m, 0.5 * b * b)
    pref = exp(-0.5 * (a - b) * (a - b))
    if pref == 0.0:
        return 1.0 if a > b else 0.0
    x = a * b
    nterms = m + <long>ceil(sqrt(2.0 * x * log(1.0 / rtol))) + 20
    seq = <double*>malloc((nterms + 1) * sizeof(double))
    if seq == NULL:
        raise MemoryError()
    try:
        _sequence(x, nterms, seq)
        total = 0.0
        if b >= a:
            r = a / b
            for k in range(1 - m, 0):
                total += pow(r, k) * seq[-k]
            rk = 1.0
            for k in range(0, nterms + 1):
                term = rk * seq[k]
                total += term
                if k > m and term < 1e-3 * rtol * total:
                    break
                rk *= r
            out = pref * total
        else:
            r = b / a
            rk = pow(r, m)
            for k in range(m, nterms + 1):
                term = rk * seq[k]
                total += term
                if term < 1e-3 * rtol * (total if total > 1e-300 else 1e-300):
                    break
                rk *= r
            out = 1.0 - pref * total
    finally:
        free(seq)
    if out < 0.0:
        return 0.0
    if out > 1.0:
        return 1.0
    return out
