"""Pure-Python special-function kernels.

This module is the fallback for :mod:`iqscc._speedups`; both expose the same
three functions and use the same algorithms, so results agree to rounding.

bessel_i
    Modified Bessel function of the first kind by direct power series.
scaled_bessel_sequence
    ``exp(-x) I_k(x)`` for ``k = 0..kmax`` by Miller's backward recurrence.
marcum_q
    Generalized Marcum Q-function from a Bessel-term series.
"""
import math

MAX_ARG = 700.0
_BIG = 1e250


def bessel_i(n, x):
    """Modified Bessel function of the first kind, integer order ``n``.

    Raises OverflowError for ``|x| > 700``.
    """
    n = abs(int(n))
    x = float(x)
    if abs(x) > MAX_ARG:
        raise OverflowError("bessel_i argument %g exceeds %g" % (x, MAX_ARG))
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    half = 0.5 * abs(x)
    q = half * half
    term = 1.0
    total = 1.0
    m = 0
    while True:
        m += 1
        term *= q / (m * (m + n))
        total += term
        if term < 1e-17 * total:
            break
    val = math.exp(n * math.log(half) - math.lgamma(n + 1.0) + math.log(total))
    if x < 0.0 and n % 2 == 1:
        val = -val
    return val


def scaled_bessel_sequence(x, kmax):
    """Return ``[exp(-x) I_k(x) for k in 0..kmax]`` for ``x > 0``.

    Downward recurrence started well above the significant orders and
    normalised with ``I_0 + 2 * sum_k I_k = exp(x)``.
    """
    x = float(x)
    kmax = int(kmax)
    start = kmax + int(10.0 * math.sqrt(x)) + 40
    vals = [0.0] * (kmax + 1)
    i_next = 0.0
    i_cur = 1e-30
    total = 2.0 * i_cur
    for k in range(start, 0, -1):
        i_prev = i_next + (2.0 * k / x) * i_cur
        i_next, i_cur = i_cur, i_prev
        if k - 1 <= kmax:
            vals[k - 1] = i_cur
        total += i_cur if k == 1 else 2.0 * i_cur
        if i_cur > _BIG:
            i_cur /= _BIG
            i_next /= _BIG
            total /= _BIG
            for j in range(k - 1, kmax + 1):
                vals[j] /= _BIG
    return [v / total for v in vals]


def _gamma_upper_regularized(m, h):
    # Q(m, h) for integer m: exp(-h) * sum_{k<m} h^k / k!
    term = math.exp(-h)
    total = term
    for k in range(1, m):
        term *= h / k
        total += term
    return min(total, 1.0)


def marcum_q(m, a, b, rtol=1e-10):
    """Generalized Marcum Q-function ``Q_m(a, b)`` for integer ``m >= 1``.

    Uses ``exp(-(a^2+b^2)/2) * sum_k (a/b)^k I_k(ab)`` when ``b >= a`` and the
    complementary series ``1 - exp(...) * sum_{k>=m} (b/a)^k I_k(ab)``
    otherwise, so the geometric factor never exceeds one.
    """
    m = int(m)
    a = float(a)
    b = float(b)
    if m < 1:
        raise ValueError("marcum_q order must be >= 1")
    if a < 0.0 or b < 0.0:
        raise ValueError("marcum_q arguments must be nonnegative")
    if b == 0.0:
        return 1.0
    if a == 0.0:
        return _gamma_upper_regularized(m, 0.5 * b * b)
    pref = math.exp(-0.5 * (a - b) ** 2)
    if pref == 0.0:
        return 1.0 if a > b else 0.0
    x = a * b
    nterms = m + int(math.ceil(math.sqrt(2.0 * x * math.log(1.0 / rtol)))) + 20
    seq = scaled_bessel_sequence(x, nterms)
    if b >= a:
        r = a / b
        total = 0.0
        # orders 1-m..-1 map to I_{|k|}
        for k in range(1 - m, 0):
            total += r ** k * seq[-k]
        rk = 1.0
        for k in range(0, nterms + 1):
            term = rk * seq[k]
            total += term
            if k > m and term < 1e-3 * rtol * total:
                break
            rk *= r
        return min(max(pref * total, 0.0), 1.0)
    r = b / a
    total = 0.0
    rk = r ** m
    for k in range(m, nterms + 1):
        term = rk * seq[k]
        total += term
        if term < 1e-3 * rtol * max(total, 1e-300):
            break
        rk *= r
    return min(max(1.0 - pref * total, 0.0), 1.0)
