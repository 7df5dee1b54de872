"""Special functions and Hermitian linear algebra shared by the other modules.

The Bessel and Marcum kernels come from the compiled extension
``iqscc._speedups`` when it is importable and from the pure-Python
``iqscc._kernels`` otherwise. Set ``IQSCC_PURE_PYTHON=1`` to force the
fallback. :data:`BACKEND` records which one was picked.
"""
import math
import os
from statistics import NormalDist

import numpy as np
from scipy.linalg import solve_triangular

if os.environ.get("IQSCC_PURE_PYTHON"):
    from . import _kernels as _kern
    BACKEND = "python"
else:
    try:
        from . import _speedups as _kern
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        from . import _kernels as _kern
        BACKEND = "python"

__all__ = [
    "BACKEND", "NotPositiveDefiniteError", "standard_normal_q",
    "standard_normal_q_inv", "marcum_q", "bessel_i", "hermitian_solve",
    "principal_eigenpair", "check_hermitian", "db_to_lin", "lin_to_db",
]

_SQRT2 = math.sqrt(2.0)
_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
_NORMAL = NormalDist()


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Raised when a Cholesky factorization of a model matrix fails."""


def db_to_lin(db):
    return 10.0 ** (db / 10.0)


def lin_to_db(lin):
    with np.errstate(divide="ignore"):
        return 10.0 * np.log10(lin)


def standard_normal_q(x):
    """Tail probability P(Z > x) of a standard normal variable."""
    return 0.5 * math.erfc(x / _SQRT2)


def standard_normal_q_inv(p):
    """Inverse of :func:`standard_normal_q`.

    Starts from the stdlib inverse CDF (accurate in both tails when fed the
    smaller tail) and applies one Newton step against ``erfc``.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("standard_normal_q_inv needs 0 < p < 1, got %r" % (p,))
    x = -_NORMAL.inv_cdf(p) if p < 0.5 else _NORMAL.inv_cdf(1.0 - p)
    pdf = _INV_SQRT_2PI * math.exp(-0.5 * x * x)
    if pdf > 0.0:
        x += (standard_normal_q(x) - p) / pdf
    return x


def bessel_i(order, x):
    """Modified Bessel function of the first kind for integer ``order``."""
    if order < 0:
        raise ValueError("order must be nonnegative")
    return _kern.bessel_i(int(order), float(x))


def marcum_q(order, a, b):
    """Generalized Marcum Q-function ``Q_order(a, b)``."""
    if order < 1 or int(order) != order:
        raise ValueError("marcum_q order must be a positive integer")
    return _kern.marcum_q(int(order), float(a), float(b), 1e-10)


def check_hermitian(M, psd=False, atol=1e-12):
    """Validate a Hermitian (optionally PSD) matrix, returning it as an array."""
    M = np.asarray(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ValueError("expected a square matrix, got shape %s" % (M.shape,))
    scale = max(1.0, float(np.max(np.abs(M)))) if M.size else 1.0
    if not np.allclose(M, M.conj().T, rtol=0.0, atol=atol * scale):
        raise ValueError("matrix is not Hermitian")
    if psd:
        w = np.linalg.eigvalsh(M)
        if w.size and w[0] < -1e-9 * max(abs(w[-1]), 1e-300):
            raise ValueError("matrix is not positive semidefinite (min eig %g)" % w[0])
    return M


def hermitian_solve(M, b):
    """Solve ``M x = b`` for Hermitian positive-definite ``M``.

    Cholesky without pivoting; every model matrix carries ``sigma^2 I`` so the
    diagonal is well away from zero.
    """
    M = np.asarray(M, dtype=complex)
    try:
        L = np.linalg.cholesky(M)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from None
    y = solve_triangular(L, np.asarray(b, dtype=complex), lower=True)
    return solve_triangular(L.conj().T, y, lower=False)


def principal_eigenpair(M):
    """Largest eigenvalue and its unit eigenvector of a Hermitian matrix.

    The eigenvector phase is fixed so its largest-magnitude entry is real and
    positive, which makes the output deterministic.
    """
    w, V = np.linalg.eigh(np.asarray(M))
    lam = float(w[-1])
    v = V[:, -1]
    k = int(np.argmax(np.abs(v)))
    if abs(v[k]) > 0:
        v = v * (abs(v[k]) / v[k])
        v[k] = abs(v[k])
    return lam, v
