"""Radar detection theory for the CW, coherent-state and QI protocols.

Every protocol is summarised by two numbers ``(A1, A2)`` that fix its ROC,
``Pd = Q(A1 Q^{-1}(Pf) - A2)``, where the test statistic is a K-sample mean
that is Gaussian under both hypotheses.
"""
import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .numerics import (lin_to_db, marcum_q, standard_normal_q,
                       standard_normal_q_inv)

__all__ = [
    "PLANCK", "BOLTZMANN", "PROTOCOLS", "RadarProtocolParams", "DetectionSpec",
    "TMSVCovariance", "QIMoments", "MCResult", "NonMonotoneError",
    "UnattainableError", "roc_pd", "cw_params", "kay_pd", "marcum_pd",
    "thermal_photons", "cs_params", "qi_params", "qi_params_from_photons",
    "qi_moment_oracle", "qi_params_from_moments", "protocol_params",
    "required_sinr", "mc_validate", "effective_bandwidth",
]

PLANCK = 6.62607015e-34      # J s
BOLTZMANN = 1.380649e-23     # J / K
PROTOCOLS = ("CW", "CS", "QI")

SINR_BRACKET_DB = (-60.0, 60.0)


class NonMonotoneError(ValueError):
    """Pd is not monotone in SINR below the requested detection probability."""


class UnattainableError(ValueError):
    """The requested Pd is not reached anywhere in the SINR bracket."""


@dataclass(frozen=True)
class RadarProtocolParams:
    A1: float
    A2: float
    protocol: str = "CW"

    def __post_init__(self):
        if not self.A1 > 0:
            raise ValueError("A1 must be > 0")
        if not self.A2 >= 0:
            raise ValueError("A2 must be >= 0")


@dataclass(frozen=True)
class DetectionSpec:
    """Detection requirement that maps to a minimum radar SINR."""

    pd_min: float
    pf_max: float
    K: int = 1
    protocol: str = "CS"
    frequency: float = 24e9      # Hz
    temperature: float = 293.0   # K
    eta: float = 1e-11
    n_q: Optional[float] = None

    def __post_init__(self):
        for name in ("pd_min", "pf_max"):
            if not 0.0 < getattr(self, name) < 1.0:
                raise ValueError("%s must lie in (0, 1)" % name)
        if int(self.K) != self.K or self.K < 1:
            raise ValueError("K must be a positive integer")
        if self.protocol not in PROTOCOLS:
            raise ValueError("protocol must be one of %s" % (PROTOCOLS,))
        if not 0.0 < self.eta < 1.0:
            raise ValueError("eta must lie in (0, 1)")

    @property
    def n_n(self):
        return thermal_photons(self.frequency, self.temperature)


@dataclass(frozen=True)
class TMSVCovariance:
    """Standard-form covariance of a two-mode squeezed vacuum (shot-noise units)."""

    n_q: float

    @property
    def S(self):
        return 2.0 * self.n_q + 1.0

    @property
    def C_q(self):
        return 2.0 * math.sqrt(self.n_q * (self.n_q + 1.0))

    def matrix(self):
        S, C = self.S, self.C_q
        return np.array([[S, 0, C, 0], [0, S, 0, -C], [C, 0, S, 0], [0, -C, 0, S]],
                        dtype=float)

    def is_physical(self):
        return self.C_q ** 2 <= self.S ** 2 - 1.0 + 1e-9 * self.S ** 2


class QIMoments(NamedTuple):
    mean_h0: float
    mean_h1: float
    var_h0: float
    var_h1: float
    second_moment_h1: float


class MCResult(NamedTuple):
    pf_hat: float
    pd_hat: float
    trials: int


def roc_pd(params, pf):
    """Detection probability at false-alarm probability ``pf``."""
    return standard_normal_q(params.A1 * standard_normal_q_inv(pf) - params.A2)


def cw_params(gamma, K=1):
    """Classical continuous-wave radar: ``A1 = 1``, ``A2 = sqrt(2 gamma K)``."""
    if gamma < 0 or K < 1:
        raise ValueError("need gamma >= 0 and K >= 1")
    return RadarProtocolParams(1.0, math.sqrt(2.0 * gamma * K), "CW")


def kay_pd(gamma, K, pf):
    """Textbook coherent-detection reference with single-quadrature noise."""
    return standard_normal_q(standard_normal_q_inv(pf) - math.sqrt(K * gamma))


def marcum_pd(gamma, pf):
    """Non-coherent (envelope) detection reference via the Marcum Q-function."""
    if not 0.0 < pf < 1.0:
        raise ValueError("pf must lie in (0, 1)")
    return marcum_q(1, math.sqrt(2.0 * gamma), math.sqrt(-2.0 * math.log(pf)))


def thermal_photons(f, T):
    """Bose-Einstein mean occupation at frequency ``f`` (Hz), temperature ``T`` (K)."""
    if f <= 0 or T < 0:
        raise ValueError("need f > 0 and T >= 0")
    if T == 0:
        return 0.0
    x = PLANCK * f / (BOLTZMANN * T)
    if x > 700.0:
        return 0.0
    return 1.0 / math.expm1(x)


def effective_bandwidth(noise_power, n_n, f):
    """Bandwidth at which ``noise_power`` equals ``n_n`` thermal photons per mode."""
    if noise_power <= 0 or n_n <= 0 or f <= 0:
        raise ValueError("all arguments must be positive")
    return noise_power / (n_n * PLANCK * f)


def cs_params(gamma, n_n, K=1):
    """Coherent-state radar with homodyne detection."""
    if gamma < 0 or n_n <= 0:
        raise ValueError("need gamma >= 0 and n_n > 0")
    return RadarProtocolParams(1.0, 2.0 * math.sqrt(gamma * n_n * K / (2.0 * n_n + 1.0)), "CS")


def qi_params(gamma, n_n, eta, K=1):
    """Quantum-illumination radar with a correlation-operator receiver.

    ``gamma = eta * N_q / N_n`` links the SINR to the per-mode photon number.
    """
    if gamma <= 0:
        raise ValueError("qi_params needs gamma > 0")
    if n_n <= 0 or not 0.0 < eta < 1.0:
        raise ValueError("need n_n > 0 and 0 < eta < 1")
    tail = (eta / gamma) * (1.0 + 1.0 / n_n)
    a1 = math.sqrt(1.0 + (4.0 * gamma * n_n + 3.0 * eta) / (2.0 * n_n + 1.0 + tail))
    a2 = 2.0 * math.sqrt((gamma * n_n + eta) * K
                         / (8.0 * gamma * n_n + 7.0 * eta + 2.0 * n_n + 1.0 + tail))
    return RadarProtocolParams(a1, a2, "QI")


def qi_params_from_photons(n_q, eta, n_n, K=1):
    if n_q <= 0:
        raise ValueError("n_q must be > 0")
    return qi_params(eta * n_q / n_n, n_n, eta, K)


def _received_idler_covariance(n_q, eta, n_n, present):
    """Wigner covariance of (x_r, p_r, x_i, p_i) after the lossy thermal channel.

    The signal mode of the TMSV is mixed with a thermal bath on a beamsplitter
    of transmissivity ``eta``. Under H1 the bath is brightened to
    ``n_n / (1 - eta)`` so the received noise level matches H0.
    """
    if not present:
        eta = 0.0
    bath = n_n / (1.0 - eta)
    # ordering: x_t, p_t, x_i, p_i, x_n, p_n
    V = np.zeros((6, 6))
    V[:4, :4] = TMSVCovariance(n_q).matrix()
    V[4:, 4:] = (2.0 * bath + 1.0) * np.eye(2)
    M = np.zeros((4, 6))
    M[0, 0] = M[1, 1] = math.sqrt(eta)
    M[0, 4] = M[1, 5] = math.sqrt(1.0 - eta)
    M[2, 2] = M[3, 3] = 1.0
    return M @ V @ M.T


def _isserlis4(V, i, j, k, l):
    return V[i, j] * V[k, l] + V[i, k] * V[j, l] + V[i, l] * V[j, k]


def _correlator_moments(V):
    # symmetric (Weyl) ordered moments equal the Gaussian Wigner moments;
    # x_r p_r = sym + i and p_r x_r = sym - i (likewise for the idler) since
    # [x, p] = 2i, so the two cross terms together pick up 2 sym_r sym_i - 2.
    XR, PR, XI, PI = 0, 1, 2, 3
    mean = float(V[XR, XI] - V[PR, PI])
    second = float(_isserlis4(V, XR, XR, XI, XI) + _isserlis4(V, PR, PR, PI, PI)
                   - 2.0 * _isserlis4(V, XR, PR, XI, PI) + 2.0)
    return mean, second


def qi_moment_oracle(n_q, eta, n_n):
    """Mean and variance of the correlation observable ``x_r x_i - p_r p_i``.

    Computed from the joint Gaussian quadrature covariance by moment
    factorization plus the canonical-commutator ordering correction; no
    closed-form moment expression is used.
    """
    if n_q < 0 or n_n < 0 or not 0.0 <= eta < 1.0:
        raise ValueError("invalid photon numbers or transmissivity")
    m0, s0 = _correlator_moments(_received_idler_covariance(n_q, eta, n_n, False))
    m1, s1 = _correlator_moments(_received_idler_covariance(n_q, eta, n_n, True))
    return QIMoments(m0, m1, s0 - m0 ** 2, s1 - m1 ** 2, s1)


def qi_params_from_moments(moments, K=1):
    """Map correlator moments to ``(A1, A2)`` as the QI closed forms do.

    The closed forms correspond to ``A1 = sigma_1 / sigma_0`` and
    ``A2 = mu_1 sqrt(K) / sqrt(<c^2>_1)`` (raw second moment), which differs
    from the generic ``sigma_0 / sigma_1`` and ``mu_1 / sigma_1`` mapping.
    """
    a1 = math.sqrt(moments.var_h1 / moments.var_h0)
    a2 = moments.mean_h1 * math.sqrt(K) / math.sqrt(moments.second_moment_h1)
    return RadarProtocolParams(a1, a2, "QI")


def protocol_params(protocol, gamma, K=1, n_n=None, eta=None):
    """Dispatch to the ``(A1, A2)`` formula of a protocol tag."""
    if protocol == "CW":
        return cw_params(gamma, K)
    if protocol == "CS":
        return cs_params(gamma, n_n, K)
    if protocol == "QI":
        return qi_params(gamma, n_n, eta, K)
    raise ValueError("unknown protocol %r" % (protocol,))


def required_sinr(protocol, pd, pf, K=1, n_n=None, eta=None, tol_db=1e-4,
                  grid_points=1201):
    """Smallest linear SINR whose ROC reaches ``pd`` at false-alarm ``pf``.

    Pd is scanned on a log grid over [-60, 60] dB up to the first crossing;
    the scan must be nondecreasing there, otherwise NonMonotoneError. The
    crossing cell is then bisected to ``tol_db``. Returns 0.0 when the ROC at
    zero SINR already meets ``pd`` (A1 = 1 protocols with ``pd <= pf``).
    """
    if not 0.0 < pf < 1.0 or not 0.0 < pd < 1.0:
        raise ValueError("pd and pf must lie in (0, 1)")

    def pd_at_db(g_db):
        return roc_pd(protocol_params(protocol, 10.0 ** (g_db / 10.0), K, n_n, eta), pf)

    if protocol != "QI":
        if roc_pd(protocol_params(protocol, 0.0, K, n_n, eta), pf) >= pd * (1.0 - 1e-12):
            return 0.0
    grid = np.linspace(SINR_BRACKET_DB[0], SINR_BRACKET_DB[1], grid_points)
    prev = None
    for i, g_db in enumerate(grid):
        val = pd_at_db(g_db)
        if prev is not None and val < prev - 1e-15:
            raise NonMonotoneError(
                "%s Pd decreases with SINR near %.2f dB before reaching %g"
                % (protocol, g_db, pd))
        if val >= pd:
            if i == 0:
                return 10.0 ** (g_db / 10.0)
            lo, hi = grid[i - 1], g_db
            while hi - lo > tol_db:
                mid = 0.5 * (lo + hi)
                if pd_at_db(mid) >= pd:
                    hi = mid
                else:
                    lo = mid
            return 10.0 ** (hi / 10.0)
        prev = val
    raise UnattainableError("%s cannot reach Pd=%g at Pf=%g within %s dB"
                            % (protocol, pd, pf, SINR_BRACKET_DB))


def mc_validate(params, pf, K, trials, rng=None, chunk=100_000):
    """Monte-Carlo check of the ROC with a thresholded K-sample mean.

    Per-measurement samples are N(0, A1^2) under H0 and N(A2/sqrt(K), 1)
    under H1, which reproduces ``sigma_0 / sigma_1 = A1`` and
    ``mu_1 / sigma_1 = A2`` for the sample mean. The threshold is set
    analytically for ``pf``.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if rng is None:
        rng = np.random.default_rng()
    sigma0 = params.A1
    mu1 = params.A2 / math.sqrt(K)
    threshold = sigma0 / math.sqrt(K) * standard_normal_q_inv(pf)
    fa = det = 0
    done = 0
    while done < trials:
        n = min(chunk, trials - done)
        t0 = rng.standard_normal((n, K)).mean(axis=1) * sigma0
        t1 = mu1 + rng.standard_normal((n, K)).mean(axis=1)
        fa += int(np.count_nonzero(t0 > threshold))
        det += int(np.count_nonzero(t1 > threshold))
        done += n
    return MCResult(fa / trials, det / trials, trials)


def binomial_sigma(p, trials):
    return math.sqrt(max(p * (1.0 - p), 0.0) / trials)


def sinr_db(gamma):
    return float(lin_to_db(gamma))
