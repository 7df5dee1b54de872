"""SINR evaluation and closed-form optimal receive beamformers.

All SINR expressions are Rayleigh quotients in the receive beamformer, so the
beamformers are returned unnormalized.
"""
from dataclasses import dataclass

import numpy as np

from .numerics import check_hermitian, hermitian_solve, lin_to_db
from .scenario import assemble_phi, assemble_psi, steering_rx, steering_tx

__all__ = [
    "TransmitDesign", "sinr_dl", "opt_rx_radar", "opt_rx_ul", "sinr_radar",
    "sinr_ul", "sinr_radar_opt", "sinr_ul_opt", "beampattern_gain",
    "RADAR_MODES", "GAIN_FLOOR",
]

RADAR_MODES = ("total", "sensing_only")
GAIN_FLOOR = 1e-30   # watts; floors log of an exactly-nulled beam


@dataclass(frozen=True, eq=False)
class TransmitDesign:
    """Sensing covariance, communication covariance and UL power."""

    V_s: np.ndarray
    V_c: np.ndarray
    p: float

    @property
    def V_t(self):
        return self.V_s + self.V_c

    def validate(self, bs_power_max, ul_power_max):
        check_hermitian(self.V_s, psd=True)
        check_hermitian(self.V_c, psd=True)
        power = float(np.real(np.trace(self.V_t)))
        if power > bs_power_max + 1e-9:
            raise ValueError("BS power %g exceeds budget %g" % (power, bs_power_max))
        if not -1e-12 <= self.p <= ul_power_max + 1e-12:
            raise ValueError("UL power %g outside [0, %g]" % (self.p, ul_power_max))
        return self


def _qf(v, M):
    return float(np.real(np.vdot(v, M @ v)))


def sinr_dl(d, ch, sigma2):
    """DL SINR ``g^H V_c g / (g^H V_s g + sigma2)``."""
    return _qf(ch.g, d.V_c) / (_qf(ch.g, d.V_s) + sigma2)


def opt_rx_radar(d, ch, sigma2, theta0):
    """MVDR-type radar receive beamformer ``Psi^{-1} a_r(theta0)``."""
    psi = assemble_psi(d.p, d.V_t, ch, sigma2)
    return hermitian_solve(psi, steering_rx(theta0, ch.n_rx))


def opt_rx_ul(d, ch, sigma2):
    """UL receive beamformer ``Phi^{-1} h``."""
    return hermitian_solve(assemble_phi(d.V_t, ch, sigma2), ch.h)


def _radar_numerator(d, ch, theta0, mode):
    V = d.V_t if mode == "total" else d.V_s
    a_t = steering_tx(theta0, ch.n_tx)
    return ch.beta0 ** 2 * _qf(a_t, V)


def sinr_radar(u, d, ch, sigma2, theta0):
    """Radar SINR after receive beamformer ``u``."""
    u = np.asarray(u, dtype=complex)
    if not np.any(u):
        raise ValueError("receive beamformer must be nonzero")
    a_r = steering_rx(theta0, ch.n_rx)
    num = _radar_numerator(d, ch, theta0, "total") * abs(np.vdot(u, a_r)) ** 2
    return num / _qf(u, assemble_psi(d.p, d.V_t, ch, sigma2))


def sinr_ul(w, d, ch, sigma2):
    """UL SINR after receive beamformer ``w``."""
    w = np.asarray(w, dtype=complex)
    if not np.any(w):
        raise ValueError("receive beamformer must be nonzero")
    num = d.p * abs(np.vdot(w, ch.h)) ** 2
    return num / _qf(w, assemble_phi(d.V_t, ch, sigma2))


def sinr_radar_opt(d, ch, sigma2, theta0, mode="total"):
    """Radar SINR at the optimal receive beamformer.

    ``mode="total"`` uses the full transmit covariance in the target-echo
    factor; ``mode="sensing_only"`` keeps only the sensing covariance, the
    approximation used when the radar is a quantum-illumination receiver.
    """
    if mode not in RADAR_MODES:
        raise ValueError("mode must be one of %s" % (RADAR_MODES,))
    a_r = steering_rx(theta0, ch.n_rx)
    psi = assemble_psi(d.p, d.V_t, ch, sigma2)
    gain = float(np.real(np.vdot(a_r, hermitian_solve(psi, a_r))))
    return _radar_numerator(d, ch, theta0, mode) * gain


def sinr_ul_opt(d, ch, sigma2):
    """UL SINR at the optimal receive beamformer, ``p h^H Phi^{-1} h``."""
    phi = assemble_phi(d.V_t, ch, sigma2)
    return d.p * float(np.real(np.vdot(ch.h, hermitian_solve(phi, ch.h))))


def beampattern_gain(V, theta_grid=None):
    """Transmit beampattern ``a_t(theta)^H V a_t(theta)`` in dB over a grid.

    Returns ``(angles_deg, gain_db)``; the default grid is 721 points on
    [-90, 90] degrees.
    """
    V = np.asarray(V)
    if theta_grid is None:
        theta_grid = np.linspace(-90.0, 90.0, 721)
    angles = np.asarray(theta_grid, dtype=float)
    n = V.shape[0]
    A = np.stack([steering_tx(t, n) for t in angles], axis=1)
    gain = np.real(np.einsum("ik,ij,jk->k", A.conj(), V, A))
    return angles, lin_to_db(np.maximum(gain, GAIN_FLOOR))
