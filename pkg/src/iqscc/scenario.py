"""Array geometry, channel generation and the interference/whitening matrices.

Angles are taken in degrees at the boundary and converted once here.
"""
import warnings
from dataclasses import dataclass

import numpy as np

__all__ = [
    "Interferer", "Scenario", "ChannelSet", "steering_rx", "steering_tx",
    "response_matrix", "build_channels", "DEFAULT_INTERFERERS", "assemble_psi", "assemble_phi",
    "CHANNEL_STREAM", "MC_STREAM",
]

# named sub-streams drawn from the single run seed
CHANNEL_STREAM = 0
MC_STREAM = 1


@dataclass(frozen=True)
class Interferer:
    angle: float                 # degrees
    amplitude: complex           # beta_i


DEFAULT_INTERFERERS = (
    Interferer(angle=-50.0, amplitude=10 ** (-65 / 20)),
    Interferer(angle=40.0, amplitude=10 ** (-65 / 20)),
)


@dataclass(frozen=True)
class Scenario:
    """Physical configuration. Powers in watts, gains linear, angles in degrees."""

    n_tx: int
    n_rx: int
    bs_power_max: float
    ul_power_max: float
    noise_power: float
    target_angle: float = 0.0
    target_reflectivity: float = 1e-11
    interferers: tuple = DEFAULT_INTERFERERS
    si_power: float = 10 ** -11.5
    dl_angle: float = 30.0
    dl_pathloss: float = 10 ** -9.5
    ul_angle: float = -30.0
    ul_pathloss: float = 10 ** -9.5
    rng_seed: int = 0

    def __post_init__(self):
        if self.n_tx < 1 or self.n_rx < 1:
            raise ValueError("n_tx and n_rx must be >= 1")
        for name in ("bs_power_max", "noise_power", "dl_pathloss", "ul_pathloss"):
            if not getattr(self, name) > 0:
                raise ValueError("%s must be > 0" % name)
        for name in ("ul_power_max", "si_power"):
            if not getattr(self, name) >= 0:
                raise ValueError("%s must be >= 0" % name)
        if not 0.0 < self.target_reflectivity < 1.0:
            raise ValueError("target_reflectivity must lie in (0, 1)")
        angles = [self.target_angle, self.dl_angle, self.ul_angle]
        angles += [it.angle for it in self.interferers]
        for ang in angles:
            if not -90.0 < ang < 90.0:
                raise ValueError("angle %g deg outside (-90, 90)" % ang)

    @property
    def beta0(self):
        return float(np.sqrt(self.target_reflectivity))


@dataclass(frozen=True, eq=False)
class ChannelSet:
    g: np.ndarray        # DL channel, (n_tx,)
    h: np.ndarray        # UL channel, (n_rx,)
    H_si: np.ndarray     # residual self-interference, (n_rx, n_tx)
    B: np.ndarray        # interferers + SI, (n_rx, n_tx)
    C: np.ndarray        # B + target, (n_rx, n_tx)
    beta0: float = 0.0
    theta0: float = 0.0

    @property
    def n_tx(self):
        return self.g.shape[0]

    @property
    def n_rx(self):
        return self.h.shape[0]


def _steering(theta, n):
    k = np.arange(n)
    return np.exp(1j * np.pi * k * np.sin(np.deg2rad(theta))) / np.sqrt(n)


def steering_rx(theta, n):
    """Unit-norm ULA receive steering vector at half-wavelength spacing."""
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    return _steering(theta, n)


def steering_tx(theta, n):
    """Unit-norm ULA transmit steering vector; same law as :func:`steering_rx`."""
    if n < 1:
        raise ValueError("antenna count must be >= 1")
    return _steering(theta, n)


def response_matrix(theta, n_rx, n_tx):
    """Rank-one two-way response ``a_r(theta) a_t(theta)^H``."""
    return np.outer(steering_rx(theta, n_rx), steering_tx(theta, n_tx).conj())


def build_channels(s, rng=None):
    """Generate the channel set for a scenario.

    LOS user channels are scaled steering vectors with array gain, so
    ``||g||^2 = dl_pathloss * n_tx``. The self-interference channel has
    i.i.d. CN(0, si_power / (n_rx n_tx)) entries drawn from the scenario seed.
    """
    if rng is None:
        rng = np.random.default_rng([s.rng_seed, CHANNEL_STREAM])
    for it in s.interferers:
        if it.angle == s.target_angle:
            warnings.warn("interferer at %g deg coincides with the target" % it.angle,
                          RuntimeWarning, stacklevel=2)
    g = np.sqrt(s.dl_pathloss * s.n_tx) * steering_tx(s.dl_angle, s.n_tx)
    h = np.sqrt(s.ul_pathloss * s.n_rx) * steering_rx(s.ul_angle, s.n_rx)
    shape = (s.n_rx, s.n_tx)
    std = np.sqrt(s.si_power / (2.0 * s.n_rx * s.n_tx))
    H_si = std * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    B = H_si.copy()
    for it in s.interferers:
        B = B + it.amplitude * response_matrix(it.angle, s.n_rx, s.n_tx)
    C = B + s.beta0 * response_matrix(s.target_angle, s.n_rx, s.n_tx)
    return ChannelSet(g=g, h=h, H_si=H_si, B=B, C=C, beta0=s.beta0,
                      theta0=s.target_angle)


def assemble_psi(p, V_t, ch, sigma2):
    """Radar interference-plus-noise matrix ``p h h^H + B V_t B^H + sigma2 I``."""
    B = ch.B
    psi = p * np.outer(ch.h, ch.h.conj()) + B @ V_t @ B.conj().T
    psi = 0.5 * (psi + psi.conj().T)
    return psi + sigma2 * np.eye(ch.n_rx)


def assemble_phi(V_t, ch, sigma2):
    """UL interference-plus-noise matrix ``C V_t C^H + sigma2 I``."""
    C = ch.C
    phi = C @ V_t @ C.conj().T
    phi = 0.5 * (phi + phi.conj().T)
    return phi + sigma2 * np.eye(ch.n_rx)
