import warnings

import numpy as np
import pytest

from iqscc.scenario import (Interferer, Scenario, assemble_phi, assemble_psi, build_channels,
                            response_matrix, steering_rx, steering_tx)


def _scen(**kw):
    base = dict(n_tx=16, n_rx=16, bs_power_max=1.0, ul_power_max=0.2, noise_power=5e-12)
    base.update(kw)
    return Scenario(**base)


@pytest.mark.parametrize("theta", [-80.0, -30.0, 0.0, 12.3, 89.0])
def test_steering_unit_norm(theta):
    assert np.linalg.norm(steering_tx(theta, 16)) == pytest.approx(1.0, abs=1e-14)
    assert np.linalg.norm(steering_rx(theta, 7)) == pytest.approx(1.0, abs=1e-14)


def test_steering_broadside_is_flat():
    assert np.allclose(steering_tx(0.0, 4), 0.5)


def test_default_angles_are_orthogonal():
    # half-wavelength ULA: sin(30 deg) = 1/2 puts the user on a null of broadside
    for n in (8, 16):
        assert abs(np.vdot(steering_tx(0.0, n), steering_tx(30.0, n))) < 1e-14


def test_response_matrix_rank_one():
    A = response_matrix(20.0, 5, 3)
    assert A.shape == (5, 3)
    assert np.linalg.matrix_rank(A) == 1


def test_channel_gains():
    s = _scen()
    ch = build_channels(s)
    assert np.linalg.norm(ch.g) ** 2 == pytest.approx(s.dl_pathloss * s.n_tx, rel=1e-12)
    assert np.linalg.norm(ch.h) ** 2 == pytest.approx(s.ul_pathloss * s.n_rx, rel=1e-12)
    # whitened DL gain of the campaign is about 1012
    assert np.linalg.norm(ch.g) ** 2 / s.noise_power == pytest.approx(1011.93, rel=1e-4)


def test_no_clutter_no_si():
    s = _scen(interferers=(), si_power=0.0)
    ch = build_channels(s)
    assert not np.any(ch.B)
    assert np.allclose(ch.C, s.beta0 * response_matrix(0.0, 16, 16))


def test_si_statistics():
    s = _scen(n_tx=32, n_rx=32, interferers=(), si_power=1.0)
    ch = build_channels(s)
    # total Frobenius power matches si_power on average
    assert np.linalg.norm(ch.H_si) ** 2 == pytest.approx(1.0, rel=0.1)


def test_channels_deterministic():
    a = build_channels(_scen(rng_seed=4))
    b = build_channels(_scen(rng_seed=4))
    c = build_channels(_scen(rng_seed=5))
    assert np.array_equal(a.H_si, b.H_si)
    assert not np.array_equal(a.H_si, c.H_si)


def test_coincident_interferer_warns():
    s = _scen(interferers=(Interferer(0.0, 1e-3),))
    with pytest.warns(RuntimeWarning):
        build_channels(s)


@pytest.mark.parametrize("bad", [
    dict(n_tx=0), dict(bs_power_max=0.0), dict(noise_power=-1.0), dict(ul_power_max=-0.1),
    dict(target_reflectivity=1.5), dict(dl_angle=90.0),
    dict(interferers=(Interferer(-95.0, 1e-3),)),
])
def test_scenario_validation(bad):
    with pytest.raises(ValueError):
        _scen(**bad)


def test_model_matrices_hermitian_pd(rng):
    s = _scen(n_tx=8, n_rx=8)
    ch = build_channels(s)
    G = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
    V = G @ G.conj().T
    V /= np.trace(V).real
    for M in (assemble_psi(0.1, V, ch, s.noise_power), assemble_phi(V, ch, s.noise_power)):
        assert np.array_equal(M, M.conj().T)
        assert np.linalg.eigvalsh(M)[0] >= s.noise_power * (1 - 1e-9)
