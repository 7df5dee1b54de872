import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from iqscc import detection as det
from iqscc.numerics import lin_to_db

N_N = det.thermal_photons(24e9, 293.0)


def test_thermal_photons_reference():
    assert N_N == pytest.approx(253.88, abs=0.01)
    assert det.thermal_photons(24e9, 0.0) == 0.0
    assert det.thermal_photons(1e15, 3.0) == 0.0


def test_thermal_rayleigh_jeans_limit():
    f, T = 1e6, 300.0
    kT_hf = det.BOLTZMANN * T / (det.PLANCK * f)
    assert det.thermal_photons(f, T) == pytest.approx(kT_hf - 0.5, rel=1e-9)


def test_thermal_monotone_in_frequency():
    vals = [det.thermal_photons(f, 293.0) for f in np.logspace(8, 13, 30)]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_effective_bandwidth():
    assert det.effective_bandwidth(5e-12, N_N, 24e9) == pytest.approx(1.2385e9, rel=1e-3)
    with pytest.raises(ValueError):
        det.effective_bandwidth(0.0, 1.0, 1.0)


def test_roc_reference_point():
    # 10 dB CW at Pf = 1e-4, K = 1
    p = det.cw_params(10.0, 1)
    assert p.A2 == pytest.approx(math.sqrt(20.0))
    assert det.roc_pd(p, 1e-4) == pytest.approx(0.77431, abs=1e-5)


def test_roc_trivial_cases():
    assert det.roc_pd(det.RadarProtocolParams(1.0, 0.0), 1e-3) == pytest.approx(1e-3, rel=1e-12)
    for pf in (1e-1, 1e-4):
        assert det.roc_pd(det.cw_params(0.3, 4), pf) >= pf


def test_cw_matches_kay_doubled():
    for g in (0.1, 1.0, 10.0):
        for K in (1, 16):
            assert det.roc_pd(det.cw_params(g, K), 1e-5) == pytest.approx(
                det.kay_pd(2 * g, K, 1e-5), abs=1e-15)


def test_marcum_reference_against_scipy():
    for g in (0.5, 3.0, 20.0):
        pf = 1e-4
        ref = stats.ncx2.sf(-2 * math.log(pf), 2, 2 * g)
        assert det.marcum_pd(g, pf) == pytest.approx(ref, rel=1e-8)


@given(st.floats(1e-4, 1e3), st.floats(1e-2, 1e4), st.integers(1, 64))
@settings(max_examples=100, deadline=None)
def test_cs_to_cw_ratio(gamma, n_n, K):
    ratio = det.cs_params(gamma, n_n, K).A2 / det.cw_params(gamma, K).A2
    assert ratio == pytest.approx(math.sqrt(2 * n_n / (2 * n_n + 1)), rel=1e-12)


def test_qi_reference_point():
    p = det.qi_params(0.4467, 253.9, 1e-11, 1)
    assert p.A1 == pytest.approx(1.37537, rel=1e-4)
    assert p.A2 == pytest.approx(0.5660, rel=1e-3)


def test_qi_domain():
    with pytest.raises(ValueError):
        det.qi_params(0.0, 10.0, 0.1)
    with pytest.raises(ValueError):
        det.qi_params(0.1, 10.0, 1.0)
    with pytest.raises(ValueError):
        det.qi_params_from_photons(0.0, 0.1, 10.0)


def test_tmsv_covariance():
    c = det.TMSVCovariance(0.7)
    assert c.is_physical()
    M = c.matrix()
    assert np.allclose(M, M.T)
    # symplectic eigenvalues of a pure state are 1: det = 1
    assert np.linalg.det(M) == pytest.approx(1.0, rel=1e-10)


def test_oracle_vacuum_and_closed_form_moments():
    # no signal photons: correlator is pure noise with variance 4 (N_n + 1)
    m = det.qi_moment_oracle(0.0, 0.3, 5.0)
    assert m.mean_h1 == 0.0
    assert m.var_h1 == pytest.approx(4 * 6.0)
    n_q, eta, n_n = 0.3, 0.1, 5.0
    m = det.qi_moment_oracle(n_q, eta, n_n)
    assert m.mean_h1 == pytest.approx(4 * math.sqrt(eta * n_q * (n_q + 1)), rel=1e-12)
    assert m.var_h1 == pytest.approx(
        4 * (n_q * (4 * eta * n_q + 3 * eta + 2 * n_n + 1) + n_n + 1), rel=1e-12)
    assert m.mean_h0 == 0.0


def test_qi_closed_form_equals_oracle(rng):
    for _ in range(20):
        n_q = 10 ** rng.uniform(-3, 1)
        eta = 10 ** rng.uniform(-3, -0.1)
        n_n = 10 ** rng.uniform(-1, 3)
        K = int(rng.integers(1, 20))
        ref = det.qi_params_from_moments(det.qi_moment_oracle(n_q, eta, n_n), K)
        got = det.qi_params_from_photons(n_q, eta, n_n, K)
        assert got.A1 == pytest.approx(ref.A1, rel=1e-9)
        assert got.A2 == pytest.approx(ref.A2, rel=1e-9)


def test_generic_sigma_ratio_is_reciprocal_of_closed_form(rng):
    # The generic definition sigma_0 / sigma_1 is the reciprocal of the
    # closed-form A1; this pins down the mapping the closed forms use.
    n_q, eta, n_n = 0.5, 0.2, 10.0
    m = det.qi_moment_oracle(n_q, eta, n_n)
    generic_a1 = math.sqrt(m.var_h0 / m.var_h1)
    closed = det.qi_params_from_photons(n_q, eta, n_n)
    assert generic_a1 == pytest.approx(1.0 / closed.A1, rel=1e-12)
    assert abs(generic_a1 - closed.A1) > 1e-3


def test_required_sinr_reference_points():
    cs = lin_to_db(det.required_sinr("CS", 2.7e-3, 1e-6, 1, N_N))
    cw = lin_to_db(det.required_sinr("CW", 2.7e-3, 1e-6, 1))
    assert cs == pytest.approx(2.893, abs=2e-3)
    assert cw == pytest.approx(2.885, abs=2e-3)
    # CW at Pd = 0.774, Pf = 1e-4 needs 10 dB
    assert lin_to_db(det.required_sinr("CW", 0.77431, 1e-4)) == pytest.approx(10.0, abs=1e-3)


def test_required_sinr_inverts_roc():
    for proto in ("CW", "CS"):
        g = det.required_sinr(proto, 0.9, 1e-3, 4, N_N)
        pd = det.roc_pd(det.protocol_params(proto, g, 4, N_N), 1e-3)
        assert pd >= 0.9
        pd_lo = det.roc_pd(det.protocol_params(proto, g * 10 ** (-2e-4 / 10), 4, N_N), 1e-3)
        assert pd_lo < 0.9


def test_required_sinr_trivial_and_failures():
    assert det.required_sinr("CW", 1e-3, 1e-3) == 0.0
    with pytest.raises(det.NonMonotoneError):
        det.required_sinr("QI", 2.7e-3, 1e-6, 1, N_N, 1e-11)
    with pytest.raises(det.UnattainableError):
        # with almost no thermal photons the CS SNR gain vanishes across the bracket
        det.required_sinr("CS", 0.5, 1e-6, 1, 1e-12)
    with pytest.raises(ValueError):
        det.required_sinr("CW", 0.5, 0.0)


def test_required_sinr_monotone_in_pd():
    pds = np.linspace(0.01, 0.95, 15)
    vals = [det.required_sinr("CS", p, 1e-6, 1, N_N) for p in pds]
    assert all(b >= a for a, b in zip(vals, vals[1:]))


def test_mc_validate_null_and_seed():
    p = det.RadarProtocolParams(1.0, 0.0)
    r = det.mc_validate(p, 1e-2, 1, 200_000, np.random.default_rng(1))
    assert abs(r.pd_hat - 1e-2) <= 4 * det.binomial_sigma(1e-2, 200_000)
    a = det.mc_validate(det.cw_params(1.0, 4), 1e-2, 4, 10_000, np.random.default_rng(9))
    b = det.mc_validate(det.cw_params(1.0, 4), 1e-2, 4, 10_000, np.random.default_rng(9))
    assert a == b


def test_mc_validate_matches_roc():
    p = det.cw_params(1.0, 16)
    r = det.mc_validate(p, 1e-2, 16, 200_000, np.random.default_rng(2))
    pd = det.roc_pd(p, 1e-2)
    assert abs(r.pd_hat - pd) <= 4 * det.binomial_sigma(pd, 200_000)
    assert abs(r.pf_hat - 1e-2) <= 4 * det.binomial_sigma(1e-2, 200_000)


def test_detection_spec():
    spec = det.DetectionSpec(2.7e-3, 1e-6)
    assert spec.n_n == pytest.approx(N_N)
    with pytest.raises(ValueError):
        det.DetectionSpec(0.0, 1e-6)
    with pytest.raises(ValueError):
        det.DetectionSpec(0.5, 1e-6, K=0)
    with pytest.raises(ValueError):
        det.DetectionSpec(0.5, 1e-6, protocol="XX")
