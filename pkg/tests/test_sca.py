import math

import numpy as np
import pytest

from iqscc import sca
from iqscc.beamforming import TransmitDesign, sinr_dl
from iqscc.detection import DetectionSpec, required_sinr
from iqscc.numerics import db_to_lin
from iqscc.scenario import Interferer, Scenario, build_channels, steering_rx, steering_tx
from iqscc.validation import check_tangency, random_design, random_scenario


def _psd(rng, n, tr=1.0):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    V = G @ G.conj().T
    return V * tr / np.trace(V).real


def _whitened(rng):
    s = random_scenario(rng)
    return s, sca.whiten(build_channels(s), s.noise_power)


# ---- linearizations -----------------------------------------------------

def test_dl_bound_tangent_and_below(rng):
    g = rng.standard_normal(6) + 1j * rng.standard_normal(6)
    for _ in range(100):
        Vs, Vc, Vp = _psd(rng, 6), _psd(rng, 6), _psd(rng, 6, rng.uniform(0.1, 2))
        true = math.log2(1 + sinr_dl(TransmitDesign(Vs, Vc, 0.0), _G(g), 1.0))
        assert sca.dl_rate_lower_bound(Vs, Vc, Vp, g, 1.0) <= true + 1e-12
        assert sca.dl_rate_lower_bound(Vs, Vc, Vs, g, 1.0) == pytest.approx(true, rel=1e-12)
    Z = np.zeros((6, 6))
    Vc = _psd(rng, 6)
    assert sca.dl_rate_lower_bound(Z, Vc, Z, g, 1.0) == pytest.approx(
        math.log2(1 + np.vdot(g, Vc @ g).real))


class _G:
    def __init__(self, g):
        self.g = g


def test_radar_lhs_tangent_and_below(rng):
    s, ch = _whitened(rng)
    d = random_design(rng, s)
    st = sca._make_state(0, d.V_s, d.V_c, d.p, ch)
    lhs, rhs = sca.radar_constraint_terms(st, ch, s.target_angle, 2.0, ch.beta0 ** 2, "iqscc")
    a_r = steering_rx(s.target_angle, s.n_rx)

    def exact(p, Vt):
        from iqscc.scenario import assemble_psi
        psi = assemble_psi(p, Vt, ch, 1.0)
        return np.vdot(a_r, np.linalg.solve(psi, a_r)).real

    assert lhs.value(d.p, d.V_t) == pytest.approx(exact(d.p, d.V_t), rel=1e-10)
    for _ in range(30):
        d2 = random_design(rng, s)
        assert lhs.value(d2.p, d2.V_t) <= exact(d2.p, d2.V_t) * (1 + 1e-10)
    a_t = steering_tx(s.target_angle, s.n_tx)
    c = 0.3
    V = c * np.outer(a_t, a_t.conj())
    assert rhs.value(V, np.zeros_like(V)) == pytest.approx(2.0 / (ch.beta0 ** 2 * c))
    assert rhs.value(np.zeros_like(V), V) == math.inf
    conv = sca.RadarRHS(rhs.kappa, a_t, "conventional")
    assert conv.value(np.zeros_like(V), V) == pytest.approx(2.0 / (ch.beta0 ** 2 * c))


def test_ul_terms(rng):
    s, ch = _whitened(rng)
    d = random_design(rng, s)
    st = sca._make_state(0, d.V_s, d.V_c, d.p, ch)
    quot, ub = sca.ul_constraint_terms(st, ch)
    # constraint 1 tight at the expansion point with x at its tight value
    assert sca.ULQuotient.lhs(st.x, d.p) == pytest.approx(quot.rhs(d.V_t), rel=1e-10)
    assert ub.value(ub.x0) == pytest.approx(ub.x0 ** 2)
    for x in np.linspace(0, 3 * ub.x0 + 1, 50):
        assert ub.value(x) <= x * x + 1e-12
    assert sca.ULQuotient.lhs(0.0, 0.0) == 0.0
    assert sca.ULQuotient.lhs(1.0, 0.0) == math.inf


def test_ul_floor_moves_tangent_point(rng):
    s, ch = _whitened(rng)
    d = random_design(rng, s)
    st = sca._make_state(0, d.V_s, d.V_c, 0.0, ch)
    assert st.x == 0.0
    _, ub = sca.ul_constraint_terms(st, ch, p_floor=1e-9)
    assert ub.x0 > 0.0


def test_tangency_check_passes(rng):
    assert check_tangency(rng, n_points=5).passed


# ---- rank-one extraction ----------------------------------------------

def test_extract_rank1_exact(rng):
    v = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    w, gap = sca.extract_rank1(np.outer(v, v.conj()))
    assert gap == pytest.approx(0.0, abs=1e-12)
    phase = np.vdot(w, v) / abs(np.vdot(w, v))
    assert np.allclose(w * phase, v, atol=1e-10)


def test_extract_rank1_identity():
    _, gap = sca.extract_rank1(np.eye(2))
    assert gap == pytest.approx(0.5)


def test_extract_rank1_residual(rng):
    V = _psd(rng, 5, 3.0)
    w, gap = sca.extract_rank1(V)
    lam = np.sort(np.linalg.eigvalsh(V))
    assert np.linalg.norm(V - np.outer(w, w.conj())) == pytest.approx(
        np.sqrt(np.sum(lam[:-1] ** 2)), rel=1e-9)
    assert gap == pytest.approx(1 - lam[-1] / 3.0, rel=1e-9)


# ---- full runs --------------------------------------------------------

def _spec(cfg, mode, **kw):
    ch = build_channels(cfg.scenario)
    return sca.ProblemSpec(cfg.scenario, ch, cfg.radar[mode].rho_s(), mode, **kw)


@pytest.fixture(scope="module")
def campaign_runs(campaign):
    return {m: sca.run_sca(_spec(campaign, m)) for m in ("conventional", "iqscc")}


@pytest.mark.parametrize("mode", ["conventional", "iqscc"])
def test_campaign_ascent_and_feasibility(campaign, campaign_runs, mode):
    design, trace = campaign_runs[mode]
    s = campaign.scenario
    assert trace.converged
    rates = [trace.initial_sum_rate] + trace.sum_rates()
    assert all(b >= a - 1e-6 for a, b in zip(rates, rates[1:]))
    sur = [r.surrogate for r in trace.rows]
    assert all(b >= a - 1e-6 for a, b in zip(sur, sur[1:]))
    ch = build_channels(s)
    rho = campaign.radar[mode].rho_s()
    assert sca.radar_sinr(design, ch, s.noise_power, mode) >= rho * (1 - 1e-6)
    design.validate(s.bs_power_max, s.ul_power_max)
    assert np.trace(design.V_t).real <= s.bs_power_max + 1e-9
    assert all(r.radar_feasible and r.budget_ok for r in trace.rows)


def test_campaign_ordering(campaign_runs):
    assert campaign_runs["iqscc"][1].rows[-1].sum_rate >= \
        campaign_runs["conventional"][1].rows[-1].sum_rate


def test_deterministic(campaign, campaign_runs):
    d, tr = sca.run_sca(_spec(campaign, "iqscc"))
    d0, tr0 = campaign_runs["iqscc"]
    assert tr.rows == tr0.rows
    assert np.array_equal(d.V_s, d0.V_s) and np.array_equal(d.V_c, d0.V_c)


def test_looser_threshold_not_worse(campaign):
    ch = build_channels(campaign.scenario)
    out = []
    for rho_db in (-3.5, 2.9):
        spec = sca.ProblemSpec(campaign.scenario, ch, db_to_lin(rho_db), "conventional")
        out.append(sca.run_sca(spec)[1].rows[-1].sum_rate)
    assert out[0] >= out[1] - 1e-6


def test_warm_start(campaign, campaign_runs):
    d0, _ = campaign_runs["iqscc"]
    d, tr = sca.run_sca(_spec(campaign, "iqscc"), init=d0)
    assert tr.converged and len(tr) <= 3


def test_infeasible_threshold(campaign):
    ch = build_channels(campaign.scenario)
    # at most |beta0|^2 P_b / sigma^2 = 3 dB is reachable
    spec = sca.ProblemSpec(campaign.scenario, ch, db_to_lin(6.0), "conventional")
    with pytest.raises(sca.InfeasibleError) as err:
        sca.run_sca(spec)
    assert err.value.trace is not None and err.value.trace.status == "infeasible"


def test_iteration_cap_reported(campaign):
    design, trace = sca.run_sca(_spec(campaign, "iqscc", max_iters=1))
    assert trace.status == "max_iters" and len(trace) == 1


def test_no_uplink():
    s = Scenario(n_tx=8, n_rx=8, bs_power_max=1.0, ul_power_max=0.0, noise_power=5e-12)
    spec = sca.ProblemSpec(s, build_channels(s), db_to_lin(-3.5), "iqscc")
    d, tr = sca.run_sca(spec)
    assert d.p == 0.0 and tr.converged


@pytest.mark.parametrize("mode", ["conventional", "iqscc"])
def test_matched_beam_limit(mode):
    s = Scenario(n_tx=16, n_rx=16, bs_power_max=1.0, ul_power_max=0.0, noise_power=5e-12,
                 interferers=(), si_power=0.0)
    ch = build_channels(s)
    _, tr = sca.run_sca(sca.ProblemSpec(s, ch, 1e-9, mode))
    ref = math.log2(1 + s.bs_power_max * np.linalg.norm(ch.g) ** 2 / s.noise_power)
    assert abs(tr.rows[-1].sum_rate - ref) <= 1e-3


def _toy_grid_best(s, ch, rho, n_theta=13, n_phi=16, n_split=21):
    th = np.linspace(0, np.pi / 2, n_theta)
    ph = np.linspace(0, 2 * np.pi, n_phi, endpoint=False)
    T, P = np.meshgrid(th, ph, indexing="ij")
    dirs = np.stack([np.cos(T).ravel(), (np.sin(T) * np.exp(1j * P)).ravel()], axis=1)
    splits = np.linspace(0, 1, n_split)
    a_t = steering_tx(s.target_angle, 2)
    a_r = steering_rx(s.target_angle, 2)
    g = ch.g
    gv = np.abs(dirs.conj() @ g) ** 2            # |g^H v|^2
    av = np.abs(dirs.conj() @ a_t) ** 2
    outer = dirs[:, :, None] * dirs[:, None, :].conj()
    best = -np.inf
    B = ch.B
    for ps in splits:
        pc = 1.0 - ps
        Vt = pc * outer[:, None] + ps * outer[None, :]          # (v, w, 2, 2)
        psi = np.einsum("ij,vwjk,lk->vwil", B, Vt, B.conj()) + np.eye(2)
        gain = np.einsum("i,vwij,j->vw", a_r.conj(), np.linalg.inv(psi), a_r).real
        radar = ch.beta0 ** 2 * ps * av[None, :] * gain
        dl = pc * gv[:, None] / (ps * gv[None, :] + 1.0)
        rate = np.where(radar >= rho, np.log2(1 + dl), -np.inf)
        best = max(best, rate.max())
    return best


def test_toy_instance_beats_grid():
    s = Scenario(n_tx=2, n_rx=2, bs_power_max=1.0, ul_power_max=0.0, noise_power=1.0,
                 target_reflectivity=0.5, interferers=(Interferer(40.0, 0.5),),
                 si_power=0.1, dl_pathloss=5.0, rng_seed=3)
    ch = build_channels(s)
    rho = 0.15
    _, tr = sca.run_sca(sca.ProblemSpec(s, ch, rho, "iqscc"))
    grid = _toy_grid_best(s, ch, rho)
    assert np.isfinite(grid)
    assert tr.rows[-1].sum_rate >= grid - 1e-3


def test_problem_spec_validation(campaign):
    ch = build_channels(campaign.scenario)
    with pytest.raises(ValueError):
        sca.ProblemSpec(campaign.scenario, ch, 0.0)
    with pytest.raises(ValueError):
        sca.ProblemSpec(campaign.scenario, ch, 1.0, mode="radar")


def test_derive_rho_s():
    spec = DetectionSpec(2.7e-3, 1e-6, protocol="CS")
    assert sca.derive_rho_s(spec) == required_sinr("CS", 2.7e-3, 1e-6, 1, spec.n_n, spec.eta)
