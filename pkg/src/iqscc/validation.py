"""Property and oracle checks behind the ``validate`` command.

Each check takes the functions under test as keyword arguments, so a test
can pass a deliberately broken formula and confirm the check notices.
"""
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import eigh

from . import beamforming as bf
from . import detection as det
from . import sca
from .scenario import (Interferer, Scenario, assemble_phi, assemble_psi, build_channels,
                       steering_rx, steering_tx)

__all__ = [
    "CheckResult", "random_scenario", "random_design", "check_beamformer_optimality",
    "check_generalized_eigenvalue", "check_qi_moments", "check_cw_kay",
    "check_mc_roc", "check_tangency", "run_validation",
]


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str

    def __post_init__(self):
        object.__setattr__(self, "passed", bool(self.passed))

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def random_scenario(rng, n=8, n_interferers=2):
    """Random 8x8-style scenario with angles drawn away from the endfire."""
    angles = rng.uniform(-80.0, 80.0, size=3 + n_interferers)
    its = tuple(Interferer(float(a), complex(10 ** (-65 / 20) * np.exp(2j * np.pi * rng.uniform())))
                for a in angles[3:])
    return Scenario(n_tx=n, n_rx=n, bs_power_max=1.0, ul_power_max=0.2, noise_power=5e-12,
                    target_angle=float(angles[0]), dl_angle=float(angles[1]),
                    ul_angle=float(angles[2]), interferers=its,
                    rng_seed=int(rng.integers(2 ** 31)))


def _random_psd(rng, n, trace):
    G = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    V = G @ G.conj().T
    return V * (trace / np.real(np.trace(V)))


def random_design(rng, s):
    split = rng.uniform(0.1, 0.9)
    return bf.TransmitDesign(_random_psd(rng, s.n_tx, split * s.bs_power_max),
                             _random_psd(rng, s.n_tx, (1 - split) * s.bs_power_max),
                             float(rng.uniform(0.0, s.ul_power_max)))


def _random_vectors(rng, n, count):
    return rng.standard_normal((count, n)) + 1j * rng.standard_normal((count, n))


def check_beamformer_optimality(rng, n_scenarios=20, n_vectors=200, rtol=1e-9,
                                sinr_radar=bf.sinr_radar, sinr_radar_opt=bf.sinr_radar_opt,
                                sinr_ul=bf.sinr_ul, sinr_ul_opt=bf.sinr_ul_opt):
    """Closed-form receive beamformers beat random ones and match the optimum formula."""
    worst_gap = 0.0
    worst_rel = 0.0
    for _ in range(n_scenarios):
        s = random_scenario(rng)
        ch = build_channels(s)
        d = random_design(rng, s)
        sig = s.noise_power
        u_star = bf.opt_rx_radar(d, ch, sig, s.target_angle)
        w_star = bf.opt_rx_ul(d, ch, sig)
        r_star = sinr_radar(u_star, d, ch, sig, s.target_angle)
        q_star = sinr_ul(w_star, d, ch, sig)
        r_opt = sinr_radar_opt(d, ch, sig, s.target_angle)
        q_opt = sinr_ul_opt(d, ch, sig)
        worst_rel = max(worst_rel, abs(r_star - r_opt) / r_opt, abs(q_star - q_opt) / q_opt)
        for u in _random_vectors(rng, s.n_rx, n_vectors):
            worst_gap = max(worst_gap, sinr_radar(u, d, ch, sig, s.target_angle) / r_star - 1.0,
                            sinr_ul(u, d, ch, sig) / q_star - 1.0)
    ok = worst_rel <= rtol and worst_gap <= rtol
    return CheckResult("beamformer_optimality", ok,
                       "max rel mismatch %.3e, max random excess %.3e" % (worst_rel, worst_gap))


def check_generalized_eigenvalue(rng, n_scenarios=20, rtol=1e-8,
                                 sinr_radar_opt=bf.sinr_radar_opt, sinr_ul_opt=bf.sinr_ul_opt):
    """Optimal SINRs equal the largest generalized eigenvalue of (signal, interference)."""
    worst = 0.0
    for _ in range(n_scenarios):
        s = random_scenario(rng)
        ch = build_channels(s)
        d = random_design(rng, s)
        sig = s.noise_power
        a_r = steering_rx(s.target_angle, s.n_rx)
        a_t = steering_tx(s.target_angle, s.n_tx)
        gain = ch.beta0 ** 2 * float(np.real(np.vdot(a_t, d.V_t @ a_t)))
        pairs = (
            (gain * np.outer(a_r, a_r.conj()), assemble_psi(d.p, d.V_t, ch, sig),
             sinr_radar_opt(d, ch, sig, s.target_angle)),
            (d.p * np.outer(ch.h, ch.h.conj()), assemble_phi(d.V_t, ch, sig),
             sinr_ul_opt(d, ch, sig)),
        )
        for Mn, Md, val in pairs:
            # scale both so the pencil is well conditioned in absolute terms
            scale = 1.0 / sig
            lam = eigh(Mn * scale, Md * scale, eigvals_only=True)[-1]
            worst = max(worst, abs(val - lam) / lam)
    return CheckResult("generalized_eigenvalue", worst <= rtol, "max rel error %.3e" % worst)


def check_qi_moments(rng, n_points=50, rtol=1e-9, qi_params_from_photons=det.qi_params_from_photons):
    """Closed-form QI (A1, A2) against the Gaussian moment oracle."""
    worst = 0.0
    for _ in range(n_points):
        n_q = 10 ** rng.uniform(-4, 1)
        eta = 10 ** rng.uniform(-3, -0.05)
        n_n = 10 ** rng.uniform(-1, 3)
        K = int(rng.integers(1, 65))
        ref = det.qi_params_from_moments(det.qi_moment_oracle(n_q, eta, n_n), K)
        got = qi_params_from_photons(n_q, eta, n_n, K)
        worst = max(worst, abs(got.A1 - ref.A1) / ref.A1, abs(got.A2 - ref.A2) / ref.A2)
    return CheckResult("qi_moment_oracle", worst <= rtol, "max rel error %.3e" % worst)


def check_cw_kay(atol=1e-12, roc_pd=det.roc_pd, cw_params=det.cw_params):
    """CW ROC equals the coherent-detector ROC at doubled SINR."""
    worst = 0.0
    for g_db in np.linspace(-10.0, 10.0, 5):
        gamma = 10.0 ** (g_db / 10.0)
        for K in (1, 4, 16, 64, 256):
            for pf in (1e-2, 1e-3, 1e-4, 1e-5, 1e-6):
                a = roc_pd(cw_params(gamma, K), pf)
                b = det.kay_pd(2.0 * gamma, K, pf)
                worst = max(worst, abs(a - b))
    return CheckResult("cw_kay_equivalence", worst <= atol, "max abs error %.3e" % worst)


def check_mc_roc(rng, trials=200_000, n_sigma=4.0, roc_pd=det.roc_pd,
                 points=((-3.0, 16, 1e-2), (0.0, 16, 1e-2), (3.0, 16, 1e-3))):
    """Seeded Monte Carlo of the sample-mean detector against the analytic ROC."""
    worst = 0.0
    for g_db, K, pf in points:
        params = det.cw_params(10 ** (g_db / 10), K)
        mc = det.mc_validate(params, pf, K, trials, rng)
        pd = roc_pd(params, pf)
        sigma = max(det.binomial_sigma(pd, trials), 1.0 / trials)
        worst = max(worst, abs(mc.pd_hat - pd) / sigma)
    return CheckResult("mc_roc", worst <= n_sigma, "max deviation %.2f binomial sigma" % worst)


def check_tangency(rng, n_points=10, rtol=1e-10):
    """Every linearization equals its exact counterpart at the expansion point
    and never over-estimates it elsewhere."""
    worst = 0.0
    violations = 0
    for _ in range(n_points):
        s = random_scenario(rng)
        ch = sca.whiten(build_channels(s), s.noise_power)
        d = random_design(rng, s)
        st = sca._make_state(0, d.V_s, d.V_c, d.p, ch)
        a_r = steering_rx(s.target_angle, s.n_rx)
        exact = float(np.real(np.vdot(a_r, np.linalg.solve(st.psi, a_r))))
        lhs, _ = sca.radar_constraint_terms(st, ch, s.target_angle, 1.0, ch.beta0 ** 2, "iqscc")
        quot, ub = sca.ul_constraint_terms(st, ch)
        ul_exact = float(np.real(np.vdot(ch.h, np.linalg.solve(st.phi, ch.h))))
        dl_exact = math.log2(1.0 + bf.sinr_dl(d, ch, 1.0))
        dl_lin = sca.dl_rate_lower_bound(d.V_s, d.V_c, d.V_s, ch.g, 1.0)
        errs = (abs(lhs.value(d.p, d.V_t) - exact) / exact,
                abs(quot.rhs(d.V_t) - ul_exact) / ul_exact,
                abs(ub.value(st.x) - st.x ** 2) / max(st.x ** 2, 1e-300),
                abs(dl_lin - dl_exact) / dl_exact)
        worst = max(worst, *errs)
        d2 = random_design(rng, s)
        st2 = sca._make_state(0, d2.V_s, d2.V_c, d2.p, ch)
        exact2 = float(np.real(np.vdot(a_r, np.linalg.solve(st2.psi, a_r))))
        ul2 = float(np.real(np.vdot(ch.h, np.linalg.solve(st2.phi, ch.h))))
        tol = 1e-9
        if lhs.value(d2.p, d2.V_t) > exact2 * (1 + tol):
            violations += 1
        if quot.rhs(d2.V_t) > ul2 * (1 + tol):
            violations += 1
        if sca.dl_rate_lower_bound(d2.V_s, d2.V_c, d.V_s, ch.g, 1.0) > \
                math.log2(1.0 + bf.sinr_dl(d2, ch, 1.0)) + tol:
            violations += 1
    ok = worst <= rtol and violations == 0
    return CheckResult("tangency", ok, "max rel error %.3e, %d bound violations"
                       % (worst, violations))


def run_validation(seed=0, quick=True, overrides=None):
    """Run every check with generators derived from ``seed``.

    ``overrides`` maps a check name to extra keyword arguments, which is how
    tests inject perturbed formulas.
    """
    overrides = overrides or {}
    sizes = dict(n_scenarios=20, n_vectors=200) if quick else dict(n_scenarios=100, n_vectors=1000)
    plan = (
        ("beamformer_optimality", check_beamformer_optimality, True, sizes),
        ("generalized_eigenvalue", check_generalized_eigenvalue, True,
         {"n_scenarios": sizes["n_scenarios"]}),
        ("qi_moment_oracle", check_qi_moments, True, {}),
        ("cw_kay_equivalence", check_cw_kay, False, {}),
        ("mc_roc", check_mc_roc, True, {"trials": 200_000 if quick else 1_000_000}),
        ("tangency", check_tangency, True, {}),
    )
    results = []
    for i, (name, fn, needs_rng, kwargs) in enumerate(plan):
        kwargs = dict(kwargs, **overrides.get(name, {}))
        if needs_rng:
            results.append(fn(np.random.default_rng([seed, 100 + i]), **kwargs))
        else:
            results.append(fn(**kwargs))
    return results
