"""Sum-rate maximization by successive convex approximation.

Each iteration linearizes the nonconvex pieces of the problem at the current
point and solves the resulting convex program with an interior-point conic
solver (Clarabel through cvxpy). Every linearization is tangent to, and lies
on the conservative side of, the exact expression, so each accepted iterate
stays feasible for the true radar constraint and the true sum rate never
decreases.

All internal work is done in noise-whitened units (channels divided by
``sigma_n``), which keeps the conic problems well scaled.
"""
import math
import warnings
from dataclasses import dataclass, field

import cvxpy as cp
import numpy as np

from .beamforming import TransmitDesign, sinr_dl, sinr_radar_opt, sinr_ul_opt
from .detection import required_sinr
from .numerics import hermitian_solve, lin_to_db, principal_eigenpair
from .scenario import ChannelSet, assemble_phi, assemble_psi, steering_rx, steering_tx

__all__ = [
    "MODES", "ProblemSpec", "SCAState", "SCATrace", "TraceRow", "SCAError",
    "InfeasibleError", "SolverFailure", "RadarLHS", "RadarRHS", "ULQuotient",
    "ULBound", "whiten", "sum_rate", "radar_sinr", "dl_rate_lower_bound",
    "radar_constraint_terms", "ul_constraint_terms", "initial_state",
    "solve_subproblem", "run_sca", "extract_rank1", "derive_rho_s",
]

MODES = ("conventional", "iqscc")
_LN2 = math.log(2.0)
_RADAR_MODE = {"conventional": "total", "iqscc": "sensing_only"}

CLARABEL_SETTINGS = dict(
    tol_gap_abs=1e-9, tol_gap_rel=1e-9, tol_feas=1e-9, max_iter=300,
    reduced_tol_gap_abs=1e-6, reduced_tol_gap_rel=1e-6, reduced_tol_feas=1e-6,
)
CLARABEL_RETRIES = (
    CLARABEL_SETTINGS,
    dict(CLARABEL_SETTINGS, static_regularization_constant=1e-7),
    dict(CLARABEL_SETTINGS, max_step_fraction=0.9),
    dict(CLARABEL_SETTINGS, tol_gap_abs=1e-8, tol_gap_rel=1e-8, tol_feas=1e-8),
)


class SCAError(RuntimeError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class InfeasibleError(SCAError):
    """The radar threshold cannot be met from the available starting point."""


class SolverFailure(SCAError):
    """The conic solver did not reach the required tolerance."""


@dataclass
class ProblemSpec:
    """One optimization instance: channels, threshold and solver controls."""

    scenario: object
    channels: ChannelSet
    rho_s: float
    mode: str = "iqscc"
    tol: float = 1e-4
    max_iters: int = 50
    solver: str = "CLARABEL"

    def __post_init__(self):
        if not self.rho_s > 0:
            raise ValueError("rho_s must be > 0")
        if self.mode not in MODES:
            raise ValueError("mode must be one of %s" % (MODES,))


@dataclass
class SCAState:
    """Iterate of the ascent loop, in whitened units."""

    j: int
    V_s: np.ndarray
    V_c: np.ndarray
    p: float
    x: float
    u: float
    psi: np.ndarray
    phi: np.ndarray
    surrogate: float = float("nan")
    status: str = ""

    @property
    def V_t(self):
        return self.V_s + self.V_c

    def design(self):
        return TransmitDesign(self.V_s, self.V_c, self.p)


@dataclass
class TraceRow:
    iteration: int
    surrogate: float
    sum_rate: float
    radar_sinr_db: float
    radar_feasible: bool
    budget_ok: bool
    solver_status: str


@dataclass
class SCATrace:
    rows: list = field(default_factory=list)
    status: str = "running"
    initial_sum_rate: float = float("nan")
    initial_radar_sinr_db: float = float("nan")
    restoration_steps: int = 0

    @property
    def converged(self):
        return self.status == "converged"

    def sum_rates(self):
        return [r.sum_rate for r in self.rows]

    def __len__(self):
        return len(self.rows)


def whiten(ch, sigma2):
    """Channel set divided by the noise standard deviation (noise power -> 1)."""
    s = math.sqrt(sigma2)
    return ChannelSet(g=ch.g / s, h=ch.h / s, H_si=ch.H_si / s, B=ch.B / s, C=ch.C / s,
                      beta0=ch.beta0 / s, theta0=ch.theta0)


def sum_rate(d, ch, sigma2):
    """UL rate at the optimal receive beamformer plus DL rate, in bits/s/Hz."""
    return math.log2(1.0 + sinr_ul_opt(d, ch, sigma2)) + math.log2(1.0 + sinr_dl(d, ch, sigma2))


def radar_sinr(d, ch, sigma2, mode):
    return sinr_radar_opt(d, ch, sigma2, ch.theta0, _RADAR_MODE[mode])


def _qf(w, V):
    return float(np.real(np.vdot(w, V @ w)))


def _cqf(w, X):
    # w^H X w for a cvxpy Hermitian variable
    return cp.real(w.conj() @ X @ w)


def dl_rate_lower_bound(V_s, V_c, V_s_prev, g, sigma2):
    """Concave minorant of the DL rate, tangent at ``V_s_prev``."""
    d0 = _qf(g, V_s_prev) + sigma2
    return (math.log2(_qf(g, V_s + V_c) + sigma2) - math.log2(d0)
            - (_qf(g, V_s) - _qf(g, V_s_prev)) / (d0 * _LN2))


@dataclass(frozen=True)
class RadarLHS:
    """Affine minorant of ``a_r^H Psi^{-1} a_r``: ``const + p_coef p - r^H V_t r``."""

    const: float
    p_coef: float
    r: np.ndarray

    def value(self, p, V_t):
        return self.const + self.p_coef * p - _qf(self.r, V_t)


@dataclass(frozen=True)
class RadarRHS:
    """``kappa / (a_t^H V a_t)`` with ``V`` the total or the sensing covariance."""

    kappa: float
    a_t: np.ndarray
    mode: str

    def covariance(self, V_s, V_c):
        return V_s + V_c if self.mode == "conventional" else V_s

    def value(self, V_s, V_c):
        gain = _qf(self.a_t, self.covariance(V_s, V_c))
        return math.inf if gain <= 0 else self.kappa / gain


@dataclass(frozen=True)
class ULQuotient:
    """``x^2 / p <= const - q^H V_t q`` (affine minorant of ``h^H Phi^{-1} h``)."""

    const: float
    q: np.ndarray

    def rhs(self, V_t):
        return self.const - _qf(self.q, V_t)

    @staticmethod
    def lhs(x, p):
        if p <= 0:
            return 0.0 if x == 0 else math.inf
        return x * x / p


@dataclass(frozen=True)
class ULBound:
    """Tangent minorant of ``x^2`` at ``x0``: ``u <= x0^2 + 2 x0 (x - x0)``."""

    x0: float

    def value(self, x):
        return self.x0 ** 2 + 2.0 * self.x0 * (x - self.x0)


def radar_constraint_terms(state, ch, theta0, rho_s, beta0_sq, mode):
    """Linearized radar constraint at ``state``.

    ``ch`` and ``state`` must share units; ``beta0_sq`` is ``|beta_0|^2`` in
    those units (noise power 1 when whitened). The linearization uses
    ``d(a^H X^{-1} a) = -a^H X^{-1} dX X^{-1} a``.
    """
    a_r = steering_rx(theta0, ch.n_rx)
    a_t = steering_tx(theta0, ch.n_tx)
    w = hermitian_solve(state.psi, a_r)
    lhs0 = float(np.real(np.vdot(a_r, w)))
    alpha = abs(np.vdot(ch.h, w)) ** 2
    r = ch.B.conj().T @ w
    const = lhs0 + alpha * state.p + _qf(r, state.V_t)
    return (RadarLHS(const, -alpha, r), RadarRHS(rho_s / beta0_sq, a_t, mode))


def ul_constraint_terms(state, ch, p_floor=0.0):
    """Linearized UL constraints at ``state``: the quotient bound and the u-bound.

    ``p_floor`` keeps the u-bound tangent point away from ``x = 0``, where it
    would pin ``u`` at zero for good once the UL power reached zero.
    """
    w = hermitian_solve(state.phi, ch.h)
    q0 = float(np.real(np.vdot(ch.h, w)))
    q = ch.C.conj().T @ w
    x0 = max(state.x, math.sqrt(max(p_floor, 0.0) * q0))
    return ULQuotient(q0 + _qf(q, state.V_t), q), ULBound(x0)


def _tight_x(p, V_t, ch):
    if p <= 0:
        return 0.0
    phi = assemble_phi(V_t, ch, 1.0)
    return math.sqrt(max(p * float(np.real(np.vdot(ch.h, hermitian_solve(phi, ch.h)))), 0.0))


def _make_state(j, V_s, V_c, p, ch, surrogate=float("nan"), status=""):
    V_t = V_s + V_c
    x = _tight_x(p, V_t, ch)
    return SCAState(j=j, V_s=V_s, V_c=V_c, p=p, x=x, u=x * x,
                    psi=assemble_psi(p, V_t, ch, 1.0), phi=assemble_phi(V_t, ch, 1.0),
                    surrogate=surrogate, status=status)


def initial_state(spec, wch=None):
    """Isotropic start: ``V_s = V_c = P_b / (2 N_t) I``, ``p = P_u``."""
    wch = wch or whiten(spec.channels, spec.scenario.noise_power)
    n = wch.n_tx
    V = spec.scenario.bs_power_max / (2.0 * n) * np.eye(n, dtype=complex)
    return _make_state(0, V, V.copy(), float(spec.scenario.ul_power_max), wch)


def _basis(vectors):
    """Basis ``W`` of the span of the given vectors, for ``V = W X W^H``.

    Objective and constraints touch the covariances only through quadratic
    forms in these vectors and the trace, so the restriction loses nothing.
    Columns are the left singular vectors divided by their singular values
    (relative to the smallest kept one). This evens out the quadratic-form
    magnitudes the conic solver sees, which matters when the optimum nearly
    nulls a large vector; ``X`` is PSD exactly when ``W X W^H`` is.
    """
    M = np.stack(vectors, axis=1)
    U, s, _ = np.linalg.svd(M, full_matrices=False)
    keep = s > 1e-10 * s[0]
    U, s = U[:, keep], s[keep]
    return U * (s[-1] / s)


def _ctrace(W, X):
    # Tr(W X W^H) = sum_i ||w_i||^2 X_ii for orthogonal columns
    return cp.real(cp.sum(cp.multiply(np.sum(np.abs(W) ** 2, axis=0), cp.diag(X))))


def _psd_project(V):
    V = 0.5 * (V + V.conj().T)
    w, E = np.linalg.eigh(V)
    w = np.clip(w, 0.0, None)
    return (E * w) @ E.conj().T


def _solve(problem, solver):
    # Clarabel occasionally stalls just short of its tolerance on badly
    # scaled instances; retry with a fixed ladder of settings, in order.
    ladder = CLARABEL_RETRIES if solver == "CLARABEL" else ({},)
    last = None
    for kwargs in ladder:
        try:
            with warnings.catch_warnings():
                # an inaccurate solve is reported through the status instead
                warnings.simplefilter("ignore", UserWarning)
                problem.solve(solver=solver, **kwargs)
        except cp.error.SolverError as exc:
            last = exc
            continue
        status = problem.status
        if status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise InfeasibleError("subproblem infeasible (%s)" % status)
        if status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            return status
        last = status
    raise SolverFailure("subproblem not solved: %s" % last)


def _recover(U, Xs_val, Xc_val, p_val, budget, ul_max):
    V_s = _psd_project(U @ Xs_val @ U.conj().T)
    V_c = _psd_project(U @ Xc_val @ U.conj().T)
    total = float(np.real(np.trace(V_s + V_c)))
    if total > budget:
        V_s *= budget / total
        V_c *= budget / total
    p = float(np.clip(p_val, 0.0, ul_max))
    return V_s, V_c, p


def solve_subproblem(state, spec, wch=None):
    """Solve the convex surrogate problem linearized at ``state``.

    Returns the next iterate with its surrogate objective in bits/s/Hz.
    ``x`` and ``u`` of the returned state are reset to their tight values.
    """
    s = spec.scenario
    wch = wch or whiten(spec.channels, s.noise_power)
    lhs, rhs = radar_constraint_terms(state, wch, wch.theta0, spec.rho_s,
                                      wch.beta0 ** 2, spec.mode)
    with_ul = s.ul_power_max > 0
    vectors = [wch.g, rhs.a_t, lhs.r]
    if with_ul:
        quot, ubound = ul_constraint_terms(state, wch, 1e-9 * s.ul_power_max)
        vectors.append(quot.q)
    U = _basis(vectors)
    d = U.shape[1]
    g, a, r = (U.conj().T @ v for v in (wch.g, rhs.a_t, lhs.r))

    Xs = cp.Variable((d, d), hermitian=True)
    Xc = cp.Variable((d, d), hermitian=True)
    Xt = Xs + Xc
    cons = [Xs >> 0, Xc >> 0, _ctrace(U, Xt) <= s.bs_power_max]
    Xr = Xt if spec.mode == "conventional" else Xs
    d0 = _qf(wch.g, state.V_s) + 1.0
    obj = cp.log(_cqf(g, Xt) + 1.0) - _cqf(g, Xs) / d0
    const = -math.log(d0) + _qf(wch.g, state.V_s) / d0
    if with_ul:
        p = cp.Variable(nonneg=True)
        x = cp.Variable(nonneg=True)
        u = cp.Variable(nonneg=True)
        q = U.conj().T @ quot.q
        cons += [
            p <= s.ul_power_max,
            cp.quad_over_lin(x, p) <= quot.const - _cqf(q, Xt),
            u <= ubound.value(x),
        ]
        obj = obj + cp.log(1.0 + u)
        p_lin = p
    else:
        p = None
        p_lin = 0.0
    cons.append(lhs.const + lhs.p_coef * p_lin - _cqf(r, Xt)
                >= rhs.kappa * cp.inv_pos(_cqf(a, Xr)))
    problem = cp.Problem(cp.Maximize(obj), cons)
    status = _solve(problem, spec.solver)
    surrogate = (problem.value + const) / _LN2
    V_s, V_c, p_val = _recover(U, Xs.value, Xc.value,
                               p.value if p is not None else 0.0,
                               s.bs_power_max, s.ul_power_max)
    return _make_state(state.j + 1, V_s, V_c, p_val, wch, surrogate, status)


def _radar_ok(state, wch, spec, slack=0.0):
    d = state.design()
    return radar_sinr(d, wch, 1.0, spec.mode) >= spec.rho_s * (1.0 + slack)


def _restore(state, spec, wch, max_steps=30):
    """Phase one: climb the linearized radar margin until the true constraint holds.

    The first pass keeps the UL power fixed so the UL term is not switched
    off; if that stalls the UL power is freed. The returned point is the one
    closest to the starting point, along the segment towards the phase-one
    solution, that satisfies the true constraint.
    """
    s = spec.scenario
    start = state
    steps = 0
    for free_p in (False, True):
        cur = start
        prev_margin = -math.inf
        for _ in range(max_steps):
            steps += 1
            lhs, rhs = radar_constraint_terms(cur, wch, wch.theta0, spec.rho_s,
                                              wch.beta0 ** 2, spec.mode)
            U = _basis([wch.g, rhs.a_t, lhs.r])
            dim = U.shape[1]
            a, r = U.conj().T @ rhs.a_t, U.conj().T @ lhs.r
            Xs = cp.Variable((dim, dim), hermitian=True)
            Xc = cp.Variable((dim, dim), hermitian=True)
            Xt = Xs + Xc
            t = cp.Variable()
            p = cp.Variable(nonneg=True) if free_p else cur.p
            cons = [Xs >> 0, Xc >> 0, _ctrace(U, Xt) <= s.bs_power_max,
                    lhs.const + lhs.p_coef * p - _cqf(r, Xt)
                    - rhs.kappa * cp.inv_pos(_cqf(a, Xt if spec.mode == "conventional" else Xs))
                    >= t]
            if free_p:
                cons.append(p <= s.ul_power_max)
            problem = cp.Problem(cp.Maximize(t), cons)
            _solve(problem, spec.solver)
            p_val = p.value if free_p else cur.p
            V_s, V_c, p_val = _recover(U, Xs.value, Xc.value, p_val,
                                       s.bs_power_max, s.ul_power_max)
            cur = _make_state(0, V_s, V_c, p_val, wch)
            if _radar_ok(cur, wch, spec, 1e-9):
                return _line_search(start, cur, spec, wch), steps
            if t.value <= prev_margin + 1e-10:
                break
            prev_margin = t.value
    raise InfeasibleError("radar SINR %.3f dB unattainable from the initial point"
                          % lin_to_db(spec.rho_s))


def _line_search(start, target, spec, wch, iters=60):
    def point(lam):
        return _make_state(0, (1 - lam) * start.V_s + lam * target.V_s,
                           (1 - lam) * start.V_c + lam * target.V_c,
                           (1 - lam) * start.p + lam * target.p, wch)

    lo, hi = 0.0, 1.0
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if _radar_ok(point(mid), wch, spec, 1e-9):
            hi = mid
        else:
            lo = mid
    return point(hi) if hi < 1.0 else target


def _row(j, state, wch, spec, surrogate, status):
    d = state.design()
    g_s = radar_sinr(d, wch, 1.0, spec.mode)
    budget = (float(np.real(np.trace(d.V_t))) <= spec.scenario.bs_power_max + 1e-9
              and -1e-12 <= d.p <= spec.scenario.ul_power_max + 1e-12)
    return TraceRow(iteration=j, surrogate=surrogate, sum_rate=sum_rate(d, wch, 1.0),
                    radar_sinr_db=float(lin_to_db(g_s)),
                    radar_feasible=g_s >= spec.rho_s * (1.0 - 1e-6),
                    budget_ok=bool(budget), solver_status=status)


def run_sca(spec, init=None):
    """Run the ascent loop.

    Stops when the relative change of the surrogate objective drops below
    ``spec.tol`` or after ``spec.max_iters`` iterations. Returns the final
    :class:`TransmitDesign` (physical units) and the :class:`SCATrace`.
    Raises :class:`InfeasibleError` or :class:`SolverFailure` with the
    partial trace attached.
    """
    s = spec.scenario
    wch = whiten(spec.channels, s.noise_power)
    trace = SCATrace()
    if init is None:
        state = initial_state(spec, wch)
    else:
        state = _make_state(0, np.asarray(init.V_s, dtype=complex),
                            np.asarray(init.V_c, dtype=complex), float(init.p), wch)
    if not _radar_ok(state, wch, spec):
        try:
            state, trace.restoration_steps = _restore(state, spec, wch)
        except SCAError as exc:
            exc.trace = trace
            trace.status = "infeasible" if isinstance(exc, InfeasibleError) else "solver_failure"
            raise
    prev = sum_rate(state.design(), wch, 1.0)
    trace.initial_sum_rate = prev
    trace.initial_radar_sinr_db = float(lin_to_db(radar_sinr(state.design(), wch, 1.0, spec.mode)))
    for j in range(1, spec.max_iters + 1):
        try:
            nxt = solve_subproblem(state, spec, wch)
        except SCAError as exc:
            trace.status = "infeasible" if isinstance(exc, InfeasibleError) else "solver_failure"
            exc.trace = trace
            raise
        trace.rows.append(_row(j, nxt, wch, spec, nxt.surrogate, nxt.status))
        state = nxt
        if abs(nxt.surrogate - prev) <= spec.tol * max(abs(prev), 1e-12):
            trace.status = "converged"
            break
        prev = nxt.surrogate
    else:
        trace.status = "max_iters"
    return state.design(), trace


def extract_rank1(V_c):
    """Principal-eigenvector beamformer of ``V_c`` and its rank-one gap."""
    lam, e = principal_eigenpair(V_c)
    total = float(np.real(np.trace(V_c)))
    lam = max(lam, 0.0)
    gap = 0.0 if total <= 0 else min(max(1.0 - lam / total, 0.0), 1.0)
    return math.sqrt(lam) * e, gap


def derive_rho_s(spec):
    """Radar SINR threshold implied by a :class:`~iqscc.detection.DetectionSpec`."""
    return required_sinr(spec.protocol, spec.pd_min, spec.pf_max, spec.K, spec.n_n, spec.eta)
