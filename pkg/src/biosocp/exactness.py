"""Exactness certificates for the relaxed programs.

All quantities use the sign conventions of the Lagrangian
``F + rho'(T - phi) + lam'(Vh (xi(n-1) - xi(n)) / delta + Vh K T + Nh xi + Ch xin)``,
so ``rho >= 0`` and a strictly positive ``rho`` forces ``T = phi``.
"""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from . import kinetics as kin
from .network import is_outflow_connected, kron_lift
from .program import is_linear, linear_gradients, objective_gradients

log = logging.getLogger(__name__)

SINGULAR_COND = 1e13


def _gap_scale(phi):
    return 1.0 + (np.max(np.abs(phi)) if phi.size else 0.0)


@dataclass
class ResidualExactness:
    gaps: np.ndarray          # (steps, rs), phi(xi) - T
    max_relative: np.ndarray  # per step
    exact_steps: np.ndarray
    tol: float
    negative_steps: list

    @property
    def exact(self) -> bool:
        return bool(np.all(self.exact_steps))


def _step_index(solution, spec):
    """(row in the solution arrays, kinetics step) pairs."""
    rows = solution.xi.shape[0]
    if rows == 1:
        return [(0, None)]
    return [(n, n) for n in range(1, rows)]


def residual_exactness(solution, spec: kin.KineticsSpec, tol: float = 1e-6) -> ResidualExactness:
    """Gaps ``phi(xi(n)) - T(n)`` by direct evaluation; exact iff max gap <= tol (1 + |phi|)."""
    idx = _step_index(solution, spec)
    rs = spec.n_tanks * spec.n_reactions
    gaps = np.zeros((len(idx), rs))
    rel = np.zeros(len(idx))
    neg = []
    for k, (row, step) in enumerate(idx):
        phi = kin.rates(spec, solution.xi[row], step)
        g = phi - solution.T[row]
        gaps[k] = g
        scale = _gap_scale(phi)
        rel[k] = np.max(g) / scale if rs else 0.0
        if rs and np.min(g) < -1e-7 * scale:
            neg.append(step if step is not None else 0)
    if neg:
        log.warning("kinetics gaps below the solver tolerance floor at steps %s", neg[:10])
    return ResidualExactness(gaps=gaps, max_relative=rel, exact_steps=rel <= tol, tol=tol,
                             negative_steps=neg)


# ---------------------------------------------------------------- step matrices


@dataclass
class StepMatrices:
    vol: np.ndarray       # diagonal of Vh
    N: np.ndarray         # dense Nh(n)
    J: np.ndarray         # dense Jacobian (rs x ms)
    K: np.ndarray         # dense stoichiometry (ms x rs)
    kinks: list

    @property
    def psi(self) -> np.ndarray:
        """``Vh^-1 Nh' + Vh^-1 J' K' Vh``."""
        return (self.N.T + self.J.T @ self.K.T * self.vol[None, :]) / self.vol[:, None]


def step_matrices(scenario, xi, step) -> StepMatrices:
    spec = scenario.kinetics
    m = spec.n_states
    mats = scenario.network.matrices(step if step is not None else 1)
    J, flags = kin.jacobian_with_flags(spec, xi, step)
    return StepMatrices(vol=np.repeat(np.diag(mats.V), m).astype(float),
                        N=kron_lift(mats.N, m).toarray(), J=J.toarray(),
                        K=spec.stoichiometry().toarray(), kinks=list(flags))


@dataclass
class GammaInfo:
    matrix: np.ndarray
    condition: float
    form_mismatch: float       # unreduced vs reduced form, relative
    pushthrough_mismatch: float
    singular: bool


def gamma_from_psi(psi, vol, delta, N=None, J=None, K=None) -> GammaInfo:
    """``(I - delta Psi)^-1`` checked against the unreduced and push-through forms."""
    ms = psi.shape[0]
    A = np.eye(ms) - delta * psi
    cond = float(np.linalg.cond(A)) if ms else 1.0
    if not np.isfinite(cond) or cond > SINGULAR_COND:
        return GammaInfo(None, cond, np.nan, np.nan, True)
    G = np.linalg.solve(A, np.eye(ms))
    scale = max(1.0, np.max(np.abs(G)))
    push = np.eye(ms) + delta * psi @ G
    push_err = float(np.max(np.abs(push - G)) / scale) if ms else 0.0
    form_err = 0.0
    if N is not None:
        B = np.diag(vol) / delta - N.T - J.T @ K.T * vol[None, :]
        G1 = np.linalg.solve(B, np.diag(vol)) / delta
        form_err = float(np.max(np.abs(G1 - G)) / scale) if ms else 0.0
    return GammaInfo(G, cond, form_err, push_err, False)


def gamma(n, solution, scenario) -> GammaInfo:
    sm = step_matrices(scenario, solution.xi[n], n)
    return gamma_from_psi(sm.psi, sm.vol, scenario.grid.delta, sm.N, sm.J, sm.K)


# ---------------------------------------------------------------- transient certificate


@dataclass
class OmegaResult:
    omega: np.ndarray            # (tau + 1, rs); row 0 unused
    min_entry: np.ndarray        # per step 1..tau
    positive: bool
    indeterminate: bool
    margin: float
    advisory: list
    gamma_condition: np.ndarray
    gamma_form_mismatch: float
    kinks: list
    method: str


def _advisories(scenario, solution):
    notes = []
    if scenario.boundary == "periodic":
        notes.append("periodic boundary: the recursion assumes a fixed initial state")
    cons = scenario.constraints
    if cons.allocations:
        notes.append("allocation rows present: influent is not fixed")
    elif cons.influent is not None and np.any(np.isnan(cons.influent)):
        notes.append("free influent entries present")
    if solution.blocks.get("upper_active"):
        notes.append("state upper bounds are active")
    floor = solution.blocks.get("rate_floor_dual")
    if floor is not None and np.nanmax(np.abs(floor), initial=0.0) > 1e-7 * max(
            1.0, np.nanmax(np.abs(solution.rho), initial=0.0)):
        notes.append("rate nonnegativity rows are active")
    xi = solution.xi[1:] if solution.xi.shape[0] > 1 else solution.xi
    if np.any(xi <= 1e-9):
        notes.append("some states sit at zero, where their nonnegativity rows may carry multipliers")
    return notes


def omega_certificate(solution, scenario, margin: float = 1e-9, method: str = None) -> OmegaResult:
    """Per-step certificate vectors; positive iff every entry exceeds ``margin``.

    ``method="explicit"`` sums the products ``Gamma(n) ... Gamma(k)`` built
    left to right for every pair ``n <= k``; ``"recursive"`` uses the
    equivalent backward recursion and is linear in the horizon.
    """
    spec = scenario.kinetics
    tau, delta = scenario.grid.tau, scenario.grid.delta
    rs = spec.n_tanks * spec.n_reactions
    if method is None:
        method = "explicit" if tau <= 200 else "recursive"
    fxi, fphi = objective_gradients(scenario.objective, solution, scenario.network, spec)
    gammas, weighted, mats, conds, kinks = {}, {}, {}, np.zeros(tau), []
    form_err = 0.0
    indeterminate = False
    for n in range(1, tau + 1):
        sm = step_matrices(scenario, solution.xi[n], n)
        info = gamma_from_psi(sm.psi, sm.vol, delta, sm.N, sm.J, sm.K)
        conds[n - 1] = info.condition
        if info.singular:
            indeterminate = True
            continue
        form_err = max(form_err, info.form_mismatch, info.pushthrough_mismatch)
        gammas[n] = info.matrix
        mats[n] = sm
        weighted[n] = (fxi[n] + sm.J.T @ fphi[n]) / sm.vol
        kinks.extend((n, *f) for f in sm.kinks)
    omega = np.full((tau + 1, rs), np.nan)
    if not indeterminate:
        if method == "explicit":
            for n in range(1, tau + 1):
                P = np.eye(gammas[n].shape[0])
                acc = np.zeros_like(weighted[n])
                for k in range(n, tau + 1):
                    P = P @ gammas[k]
                    acc += P @ weighted[k]
                sm = mats[n]
                omega[n] = -fphi[n] - delta * sm.K.T @ (sm.vol * acc)
        else:
            lam = np.zeros_like(weighted[tau])
            for n in range(tau, 0, -1):
                lam = gammas[n] @ (delta * weighted[n] + lam)
                sm = mats[n]
                omega[n] = -fphi[n] - sm.K.T @ (sm.vol * lam)
    mins = np.nanmin(omega[1:], axis=1) if rs else np.full(tau, np.inf)
    positive = bool(not indeterminate and np.all(mins > margin))
    return OmegaResult(omega=omega, min_entry=mins, positive=positive,
                       indeterminate=indeterminate, margin=margin,
                       advisory=_advisories(scenario, solution), gamma_condition=conds,
                       gamma_form_mismatch=form_err, kinks=kinks, method=method)


def implied_multipliers(solution, scenario):
    """The multipliers of the dynamics rows that the certificate recursion predicts."""
    spec = scenario.kinetics
    tau, delta = scenario.grid.tau, scenario.grid.delta
    fxi, fphi = objective_gradients(scenario.objective, solution, scenario.network, spec)
    lam = np.zeros(spec.n_tanks * spec.n_states)
    out = np.full((tau + 1, lam.size), np.nan)
    for n in range(tau, 0, -1):
        sm = step_matrices(scenario, solution.xi[n], n)
        g = gamma_from_psi(sm.psi, sm.vol, delta).matrix
        lam = g @ (delta * (fxi[n] + sm.J.T @ fphi[n]) / sm.vol + lam)
        out[n] = lam
    return out


def dual_identity_error(solution, omega: OmegaResult) -> float:
    """max_n |rho(n) - Omega(n)|_inf / (1 + |rho(n)|_inf)."""
    rho = solution.rho[1:]
    om = omega.omega[1:]
    if rho.size == 0:
        return 0.0
    num = np.max(np.abs(rho - om), axis=1)
    den = 1.0 + np.max(np.abs(rho), axis=1)
    return float(np.max(num / den))


# ---------------------------------------------------------------- spectra and corollaries


@dataclass
class PsiSpectrum:
    sym_min: float
    sym_max: float
    psi_bar: float
    eig_real_min: float
    eig_real_max: float
    per_step: list
    nsd_violated: bool


def psi_spectrum(solution, scenario, tol: float = 1e-9) -> PsiSpectrum:
    """Range of sym(Psi(n)) eigenvalues and psi_bar = max_n |Psi(n)|_2.

    With sym(Psi) negative semidefinite this psi_bar puts the eigenvalues
    of sym(Gamma(n)) in [1 - delta psi_bar, 1].
    """
    rows = _step_index(solution, scenario.kinetics)
    lo, hi, bar, elo, ehi, per = np.inf, -np.inf, 0.0, np.inf, -np.inf, []
    for row, step in rows:
        psi = step_matrices(scenario, solution.xi[row], step).psi
        ev = np.linalg.eigvalsh(0.5 * (psi + psi.T))
        eg = np.linalg.eigvals(psi).real
        nrm = float(np.linalg.norm(psi, 2)) if psi.size else 0.0
        per.append(dict(step=step, sym_min=float(ev.min()), sym_max=float(ev.max()),
                        norm=nrm))
        lo, hi, bar = min(lo, ev.min()), max(hi, ev.max()), max(bar, nrm)
        elo, ehi = min(elo, eg.min()), max(ehi, eg.max())
    violated = bool(hi > tol * max(1.0, bar))
    if violated:
        log.info("symmetric part of Psi has a positive eigenvalue %.3g", hi)
    return PsiSpectrum(float(lo), float(hi), float(bar), float(elo), float(ehi), per, violated)


def gamma_containment(solution, scenario, psi_bar=None, tol=1e-8) -> dict:
    """Worst violation of sym(Gamma(n)) eigenvalues leaving [1 - delta psi_bar, 1]."""
    if psi_bar is None:
        psi_bar = psi_spectrum(solution, scenario).psi_bar
    delta = scenario.grid.delta
    lo_b, hi_b = 1.0 - delta * psi_bar, 1.0
    worst = 0.0
    lo, hi = np.inf, -np.inf
    for n in range(1, scenario.grid.tau + 1):
        G = gamma(n, solution, scenario).matrix
        ev = np.linalg.eigvalsh(0.5 * (G + G.T))
        lo, hi = min(lo, ev.min()), max(hi, ev.max())
        worst = max(worst, lo_b - ev.min(), ev.max() - hi_b)
    return dict(lower_bound=lo_b, upper_bound=hi_b, eig_min=float(lo), eig_max=float(hi),
                violation=float(max(worst, 0.0)), passed=bool(worst <= tol))


def corollary_checks(scenario, solution=None) -> dict:
    """Which of the two small-step corollaries applies, with their margins.

    Corollary 1: ``f_phi = 0`` and ``K' f_xi < 0`` (margin ``min(-K' f_xi)``).
    Corollary 2: ``f_xi = 0`` and ``f_phi < 0`` (margin ``min(-f_phi)``).
    """
    spec = scenario.kinetics
    if not is_linear(scenario.objective):
        return dict(linear=False, corollary1=dict(applies=False), corollary2=dict(applies=False),
                    verdict="not applicable: objective is not linear")
    K = spec.stoichiometry().toarray()
    steps = list(scenario.grid.steps) if scenario.mode == "transient" else [1]
    c1_margin, c2_margin = np.inf, np.inf
    fphi_zero, fxi_zero = True, True
    for n in steps:
        fxi, fphi = linear_gradients(scenario.objective, scenario.network, spec, n)
        fphi_zero &= bool(np.all(fphi == 0))
        fxi_zero &= bool(np.all(fxi == 0))
        if K.shape[1]:
            c1_margin = min(c1_margin, float(np.min(-K.T @ fxi)))
            # Omega(n) tends to -f_phi as delta -> 0, so rewarding rates is what helps
            c2_margin = min(c2_margin, float(np.min(-fphi)))
    c1 = fphi_zero and c1_margin > 0
    c2 = fxi_zero and c2_margin > 0
    out = dict(linear=True,
               corollary1=dict(applies=bool(c1), rates_weight_zero=fphi_zero,
                               margin=c1_margin),
               corollary2=dict(applies=bool(c2), state_weight_zero=fxi_zero,
                               margin=c2_margin))
    if c1:
        out["verdict"] = "corollary 1 applies"
    elif c2:
        out["verdict"] = "corollary 2 applies"
    else:
        out["verdict"] = "not applicable"
    if solution is not None and scenario.mode == "transient":
        bar = psi_spectrum(solution, scenario).psi_bar
        out["psi_bar"] = bar
        out["delta"] = scenario.grid.delta
        # Heuristic only: keeps every sym(Gamma) eigenvalue in [0, 1].
        out["delta_hint"] = 1.0 / bar if bar > 0 else np.inf
        out["delta_within_hint"] = bool(scenario.grid.delta <= out["delta_hint"])
    return out


# ---------------------------------------------------------------- steady state


def _steady_parts(scenario, xi, step=None):
    sm = step_matrices(scenario, xi, step)
    NT_inv = np.linalg.inv(sm.N.T)
    KVN = sm.K.T @ (sm.vol[:, None] * NT_inv)        # K' Vh (Nh')^-1
    return sm, KVN, float(np.linalg.cond(sm.N))


def steady_rho(scenario, xi, fxi, fphi):
    """Certificate vector of the steady program and the matrix it inverts."""
    sm, KVN, cond_n = _steady_parts(scenario, xi)
    M = np.eye(KVN.shape[0]) + KVN @ sm.J.T
    rhs = KVN @ fxi - fphi
    cond_m = float(np.linalg.cond(M)) if M.size else 1.0
    rho = np.linalg.solve(M, rhs) if cond_m < SINGULAR_COND else None
    return rho, M, rhs, cond_n, cond_m


def gradostat_split_rho(scenario, xi, fxi, fphi):
    """Same certificate written with the substrate/biomass Jacobian blocks.

    Requires two states (substrate, biomass) and one reaction per tank with
    stoichiometry ``[-1/y, 1]``.
    """
    spec = scenario.kinetics
    s = spec.n_tanks
    if spec.n_states != 2 or spec.n_reactions != 1:
        raise ValueError("split form needs two states and one reaction per tank")
    mats = scenario.network.matrices(1)
    V = np.diag(mats.V)
    N = mats.N
    J = kin.jacobian(spec, xi).toarray()          # s x 2s
    JS = np.diag(J[np.arange(s), 2 * np.arange(s)])
    JX = np.diag(J[np.arange(s), 2 * np.arange(s) + 1])
    y = np.array([-1.0 / spec.kappa[i][0, 0] for i in range(s)])
    if not np.allclose([spec.kappa[i][1, 0] for i in range(s)], 1.0):
        raise ValueError("split form needs biomass stoichiometry 1")
    NT_inv = np.linalg.inv(N.T)
    # the yield belongs to the row tank; with one common yield this is
    # I + V (N')^-1 (-J_S' / y + J_X')
    M = np.eye(s) + (V[:, None] * NT_inv) @ JX.T - ((V / y)[:, None] * NT_inv) @ JS.T
    fS, fX = fxi[0::2], fxi[1::2]
    # K' Vh (Nh')^-1 f_xi written per tank: V (N')^-1 (-f_S / y + f_X)
    rhs = V * (NT_inv @ fX) - (V / y) * (NT_inv @ fS) - fphi
    return np.linalg.solve(M, rhs), M


@dataclass
class SteadyCertificate:
    rho: np.ndarray
    verdict: str
    positive: bool
    margin: float
    outflow_connected: bool
    condition_N: float
    condition_M: float
    solver_rho: np.ndarray
    dual_agreement: float
    corollary3: dict
    advisory: list = field(default_factory=list)


def steady_state_certificate(solution, scenario, margin: float = 1e-9, samples: int = 1000,
                             bounds=None, seed: int = 0, grid_states=None) -> SteadyCertificate:
    """Steady-state certificate vector plus the sampled corollary conditions."""
    spec = scenario.kinetics
    net = scenario.network.network(1)
    connected = is_outflow_connected(net)
    xi = solution.xi[0]
    fxi, fphi = objective_gradients(scenario.objective, solution, scenario.network, spec)
    fxi, fphi = fxi[0], fphi[0]
    advisory = []
    if not connected:
        return SteadyCertificate(None, "indeterminate: network is not outflow connected", False,
                                 margin, False, np.inf, np.inf, solution.rho[0], np.nan, {})
    try:
        rho, M, rhs, cond_n, cond_m = steady_rho(scenario, xi, fxi, fphi)
    except np.linalg.LinAlgError:
        return SteadyCertificate(None, "indeterminate: singular flow matrix", False, margin,
                                 True, np.inf, np.inf, solution.rho[0], np.nan, {})
    if rho is None:
        return SteadyCertificate(None, "indeterminate: singular certificate matrix", False,
                                 margin, True, cond_n, cond_m, solution.rho[0], np.nan, {})
    solver_rho = solution.rho[0]
    agree = float(np.max(np.abs(rho - solver_rho)) / (1.0 + np.max(np.abs(solver_rho)))) \
        if rho.size else 0.0
    positive = bool(rho.size == 0 or np.min(rho) > margin)
    if rho.size and np.min(rho) > margin:
        verdict = "exact"
    elif rho.size and np.min(rho) >= -margin:
        verdict = "inconclusive: certificate on the boundary"
    else:
        verdict = "not certified" if rho.size else "exact (no reactions)"
    if spec.n_reactions == 0:
        verdict = "inconclusive: certificate on the boundary" if not np.any(fphi) else verdict
        positive = bool(rho.size and np.min(rho) > margin)
    advisory.append("a steady optimum need not be an equilibrium of the dynamics")
    if solution.blocks.get("upper_active"):
        advisory.append("state upper bounds are active")
    cor = corollary3(scenario, xi, fxi, fphi, samples=samples, bounds=bounds, seed=seed,
                     grid_states=grid_states)
    return SteadyCertificate(rho, verdict, positive, margin, True, cond_n, cond_m, solver_rho,
                             agree, cor, advisory)


def corollary3(scenario, xi, fxi, fphi, samples=1000, bounds=None, seed=0, grid_states=None,
               tol=1e-12) -> dict:
    """Sampled check of ``(I + K'Vh(Nh')^-1 J')^-1 >= 0`` and ``K'Vh(Nh')^-1 f_xi - f_phi >= 0``."""
    spec = scenario.kinetics
    ms = spec.n_tanks * spec.n_states
    sm, KVN, _ = _steady_parts(scenario, xi)
    vec = KVN @ fxi - fphi
    rng = np.random.default_rng(seed)
    if bounds is None:
        hi = np.maximum(2.0 * np.asarray(xi, dtype=float), 1.0)
        bounds = (np.zeros(ms), hi)
    lo, hi = (np.broadcast_to(np.asarray(b, dtype=float), (ms,)) for b in bounds)
    states = [np.asarray(xi, dtype=float)]
    states += list(lo + (hi - lo) * rng.random((samples, ms)))
    if grid_states is not None:
        states += [np.asarray(g, dtype=float) for g in grid_states]
    mat_ok, mat_strict, worst = True, True, np.inf
    for state in states:
        J = kin.jacobian(spec, state).toarray()
        M = np.eye(KVN.shape[0]) + KVN @ J.T
        try:
            Minv = np.linalg.inv(M)
        except np.linalg.LinAlgError:
            mat_ok = mat_strict = False
            continue
        mn = float(Minv.min()) if Minv.size else 0.0
        worst = min(worst, mn)
        mat_ok &= mn >= -tol
        mat_strict &= mn > tol
    vec_ok = bool(np.all(vec >= -tol))
    vec_strict = bool(vec.size and np.all(vec > tol))
    strict = "matrix" if mat_strict else ("vector" if vec_strict else "none")
    return dict(matrix_nonnegative=bool(mat_ok), matrix_strict=bool(mat_strict),
                vector_nonnegative=vec_ok, vector_strict=vec_strict,
                vector=vec, worst_inverse_entry=worst, samples=len(states),
                sample_bounds=[lo.tolist(), hi.tolist()], strict_inequality=strict,
                applies=bool(mat_ok and vec_ok and (mat_strict or vec_strict)))


# ---------------------------------------------------------------- report


@dataclass
class ExactnessReport:
    mode: str
    status: str
    tol: float
    margin: float
    exact: bool
    exact_steps: list
    gaps: list
    max_gap: float
    omega: list = None
    omega_min: list = None
    omega_positive: bool = None
    omega_indeterminate: bool = None
    dual_identity_error: float = None
    gamma_condition_max: float = None
    gamma_form_mismatch: float = None
    psi: dict = None
    gamma_containment: dict = None
    corollaries: dict = None
    steady: dict = None
    advisory: list = field(default_factory=list)
    kinks: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    @property
    def certified(self) -> bool:
        if self.mode == "steady":
            return bool(self.steady and self.steady.get("positive"))
        return bool(self.omega_positive)

    def summary(self) -> str:
        steps = len(self.exact_steps)
        n_exact = int(sum(self.exact_steps))
        head = "exact: all steps" if self.exact else f"exact: {n_exact}/{steps} steps"
        cert = "certified" if self.certified else "not certified"
        adv = " (advisory)" if self.advisory and self.certified else ""
        return f"{head}; max relative gap {self.max_gap:.3g}; certificate {cert}{adv}"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["certified"] = self.certified
        d["summary"] = self.summary()
        return _jsonable(d)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if np.isfinite(x) else None
    return x


def certify(scenario, solution, tol=1e-6, margin=1e-9, samples=1000, seed=0) -> ExactnessReport:
    """Run every applicable check on an optimal solution."""
    spec = scenario.kinetics
    res = residual_exactness(solution, spec, tol)
    rep = ExactnessReport(mode=scenario.mode, status=solution.status, tol=tol, margin=margin,
                          exact=res.exact, exact_steps=res.exact_steps.tolist(),
                          gaps=res.gaps, max_gap=float(np.max(res.max_relative, initial=0.0)),
                          notes=list(scenario.notes))
    rep.corollaries = corollary_checks(scenario, solution if scenario.mode == "transient" else None)
    if scenario.mode == "transient":
        om = omega_certificate(solution, scenario, margin)
        rep.omega = om.omega[1:]
        rep.omega_min = om.min_entry
        rep.omega_positive = om.positive
        rep.omega_indeterminate = om.indeterminate
        rep.dual_identity_error = dual_identity_error(solution, om)
        rep.gamma_condition_max = float(np.max(om.gamma_condition, initial=1.0))
        rep.gamma_form_mismatch = om.gamma_form_mismatch
        rep.advisory = om.advisory
        rep.kinks = om.kinks
        psi = psi_spectrum(solution, scenario)
        rep.psi = dict(sym_min=psi.sym_min, sym_max=psi.sym_max, psi_bar=psi.psi_bar,
                       eig_real_min=psi.eig_real_min, eig_real_max=psi.eig_real_max,
                       nsd_violated=psi.nsd_violated)
        rep.gamma_containment = gamma_containment(solution, scenario, psi.psi_bar)
    else:
        sc = steady_state_certificate(solution, scenario, margin, samples=samples, seed=seed)
        rep.steady = asdict(sc)
        rep.advisory = sc.advisory
    if res.negative_steps:
        rep.advisory.append(f"negative kinetics gaps at steps {res.negative_steps[:10]}")
    return rep
