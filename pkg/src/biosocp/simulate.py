"""Forward simulation of the nonlinear dynamics with the optimizer's implicit Euler step."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import kinetics as kin
from .network import ValidationError, kron_lift

log = logging.getLogger(__name__)


class ConvergenceError(RuntimeError):
    """Newton iteration failed; carries the step and last residual."""

    def __init__(self, message, step=None, residual=None):
        super().__init__(message)
        self.step = step
        self.residual = residual


@dataclass
class Trajectory:
    xi: np.ndarray      # (tau + 1, ms)
    phi: np.ndarray     # (tau + 1, rs); row 0 is NaN
    iterations: np.ndarray
    clipped: int = 0

    def to_csv(self, path, scenario):
        write_trajectory_csv(path, scenario, dict(xi=self.xi, phi=self.phi))


def _column_names(scenario, quantity, width):
    spec = scenario.kinetics
    names = spec.state_names if quantity in ("xi", "xin", "lam") else spec.reaction_names
    per = spec.n_states if quantity in ("xi", "xin", "lam") else spec.n_reactions
    if names is None:
        names = [str(k) for k in range(per)]
    return [f"{quantity}:{i}:{names[k]}" for i in range(width // per) for k in range(per)] \
        if per else []


def write_trajectory_csv(path, scenario, blocks: dict):
    """One row per step; columns ``quantity:tank:entry``."""
    header = ["step", "time"]
    arrays = []
    for q, arr in blocks.items():
        arr = np.asarray(arr, dtype=float)
        header += _column_names(scenario, q, arr.shape[1])
        arrays.append(arr)
    rows = arrays[0].shape[0]
    times = scenario.grid.times if rows == scenario.grid.tau + 1 else np.zeros(rows)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for n in range(rows):
            vals = np.concatenate([a[n] for a in arrays])
            w.writerow([n, repr(float(times[n]))] + ["" if np.isnan(v) else repr(float(v))
                                                      for v in vals])


def _newton(residual, jac, x0, tol, scale, max_iter=100, max_halvings=30, where=""):
    """Damped Newton with step halving and projection onto x >= 0."""
    x = np.maximum(x0, 0.0)
    F = residual(x)
    fnorm = np.max(np.abs(F), initial=0.0)
    clipped = 0
    for it in range(max_iter + 1):
        if fnorm <= tol * scale:
            return x, it, fnorm, clipped
        if it == max_iter:
            break
        d = spla.spsolve(jac(x).tocsc(), -F)
        t = 1.0
        for _ in range(max_halvings + 1):
            trial = x + t * d
            neg = trial < 0
            if np.any(neg):
                clipped += int(neg.sum())
                trial = np.where(neg, 0.0, trial)
            Ft = residual(trial)
            fn = np.max(np.abs(Ft), initial=0.0)
            if fn < fnorm or fn <= tol * scale:
                break
            t *= 0.5
        else:
            raise ConvergenceError(f"{where}: line search failed, residual {fnorm:.3e}",
                                   residual=fnorm)
        x, F, fnorm = trial, Ft, fn
    raise ConvergenceError(f"{where}: no convergence after {max_iter} Newton iterations, "
                           f"residual {fnorm:.3e}", residual=fnorm)


NEGATIVE_SLACK = 1e-7


def forward_simulate(scenario, influent, initial_state, tol: float = 1e-10,
                     max_iter: int = 100) -> Trajectory:
    """Integrate ``Vh (xi(n) - xi(n-1)) / delta = Vh K phi(xi(n)) + Nh xi(n) + Ch xin(n)``.

    ``influent`` holds one row per step (tau rows, or tau + 1 with row 0
    ignored).  Each step is solved by damped Newton until the residual is
    below ``tol * (1 + |Vh xi(n-1) / delta + Ch xin(n)|_inf)``.
    """
    spec = scenario.kinetics
    grid = scenario.grid
    tau, delta = grid.tau, grid.delta
    s, m, r = spec.n_tanks, spec.n_states, spec.n_reactions
    ms, rs = s * m, s * r
    xin = np.asarray(influent, dtype=float)
    if xin.ndim == 3:
        xin = xin.reshape(xin.shape[0], -1)
    if xin.shape == (tau + 1, ms):
        xin = xin[1:]
    if xin.shape != (tau, ms):
        raise ValidationError(f"influent has shape {xin.shape}, expected ({tau}, {ms})")
    x0 = np.asarray(initial_state, dtype=float).ravel()
    if x0.size != ms:
        raise ValidationError(f"initial state has {x0.size} entries, expected {ms}")
    # solver output may dip below zero by its own tolerance
    floor = -NEGATIVE_SLACK * max(1.0, float(np.max(np.abs(xin), initial=0.0)),
                                  float(np.max(np.abs(x0), initial=0.0)))
    if np.any(xin < floor) or np.any(x0 < floor):
        raise ValidationError("influent and initial state must be nonnegative")
    xin, x0 = np.maximum(xin, 0.0), np.maximum(x0, 0.0)
    K = spec.stoichiometry()
    xi = np.zeros((tau + 1, ms))
    phi = np.full((tau + 1, rs), np.nan)
    iters = np.zeros(tau + 1, dtype=int)
    xi[0] = x0
    clipped_total = 0
    for n in grid.steps:
        mats = scenario.network.matrices(n)
        Vh = kron_lift(mats.V, m)
        A = (Vh / delta - kron_lift(mats.N, m)).tocsr()
        VK = (Vh @ K).tocsr()
        rhs = Vh @ xi[n - 1] / delta + kron_lift(mats.C, m) @ xin[n - 1]

        def residual(x, A=A, VK=VK, rhs=rhs, n=n):
            return A @ x - VK @ kin.rates(spec, x, n) - rhs

        def jac(x, A=A, VK=VK, n=n):
            return A - VK @ kin.jacobian(spec, x, n) if rs else A

        scale = 1.0 + np.max(np.abs(rhs), initial=0.0)
        try:
            x, it, _, clipped = _newton(residual, jac, xi[n - 1], tol, scale, max_iter,
                                        where=f"step {n}")
        except ConvergenceError as exc:
            raise ConvergenceError(str(exc), step=n, residual=exc.residual) from None
        if clipped:
            log.debug("step %d: %d negative Newton entries projected to zero", n, clipped)
        clipped_total += clipped
        xi[n] = x
        phi[n] = kin.rates(spec, x, n)
        iters[n] = it
    if clipped_total:
        log.info("forward simulation projected %d negative iterate entries to zero", clipped_total)
    return Trajectory(xi=xi, phi=phi, iterations=iters, clipped=clipped_total)


@dataclass
class SteadyState:
    state: np.ndarray
    residual: float
    iterations: int
    seed: np.ndarray
    note: str = ("a steady optimum of the relaxed program need not be an equilibrium; "
                 "this is the root reached from the given seed")


def find_steady_state(scenario, influent, guess, tol: float = 1e-10,
                      max_iter: int = 100) -> SteadyState:
    """Newton root of ``0 = Vh K phi(xi) + Nh xi + Ch xin`` from ``guess``."""
    if not scenario.network.is_constant:
        raise ValidationError("steady states need a constant network")
    spec = scenario.kinetics
    m = spec.n_states
    ms = spec.n_tanks * m
    mats = scenario.network.matrices(1)
    Vh = kron_lift(mats.V, m)
    N = kron_lift(mats.N, m).tocsr()
    VK = (Vh @ spec.stoichiometry()).tocsr()
    xin = np.asarray(influent, dtype=float).ravel()
    seed = np.asarray(guess, dtype=float).ravel()
    if xin.size != ms or seed.size != ms:
        raise ValidationError(f"influent and guess need {ms} entries")
    if np.any(seed < 0):
        raise ValidationError("initial guess must be nonnegative")
    c = kron_lift(mats.C, m) @ xin

    def residual(x):
        return N @ x + VK @ kin.rates(spec, x, None) + c

    def jac(x):
        return N + VK @ kin.jacobian(spec, x, None) if spec.n_reactions else N

    scale = 1.0 + np.max(np.abs(c), initial=0.0)
    x, it, fn, _ = _newton(residual, jac, seed, tol, scale, max_iter, where="steady state")
    return SteadyState(state=x, residual=float(fn), iterations=it, seed=seed)


def mass_balance_residual(scenario, traj: Trajectory, influent) -> np.ndarray:
    """Per-step mismatch of total V-weighted change vs inflow minus outflow (no kinetics)."""
    spec = scenario.kinetics
    m = spec.n_states
    xin = np.asarray(influent, dtype=float).reshape(scenario.grid.tau, -1)
    out = np.zeros(scenario.grid.tau)
    for n in scenario.grid.steps:
        net = scenario.network.network(n)
        vol = np.repeat(net.volumes, m)
        change = (vol * (traj.xi[n] - traj.xi[n - 1])).reshape(-1, m).sum(0) / scenario.grid.delta
        inflow = (np.repeat(net.inflow_rates, m) * xin[n - 1]).reshape(-1, m).sum(0)
        outflow = (np.repeat(net.outflow_rates, m) * traj.xi[n]).reshape(-1, m).sum(0)
        scale = 1.0 + np.max(np.abs(inflow)) + np.max(np.abs(outflow))
        out[n - 1] = np.max(np.abs(change - inflow + outflow)) / scale
    return out
