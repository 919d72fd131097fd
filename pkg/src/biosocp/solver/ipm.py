"""Primal-dual interior-point method on the homogeneous self-dual embedding.

Solves

    minimize    c'x                 maximize   -b'y - h'z
    subject to  A x = b             subject to  A'y + G'z + c = 0
                G x + s = h                     z in K
                s in K

with K a product of nonnegative orthants and second-order cones, using
Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .cones import ConeDims, NTScaling
from .kkt import KKTSystem

log = logging.getLogger(__name__)

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
MAX_ITERATIONS = "max-iterations"
NUMERICAL_FAILURE = "numerical-failure"


@dataclass
class SolverOptions:
    feastol: float = 1e-8
    gaptol: float = 1e-8
    max_iter: int = 200
    step_fraction: float = 0.99
    static_reg: float = 1e-8
    refine_steps: int = 10
    equilibrate: int = 15
    min_step: float = 1e-10
    sigma_min: float = 1e-4

    @classmethod
    def from_dict(cls, d):
        return cls(**(d or {}))


@dataclass
class ConicSolution:
    """Primal-dual point of the conic form above."""

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    status: str
    pcost: float
    dcost: float
    gap: float
    rel_gap: float
    pres: float
    dres: float
    iterations: int
    history: list = field(default_factory=list)
    solve_time: float = 0.0


def _norm(v):
    return float(np.max(np.abs(v))) if v.size else 0.0


def _ruiz(A, G, dims: ConeDims, iters):
    """Row/column equilibration keeping second-order blocks uniformly scaled."""
    n = A.shape[1]
    D = np.ones(n)
    EA = np.ones(A.shape[0])
    EG = np.ones(G.shape[0])
    As, Gs = A.copy(), G.copy()
    for _ in range(iters):
        col = np.maximum(
            abs(As).max(axis=0).toarray().ravel() if As.shape[0] else np.zeros(n),
            abs(Gs).max(axis=0).toarray().ravel() if Gs.shape[0] else np.zeros(n))
        dc = 1.0 / np.sqrt(np.where(col > 0, col, 1.0))
        ra = abs(As).max(axis=1).toarray().ravel() if As.shape[0] else np.zeros(0)
        ea = 1.0 / np.sqrt(np.where(ra > 0, ra, 1.0))
        rg = abs(Gs).max(axis=1).toarray().ravel() if Gs.shape[0] else np.zeros(0)
        for idx in dims.groups.values():
            rg[idx] = rg[idx].max(axis=1, keepdims=True)
        eg = 1.0 / np.sqrt(np.where(rg > 0, rg, 1.0))
        As = sp.diags(ea) @ As @ sp.diags(dc)
        Gs = sp.diags(eg) @ Gs @ sp.diags(dc)
        D *= dc
        EA *= ea
        EG *= eg
    return As.tocsc(), Gs.tocsc(), D, EA, EG


def solve_conic(c, A, b, G, h, dims: ConeDims, options: SolverOptions = None) -> ConicSolution:
    opts = options or SolverOptions()
    t0 = time.perf_counter()
    c = np.asarray(c, dtype=float)
    b = np.asarray(b, dtype=float)
    h = np.asarray(h, dtype=float)
    n = c.size
    A = sp.csc_matrix(A, shape=(b.size, n))
    G = sp.csc_matrix(G, shape=(h.size, n))
    A.sum_duplicates()
    G.sum_duplicates()
    if G.shape[0] != dims.m:
        raise ValueError(f"G has {G.shape[0]} rows but the cone has dimension {dims.m}")

    As, Gs, D, EA, EG = _ruiz(A, G, dims, opts.equilibrate)
    cs, bs, hs = D * c, EA * b, EG * h
    A_t, G_t = A.T.tocsr(), G.T.tocsr()
    nb, nh, nc = max(1.0, _norm(b)), max(1.0, _norm(h)), max(1.0, _norm(c))

    def unscale(x, y, z, s):
        return D * x, EA * y, EG * z, s / EG

    kkt = KKTSystem(As, Gs, dims, static_reg=opts.static_reg, refine_steps=opts.refine_steps)
    kkt.update(None)
    p, m = b.size, dims.m
    e = dims.identity()

    sol = kkt.solve(np.concatenate([np.zeros(n), bs, hs]))
    x = sol[:n]
    s = dims.shift_inside(-sol[n + p:])
    sol = kkt.solve(np.concatenate([-cs, np.zeros(p), np.zeros(m)]))
    y = sol[n:n + p]
    z = dims.shift_inside(sol[n + p:])
    tau, kappa = 1.0, 1.0

    history = []
    status = MAX_ITERATIONS
    info = {}
    last_good = None
    it = 0
    for it in range(opts.max_iter + 1):
        rx = -(As.T @ y) - Gs.T @ z - cs * tau
        ry = As @ x - bs * tau
        rz = s + Gs @ x - hs * tau
        rtau = kappa + cs @ x + bs @ y + hs @ z
        mu = (s @ z + tau * kappa) / (dims.degree + 1)

        xu, yu, zu, su = unscale(x, y, z, s)
        pcost = c @ xu / tau
        dcost = -(b @ yu + h @ zu) / tau
        pres = max(_norm(A @ xu / tau - b) / nb if p else 0.0,
                   _norm(G @ xu / tau + su / tau - h) / nh)
        dres = _norm(A_t @ yu / tau + G_t @ zu / tau + c) / nc
        gap = float(su @ zu) / tau ** 2
        rel_gap = max(gap, abs(pcost - dcost)) / max(1.0, abs(pcost), abs(dcost))
        record = dict(iter=it, pcost=pcost, dcost=dcost, gap=gap, rel_gap=rel_gap,
                      pres=pres, dres=dres, tau=tau, kappa=kappa, mu=mu)
        history.append(record)
        log.debug("ipm iteration", extra={"ipm": record})
        info = record

        if not np.all(np.isfinite([pcost, dcost, pres, dres, mu])):
            status = NUMERICAL_FAILURE
            if last_good is not None:
                x, y, z, s, tau, kappa, info = last_good
                history.pop()
            break
        last_good = (x, y, z, s, tau, kappa, record)
        if pres <= opts.feastol and dres <= opts.feastol and rel_gap <= opts.gaptol:
            status = OPTIMAL
            break
        dual_obj = -(b @ yu + h @ zu)
        if kappa > tau and dual_obj > 0:
            if _norm(A_t @ yu + G_t @ zu) / dual_obj <= opts.feastol:
                status = INFEASIBLE
                break
        primal_obj = -(c @ xu)
        if kappa > tau and primal_obj > 0:
            resid = max(_norm(A @ xu) / nb if p else 0.0, _norm(G @ xu + su) / nh)
            if resid / primal_obj <= opts.feastol:
                status = UNBOUNDED
                break
        if it == opts.max_iter:
            break

        try:
            W = NTScaling(dims, s, z)
            kkt.update(W)
        except (FloatingPointError, ZeroDivisionError, ValueError):
            status = NUMERICAL_FAILURE
            break
        lam = W.lam
        sol2 = kkt.solve(np.concatenate([-cs, bs, hs]))
        x2, y2, z2 = sol2[:n], sol2[n:n + p], sol2[n + p:]
        denom_base = -kappa / tau + cs @ x2 + bs @ y2 + hs @ z2

        def direction(eta, ds_tilde, dk_rhs):
            rhs = np.concatenate([eta * rx, -eta * ry, -eta * rz - W.apply(ds_tilde)])
            s1 = kkt.solve(rhs)
            x1, y1, z1 = s1[:n], s1[n:n + p], s1[n + p:]
            dtau = (-eta * rtau - dk_rhs / tau - (cs @ x1 + bs @ y1 + hs @ z1)) / denom_base
            dx, dy, dz = x1 + dtau * x2, y1 + dtau * y2, z1 + dtau * z2
            ds = W.apply(ds_tilde - W.apply(dz))
            dkappa = (dk_rhs - kappa * dtau) / tau
            return dx, dy, dz, ds, dtau, dkappa

        def step_length(dz, ds, dtau, dkappa):
            alpha = min(dims.max_step(lam, W.apply(ds, inverse=True)),
                        dims.max_step(lam, W.apply(dz)))
            if dtau < 0:
                alpha = min(alpha, -tau / dtau)
            if dkappa < 0:
                alpha = min(alpha, -kappa / dkappa)
            return alpha

        # predictor
        aff = direction(1.0, -lam, -tau * kappa)
        alpha_a = min(1.0, step_length(aff[2], aff[3], aff[4], aff[5]))
        sigma = min(1.0, max(opts.sigma_min, (1.0 - alpha_a) ** 3))
        # corrector
        corr = dims.product(W.apply(aff[3], inverse=True), W.apply(aff[2]))
        ds_tilde = dims.divide(lam, -dims.product(lam, lam) + sigma * mu * e - corr)
        dk_rhs = -tau * kappa + sigma * mu - aff[4] * aff[5]
        dx, dy, dz, ds, dtau, dkappa = direction(1.0 - sigma, ds_tilde, dk_rhs)
        finite = all(np.all(np.isfinite(v)) for v in (dx, dy, dz, ds)) and \
            np.isfinite(dtau) and np.isfinite(dkappa)
        alpha = min(1.0, opts.step_fraction * step_length(dz, ds, dtau, dkappa)) if finite \
            else float("nan")
        record.update(step=alpha, sigma=sigma)
        if not finite or not np.isfinite(alpha) or alpha < opts.min_step:
            status = NUMERICAL_FAILURE
            break
        x = x + alpha * dx
        y = y + alpha * dy
        z = z + alpha * dz
        s = s + alpha * ds
        tau = tau + alpha * dtau
        kappa = kappa + alpha * dkappa

    xu, yu, zu, su = unscale(x, y, z, s)
    if status == INFEASIBLE:
        scale = -(b @ yu + h @ zu)
        xo, yo, zo, so = np.full(n, np.nan), yu / scale, zu / scale, np.full(m, np.nan)
    elif status == UNBOUNDED:
        scale = -(c @ xu)
        xo, yo, zo, so = xu / scale, np.full(p, np.nan), np.full(m, np.nan), su / scale
    else:
        xo, yo, zo, so = xu / tau, yu / tau, zu / tau, su / tau
    return ConicSolution(
        x=xo, y=yo, z=zo, s=so, status=status,
        pcost=info.get("pcost", np.nan), dcost=info.get("dcost", np.nan),
        gap=info.get("gap", np.nan), rel_gap=info.get("rel_gap", np.nan),
        pres=info.get("pres", np.nan), dres=info.get("dres", np.nan),
        iterations=it, history=history, solve_time=time.perf_counter() - t0)
