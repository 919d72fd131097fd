"""Conic programs for the transient and steady-state relaxations.

Columns are laid out step by step (state, rates, influent, then any
auxiliaries created for that step) so that the KKT matrix is block banded.
Rows of ``G`` list the orthant rows first and then the second-order blocks,
as the solver expects.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from . import kinetics as kin
from .discretize import FIXED, PERIODIC, LinearRows, StepHandles, dynamics_rows, steady_rows
from .network import ValidationError
from .solver import ConeDims, Solution

log = logging.getLogger(__name__)


# ---------------------------------------------------------------- objectives


@dataclass(frozen=True)
class SubstrateOutflow:
    """Sum over tanks of ``Q_out_i * eta_i' xi_i``; ``eta`` has shape (s, m)."""

    eta: np.ndarray

    def __post_init__(self):
        eta = np.atleast_2d(np.asarray(self.eta, dtype=float))
        if np.any(eta < 0):
            raise ValidationError("outflow weights eta must be nonnegative")
        object.__setattr__(self, "eta", eta)


@dataclass(frozen=True)
class BiogasMax:
    """``-sum_{i in capture} V_ii sigma_i' T_i``; ``sigma`` has shape (s, r)."""

    sigma: np.ndarray
    capture: tuple

    def __post_init__(self):
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        if np.any(sigma < 0):
            raise ValidationError("biogas weights sigma must be nonnegative")
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "capture", tuple(int(i) for i in self.capture))


@dataclass(frozen=True)
class SetpointTracking:
    """``(xi - target)' A (xi - target)`` with A symmetric positive semidefinite."""

    A: np.ndarray
    target: np.ndarray

    def __post_init__(self):
        A = np.atleast_2d(np.asarray(self.A, dtype=float))
        if A.shape[0] != A.shape[1] or not np.allclose(A, A.T, rtol=0, atol=1e-12):
            raise ValidationError("tracking matrix must be square and symmetric")
        if np.linalg.eigvalsh(A).min() < -1e-10:
            raise ValidationError("tracking matrix must be positive semidefinite")
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "target", np.asarray(self.target, dtype=float).ravel())


@dataclass(frozen=True)
class Composite:
    """Weighted sum of objectives: ``terms`` is a sequence of (weight, objective)."""

    terms: tuple

    def __post_init__(self):
        for w, _ in self.terms:
            if w < 0:
                raise ValidationError("composite weights must be nonnegative")


def _flatten(obj, weight=1.0):
    if isinstance(obj, Composite):
        out = []
        for w, term in obj.terms:
            out.extend(_flatten(term, weight * w))
        return out
    return [(weight, obj)]


def is_linear(obj) -> bool:
    return all(not isinstance(t, SetpointTracking) for _, t in _flatten(obj))


def linear_gradients(obj, schedule, spec: kin.KineticsSpec, step):
    """Constant parts (f_xi, f_phi) of the step objective."""
    s, m, r = spec.n_tanks, spec.n_states, spec.n_reactions
    fxi = np.zeros(s * m)
    fphi = np.zeros(s * r)
    net = schedule.network(step)
    for w, term in _flatten(obj):
        if isinstance(term, SubstrateOutflow):
            eta = np.broadcast_to(term.eta, (s, m))
            fxi += w * (net.outflow_rates[:, None] * eta).ravel()
        elif isinstance(term, BiogasMax):
            sigma = np.broadcast_to(term.sigma, (s, r))
            for i in term.capture:
                fphi[i * r:(i + 1) * r] -= w * net.volumes[i] * sigma[i]
    return fxi, fphi


def objective_gradients(obj, at, schedule, spec: kin.KineticsSpec):
    """Per-step gradients of the state and rate objectives.

    ``at`` is a Solution (or anything with ``xi`` and ``T`` arrays indexed
    by step).  Returns two arrays with one row per entry of ``at.xi``.
    """
    xi = np.asarray(at.xi)
    steps = xi.shape[0]
    fxi = np.zeros_like(xi, dtype=float)
    fphi = np.zeros((steps, spec.n_tanks * spec.n_reactions))
    for n in range(steps):
        step = n if steps > 1 else 1
        if steps > 1 and n == 0:
            fxi[0] = fphi[0] = np.nan
            continue
        a, b = linear_gradients(obj, schedule, spec, step)
        fxi[n] += a
        fphi[n] += b
        for w, term in _flatten(obj):
            if isinstance(term, SetpointTracking):
                fxi[n] += w * 2.0 * term.A @ (xi[n] - term.target)
    return fxi, fphi


# ---------------------------------------------------------------- constraints


@dataclass(frozen=True)
class Allocation:
    """``sum_i Q_in_i(n) * xin_i[entry](n) = totals[n-1]`` for every step."""

    entry: int
    totals: np.ndarray
    name: str = ""

    def __post_init__(self):
        totals = np.atleast_1d(np.asarray(self.totals, dtype=float))
        if np.any(totals < 0):
            raise ValidationError(f"allocation totals for {self.name or self.entry} must be >= 0")
        object.__setattr__(self, "totals", totals)


@dataclass(frozen=True)
class ConstraintSet:
    """Linear side constraints.

    ``influent`` has shape (steps, s, m); NaN marks a free (decision)
    entry, a number fixes it.  ``None`` fixes every influent to zero.
    ``upper_bounds`` has shape (s, m) or (steps, s, m), ``inf`` = none.
    """

    influent: np.ndarray = None
    upper_bounds: np.ndarray = None
    allocations: tuple = ()

    def influent_at(self, step, s, m):
        if self.influent is None:
            return np.zeros((s, m))
        arr = np.asarray(self.influent, dtype=float)
        if arr.ndim == 2:
            return arr
        if arr.shape[0] == 1:
            return arr[0]
        return arr[step - 1]

    def upper_at(self, step, s, m):
        if self.upper_bounds is None:
            return np.full((s, m), np.inf)
        arr = np.asarray(self.upper_bounds, dtype=float)
        if arr.ndim == 2:
            return np.broadcast_to(arr, (s, m))
        return arr[0] if arr.shape[0] == 1 else arr[step - 1]

    def validate(self, s, m, steps):
        if self.influent is not None:
            arr = np.asarray(self.influent, dtype=float)
            if arr.shape[-2:] != (s, m) or (arr.ndim == 3 and arr.shape[0] not in (1, steps)):
                raise ValidationError(
                    f"influent has shape {arr.shape}, expected ({steps}, {s}, {m})")
            if np.any(arr[~np.isnan(arr)] < 0):
                raise ValidationError("fixed influent values must be nonnegative")
        if self.upper_bounds is not None:
            arr = np.asarray(self.upper_bounds, dtype=float)
            if arr.shape[-2:] != (s, m):
                raise ValidationError(f"upper_bounds has shape {arr.shape}, expected (.., {s}, {m})")
        for alloc in self.allocations:
            if not 0 <= alloc.entry < m:
                raise ValidationError(f"allocation entry {alloc.entry} outside 0..{m - 1}")
            if alloc.totals.size not in (1, steps):
                raise ValidationError(
                    f"allocation {alloc.name or alloc.entry} has {alloc.totals.size} totals, "
                    f"expected {steps}")


# ---------------------------------------------------------------- program


@dataclass
class ConicProgram:
    """``min c'x  s.t.  A x = b,  h - G x in K`` plus column fixings.

    ``fixed_mask``/``fixed_values`` mark columns held at a value; they are
    removed by ``presolve``.  Equality rows are stored with unit infinity
    norm; ``meta["row_scale"]`` holds the factors applied.  ``handles`` maps model quantities to columns,
    ``kinetics_map`` (rs*steps x rows-of-G) turns cone duals into the
    multipliers of ``T <= phi``.
    """

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    dims: ConeDims
    col_labels: list
    row_labels: list
    cone_tags: np.ndarray
    fixed_mask: np.ndarray
    fixed_values: np.ndarray
    handles: StepHandles = None
    kinetics_map: sp.csr_matrix = None
    mode: str = "transient"
    objective_constant: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def n_vars(self) -> int:
        return self.c.size

    def summary(self) -> dict:
        return dict(mode=self.mode, columns=self.n_vars, free_columns=int((~self.fixed_mask).sum()),
                    equalities=self.b.size, cone_rows=self.dims.m, orthant=self.dims.l,
                    soc_blocks=len(self.dims.q))

    def presolve(self) -> "ReducedProgram":
        return ReducedProgram(self)

    def residuals(self, x) -> dict:
        """Row residuals of a full primal vector."""
        s = self.h - self.G @ x
        return dict(equality=self.A @ x - self.b, cone_slack=s,
                    cone_violation=max(0.0, -self.dims.inner_margin(s)) if self.dims.m else 0.0,
                    fixed=x[self.fixed_mask] - self.fixed_values[self.fixed_mask])

    def pack(self, xi, T, xin, aux=None) -> np.ndarray:
        """Full column vector from model blocks (inverse of ``unpack``)."""
        x = np.zeros(self.n_vars)
        hd = self.handles
        rows = range(hd.xi.shape[0])
        for n in rows:
            x[hd.xi[n]] = xi[n]
        for arr, vals in ((hd.T, T), (hd.xin, xin)):
            for n in rows:
                if arr[n][0] >= 0:
                    x[arr[n]] = vals[n]
        if aux is not None:
            for col, val in aux.items():
                x[col] = val
        x[self.fixed_mask] = self.fixed_values[self.fixed_mask]
        return x

    def unpack(self, solution: Solution) -> dict:
        hd = self.handles
        x = solution.x

        def take(cols):
            out = np.full(cols.shape, np.nan)
            ok = cols >= 0
            out[ok] = x[cols[ok]]
            return out

        blocks = dict(xi=take(hd.xi), T=take(hd.T), xin=take(hd.xin))
        dyn = np.array([i for i, lab in enumerate(self.row_labels)
                        if lab[0] in ("dynamics", "steady")], dtype=int)
        ms = hd.xi.shape[1]
        y = solution.y * self.meta.get("row_scale", 1.0)
        lam = -y[dyn].reshape(-1, ms) if dyn.size else np.zeros((0, ms))
        rs = hd.T.shape[1]
        rho = (self.kinetics_map @ solution.z).reshape(-1, rs) if rs else \
            np.zeros((lam.shape[0], 0))
        if self.mode == "transient":
            pad = np.full((1, ms), np.nan)
            blocks["lam"] = np.vstack([pad, lam])
            blocks["rho"] = np.vstack([np.full((1, rs), np.nan), rho])
        else:
            blocks["lam"], blocks["rho"] = lam, rho
        # multipliers of T >= 0 rows, mapped like rho
        blocks["rate_floor_dual"] = self._rate_floor_dual(solution.z, blocks["T"].shape)
        upper = self.cone_tags == "upper"
        blocks["upper_active"] = bool(upper.any() and np.any(
            solution.z[:self.dims.l][upper[:self.dims.l]] > 1e-7 * max(1.0, np.abs(solution.z).max())))
        return blocks

    def _rate_floor_dual(self, z, shape):
        out = np.zeros(shape)
        rows = self.meta.get("rate_floor_rows")
        if rows is None:
            return out
        out.flat[rows[0]] = z[rows[1]]
        return out

    def dependent_rows(self, max_dense=6_000_000):
        """Indices of equality rows dependent on earlier ones (dense QR; small programs only)."""
        free = ~self.fixed_mask
        A = self.A[:, free]
        if A.shape[0] == 0:
            return []
        if A.shape[0] * A.shape[1] > max_dense:
            return None
        _, R, piv = scipy.linalg.qr(A.T.toarray(), mode="economic", pivoting=True)
        diag = np.abs(np.diag(R))
        tol = max(A.shape) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
        rank = int((diag > tol).sum())
        return sorted(int(i) for i in piv[rank:])


class ReducedProgram:
    """Program with fixed columns substituted out."""

    def __init__(self, program: ConicProgram, tol=1e-9):
        self.program = program
        free = ~program.fixed_mask
        xf = np.where(program.fixed_mask, program.fixed_values, 0.0)
        self.free = free
        A, G = program.A.tocsc(), program.G.tocsc()
        self.c = program.c[free]
        self.constant = program.objective_constant + float(program.c @ xf)
        b = program.b - A @ xf
        self.h = program.h - G @ xf
        Af = A[:, free].tocsr()
        empty = np.diff(Af.indptr) == 0
        if np.any(np.abs(b[empty]) > tol * max(1.0, np.abs(program.b).max(initial=0.0))):
            bad = np.flatnonzero(empty & (np.abs(b) > tol))[0]
            raise ValidationError(
                f"equality row {program.row_labels[bad]} involves only fixed columns "
                f"and is violated by {b[bad]:.3g}")
        self.keep_rows = np.flatnonzero(~empty)
        self.A = Af[self.keep_rows]
        self.b = b[self.keep_rows]
        self.G = G[:, free].tocsr()
        self.dims = program.dims
        dep = program.dependent_rows()
        if dep:
            log.warning("equality rows are linearly dependent: %s",
                        [program.row_labels[i] for i in dep[:10]])
        self.dependent = dep

    def expand(self, raw) -> Solution:
        prog = self.program
        n = prog.n_vars
        x = np.where(prog.fixed_mask, prog.fixed_values, 0.0)
        x[self.free] = raw.x
        y = np.zeros(prog.b.size)
        y[self.keep_rows] = raw.y
        z = raw.z
        stat = prog.c + prog.A.T @ y + prog.G.T @ z
        fixed_duals = {int(j): float(-stat[j]) for j in np.flatnonzero(prog.fixed_mask)}
        sol = Solution(x=x, y=y, z=z, s=raw.s, status=raw.status,
                       objective=raw.pcost + self.constant,
                       dual_objective=raw.dcost + self.constant,
                       gap=raw.gap, rel_gap=raw.rel_gap, pres=raw.pres, dres=raw.dres,
                       iterations=raw.iterations, solve_time=raw.solve_time,
                       fixed_duals=fixed_duals, history=raw.history)
        if raw.status in ("optimal", "max-iterations", "numerical-failure") and \
                prog.handles is not None and np.all(np.isfinite(x)):
            sol.blocks.update(prog.unpack(sol))
        return sol


class _Builder:
    def __init__(self):
        self.labels = []
        self.fixed = {}
        self.eq_parts = []
        self.lp = []    # (coefs dict, const, tag, owner)
        self.soc = []   # (ConeBlock, owner)

    def var(self, label, fixed=None):
        j = len(self.labels)
        self.labels.append(label)
        if fixed is not None:
            self.fixed[j] = float(fixed)
        return j

    def vars(self, labels, fixed=None):
        out = np.empty(len(labels), dtype=np.int64)
        for k, lab in enumerate(labels):
            fv = None if fixed is None or np.isnan(fixed[k]) else fixed[k]
            out[k] = self.var(lab, fv)
        return out

    def add_block(self, block: kin.ConeBlock, owner=(-1, -1)):
        if block.kind == "nonneg":
            for coefs, const in block.rows:
                self.lp.append((coefs, const, block.tag, owner))
        else:
            self.soc.append((block, owner))

    def nonneg(self, col, const=0.0, coef=1.0, tag="", owner=(-1, -1)):
        self.lp.append(({int(col): coef}, const, tag, owner))

    def finish(self, c_entries, handles, mode, rs, steps, meta):
        n = len(self.labels)
        c = np.zeros(n)
        for j, v in c_entries:
            c[j] += v
        eq = LinearRows.concat(self.eq_parts)
        A = eq.matrix(n).tocsr()
        # unit infinity-norm rows; multipliers are mapped back in ``unpack``
        row_max = np.zeros(A.shape[0])
        if A.nnz:
            np.maximum.at(row_max, np.repeat(np.arange(A.shape[0]), np.diff(A.indptr)),
                          np.abs(A.data))
        row_scale = np.where(row_max > 0, 1.0 / np.where(row_max > 0, row_max, 1.0), 1.0)
        A = sp.diags(row_scale) @ A
        rhs = row_scale * eq.rhs
        rows, cols, vals, h, tags, owners = [], [], [], [], [], []
        r = 0
        for coefs, const, tag, owner in self.lp:
            for j, v in coefs.items():
                rows.append(r), cols.append(j), vals.append(-v)
            h.append(const), tags.append(tag), owners.append(owner)
            r += 1
        q = []
        for block, owner in self.soc:
            for coefs, const in block.rows:
                for j, v in coefs.items():
                    rows.append(r), cols.append(j), vals.append(-v)
                h.append(const), tags.append(block.tag), owners.append(owner)
                r += 1
            q.append(len(block.rows))
        G = sp.csr_matrix((vals, (rows, cols)), shape=(r, n))
        dims = ConeDims(len(self.lp), q)
        fixed_mask = np.zeros(n, dtype=bool)
        fixed_values = np.zeros(n)
        for j, v in self.fixed.items():
            fixed_mask[j] = True
            fixed_values[j] = v
        tags = np.array(tags, dtype=object)
        # kinetics multipliers: rho(n, j) = sum over its rows of G[row, T(n, j)] z[row]
        owners = np.array(owners, dtype=np.int64).reshape(-1, 2)
        kin_rows = np.flatnonzero((tags == "kinetics") & (owners[:, 0] >= 0))
        Tcols = handles.T
        Gc = G.tocsr()
        kr, kc, kv = [], [], []
        for row in kin_rows:
            n_step, j = owners[row]
            col = Tcols[n_step, j]
            coef = Gc[row, col]
            if coef != 0.0:
                target = (n_step - 1) * rs + j if mode == "transient" else j
                kr.append(target), kc.append(row), kv.append(coef)
        kmap = sp.csr_matrix((kv, (kr, kc)), shape=(steps * rs, r))
        floor = np.flatnonzero(tags == "rate_nonneg")
        meta = dict(meta)
        meta["rate_floor_rows"] = (
            np.array([owners[k, 0] * rs + owners[k, 1] for k in floor], dtype=np.int64), floor)
        meta["row_scale"] = row_scale
        return ConicProgram(c=c, A=A.tocsr(), b=rhs, G=G, h=np.array(h, dtype=float),
                            dims=dims, col_labels=self.labels, row_labels=eq.labels,
                            cone_tags=tags, fixed_mask=fixed_mask, fixed_values=fixed_values,
                            handles=handles, kinetics_map=kmap, mode=mode, meta=meta)


def _tracking_factor(term: SetpointTracking):
    w, Q = np.linalg.eigh(term.A)
    keep = w > 1e-12 * max(1.0, w.max(initial=0.0))
    return np.sqrt(w[keep])[:, None] * Q[:, keep].T


def _emit_step(bld: _Builder, scenario, step, xi_cols, T_cols, xin_cols, c_entries,
               kin_step, owner_step):
    """Cones, bounds, objective terms of one period."""
    spec = scenario.kinetics
    s, m, r = spec.n_tanks, spec.n_states, spec.n_reactions
    cons = scenario.constraints
    for k, col in enumerate(xi_cols):
        bld.nonneg(col, tag="state_nonneg")
    upper = cons.upper_at(step, s, m).ravel()
    for k in np.flatnonzero(np.isfinite(upper)):
        bld.nonneg(xi_cols[k], const=upper[k], coef=-1.0, tag="upper")
    for k, col in enumerate(xin_cols):
        if col not in bld.fixed:
            bld.nonneg(col, tag="influent_nonneg")
    for i in range(s):
        for j, model in enumerate(spec.reactions[i]):
            g = i * r + j
            owner = (owner_step, g)
            bld.nonneg(T_cols[g], tag="rate_nonneg", owner=owner)
            blocks = kin.soc_rows(model, xi_cols[i * m:(i + 1) * m], int(T_cols[g]), kin_step,
                                  new_var=lambda kind, i=i, j=j: bld.var(("aux", i, j, step)))
            for blk in blocks:
                bld.add_block(blk, owner if blk.tag == "kinetics" else (-1, -1))
    fxi, fphi = linear_gradients(scenario.objective, scenario.network, spec, step)
    c_entries.extend(zip(xi_cols, fxi))
    c_entries.extend(zip(T_cols, fphi))
    for w, term in _flatten(scenario.objective):
        if isinstance(term, SetpointTracking):
            R = _tracking_factor(term)
            t = bld.var(("epigraph", -1, -1, step))
            rt = R @ term.target
            rows = [({t: 1.0}, 1.0), ({t: 1.0}, -1.0)]
            for k in range(R.shape[0]):
                rows.append(({int(xi_cols[j]): 2.0 * R[k, j] for j in np.flatnonzero(R[k])},
                             -2.0 * rt[k]))
            bld.add_block(kin.ConeBlock("soc", rows, "epigraph"))
            c_entries.append((t, w))


def _allocation_rows(scenario, step, xin_cols, row_step):
    spec = scenario.kinetics
    s, m = spec.n_tanks, spec.n_states
    q_in = scenario.network.network(step).inflow_rates
    parts = []
    for alloc in scenario.constraints.allocations:
        total = alloc.totals[0] if alloc.totals.size == 1 else alloc.totals[row_step - 1]
        cols = np.array([xin_cols[i * m + alloc.entry] for i in range(s)])
        parts.append(LinearRows(np.zeros(s, dtype=int), cols, q_in.astype(float),
                                np.array([total]), [("allocation", row_step, alloc.name or alloc.entry)]))
    return parts


def _validate(scenario, steps):
    spec = scenario.kinetics
    if scenario.network.n_tanks != spec.n_tanks:
        raise ValidationError(
            f"network has {scenario.network.n_tanks} tanks, kinetics {spec.n_tanks}")
    scenario.constraints.validate(spec.n_tanks, spec.n_states, steps)


def build_transient(scenario) -> ConicProgram:
    """Relaxed trajectory program: dynamics rows, ``T <= phi`` cones, side constraints."""
    grid = scenario.grid
    tau = grid.tau
    _validate(scenario, tau)
    scenario.network.check_horizon(tau)
    spec = scenario.kinetics
    s, m, r = spec.n_tanks, spec.n_states, spec.n_reactions
    ms, rs = s * m, s * r
    bld = _Builder()
    xi = -np.ones((tau + 1, ms), dtype=np.int64)
    T = -np.ones((tau + 1, rs), dtype=np.int64)
    xin = -np.ones((tau + 1, ms), dtype=np.int64)
    periodic = scenario.boundary == PERIODIC
    if not periodic:
        if scenario.boundary != FIXED:
            raise ValidationError(f"unknown boundary type {scenario.boundary!r}")
        x0 = np.asarray(scenario.initial_state, dtype=float).ravel()
        if x0.size != ms:
            raise ValidationError(f"initial state has {x0.size} entries, expected {ms}")
        xi[0] = bld.vars([("xi", i, k, 0) for i in range(s) for k in range(m)], x0)
    c_entries = []
    for n in grid.steps:
        xi[n] = bld.vars([("xi", i, k, n) for i in range(s) for k in range(m)])
        T[n] = bld.vars([("T", i, j, n) for i in range(s) for j in range(r)])
        fixed_in = scenario.constraints.influent_at(n, s, m).ravel()
        xin[n] = bld.vars([("xin", i, k, n) for i in range(s) for k in range(m)], fixed_in)
        _emit_step(bld, scenario, n, xi[n], T[n], xin[n], c_entries, n, n)
    if periodic:
        xi[0] = xi[tau]
    handles = StepHandles(xi=xi, T=T, xin=xin)
    bld.eq_parts.append(dynamics_rows(scenario.network, spec, grid, handles))
    for n in grid.steps:
        bld.eq_parts.extend(_allocation_rows(scenario, n, xin[n], n))
    return bld.finish(c_entries, handles, "transient", rs, tau,
                      dict(boundary=scenario.boundary, tau=tau, delta=grid.delta))


def build_steady_state(scenario) -> ConicProgram:
    """Single-period program ``0 = Vh K T + Nh xi + Ch xin`` with ``T <= phi``."""
    if not scenario.network.is_constant:
        raise ValidationError("steady-state programs need a constant network; "
                              "a time-varying schedule was supplied")
    _validate(scenario, 1)
    spec = scenario.kinetics
    s, m, r = spec.n_tanks, spec.n_states, spec.n_reactions
    ms, rs = s * m, s * r
    bld = _Builder()
    xi = bld.vars([("xi", i, k, 1) for i in range(s) for k in range(m)])
    T = bld.vars([("T", i, j, 1) for i in range(s) for j in range(r)])
    xin = bld.vars([("xin", i, k, 1) for i in range(s) for k in range(m)],
                   scenario.constraints.influent_at(1, s, m).ravel())
    handles = StepHandles(xi=xi[None, :], T=T[None, :], xin=xin[None, :])
    c_entries = []
    _emit_step(bld, scenario, 1, xi, T, xin, c_entries, None, 0)
    bld.eq_parts.append(steady_rows(scenario.network, spec, xi, T, xin))
    bld.eq_parts.extend(_allocation_rows(scenario, 1, xin, 1))
    return bld.finish(c_entries, handles, "steady", rs, 1, dict(boundary="steady"))


# ---------------------------------------------------------------- interchange file

INTERCHANGE_HEADER = "# sparse conic program v1"


def write_interchange(program: ConicProgram, path) -> None:
    """Plain-text listing: minimize c'x subject to A x = b, h - G x in K.

    Line records, whitespace separated:
      vars n / eqs p / cones m
      c j v, A i j v, b i v, G i j v, h i v    (zero-based, nonzeros only)
      orthant l, soc d (one line per block, in row order)
      fix j v                                   (column fixings)
      col j quantity tank entry step            (column bookkeeping)
      row i kind step entry                     (equality row labels)
    """
    lines = [INTERCHANGE_HEADER, f"mode {program.mode}",
             f"vars {program.n_vars}", f"eqs {program.b.size}", f"cones {program.dims.m}",
             f"orthant {program.dims.l}"]
    lines += [f"soc {d}" for d in program.dims.q]
    lines += [f"c {j} {float(program.c[j])!r}" for j in np.flatnonzero(program.c)]
    for name, M in (("A", program.A), ("G", program.G)):
        coo = M.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines += [f"{name} {coo.row[k]} {coo.col[k]} {float(coo.data[k])!r}" for k in order]
    lines += [f"b {i} {float(program.b[i])!r}" for i in np.flatnonzero(program.b)]
    lines += [f"h {i} {float(program.h[i])!r}" for i in np.flatnonzero(program.h)]
    lines += [f"fix {j} {float(program.fixed_values[j])!r}" for j in np.flatnonzero(program.fixed_mask)]
    lines += ["col {} {}".format(j, " ".join(str(v) for v in lab))
              for j, lab in enumerate(program.col_labels)]
    lines += ["row {} {}".format(i, " ".join(str(v) for v in lab))
              for i, lab in enumerate(program.row_labels)]
    lines.append("end")
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


@dataclass
class InterchangeProgram:
    """A program read back from an interchange file (no model handles)."""

    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    G: sp.csr_matrix
    h: np.ndarray
    dims: ConeDims
    fixed_mask: np.ndarray
    fixed_values: np.ndarray
    col_labels: list
    row_labels: list
    mode: str = ""

    def presolve(self):
        prog = ConicProgram(c=self.c, A=self.A, b=self.b, G=self.G, h=self.h, dims=self.dims,
                            col_labels=self.col_labels, row_labels=self.row_labels,
                            cone_tags=np.array([""] * self.dims.m, dtype=object),
                            fixed_mask=self.fixed_mask, fixed_values=self.fixed_values,
                            kinetics_map=sp.csr_matrix((0, self.dims.m)), mode=self.mode)
        return ReducedProgram(prog)


def read_interchange(path) -> InterchangeProgram:
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0].strip() != INTERCHANGE_HEADER:
        raise ValidationError(f"{path}: not a sparse conic program file")
    n = p = m = l = 0
    q, mode = [], ""
    trip = {"A": ([], [], []), "G": ([], [], [])}
    vec = {"c": {}, "b": {}, "h": {}, "fix": {}}
    cols, rows = {}, {}

    def label(parts):
        return tuple(int(v) if v.lstrip("-").isdigit() else v for v in parts)

    for lineno, line in enumerate(lines[1:], start=2):
        parts = line.split()
        if not parts or parts[0].startswith("#"):
            continue
        key = parts[0]
        try:
            if key == "end":
                break
            if key == "mode":
                mode = parts[1]
            elif key == "vars":
                n = int(parts[1])
            elif key == "eqs":
                p = int(parts[1])
            elif key == "cones":
                m = int(parts[1])
            elif key == "orthant":
                l = int(parts[1])
            elif key == "soc":
                q.append(int(parts[1]))
            elif key in trip:
                r, c, v = trip[key]
                r.append(int(parts[1])), c.append(int(parts[2])), v.append(float(parts[3]))
            elif key in vec:
                vec[key][int(parts[1])] = float(parts[2])
            elif key == "col":
                cols[int(parts[1])] = label(parts[2:])
            elif key == "row":
                rows[int(parts[1])] = label(parts[2:])
            else:
                raise ValueError(f"unknown record {key!r}")
        except (IndexError, ValueError) as exc:
            raise ValidationError(f"{path}:{lineno}: {exc}") from None
    dims = ConeDims(l, q)
    if dims.m != m:
        raise ValidationError(f"{path}: cone sizes add to {dims.m}, header says {m}")

    def dense(d, size):
        out = np.zeros(size)
        for k, v in d.items():
            out[k] = v
        return out

    A = sp.csr_matrix((trip["A"][2], (trip["A"][0], trip["A"][1])), shape=(p, n))
    G = sp.csr_matrix((trip["G"][2], (trip["G"][0], trip["G"][1])), shape=(m, n))
    fixed_mask = np.zeros(n, dtype=bool)
    fixed_mask[list(vec["fix"])] = True
    return InterchangeProgram(c=dense(vec["c"], n), A=A, b=dense(vec["b"], p), G=G,
                              h=dense(vec["h"], m), dims=dims, fixed_mask=fixed_mask,
                              fixed_values=dense(vec["fix"], n),
                              col_labels=[cols.get(j, ()) for j in range(n)],
                              row_labels=[rows.get(i, ()) for i in range(p)], mode=mode)
