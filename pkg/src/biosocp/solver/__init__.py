"""Embedded sparse conic interior-point solver.

``solve`` takes any program object exposing ``presolve()`` (see
:class:`biosocp.program.ConicProgram`) and returns a :class:`Solution`
with primal values for every program column and duals for every row.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .cones import ConeDims, NTScaling
from .ipm import (INFEASIBLE, MAX_ITERATIONS, NUMERICAL_FAILURE, OPTIMAL, UNBOUNDED,
                  ConicSolution, SolverOptions, solve_conic)

__all__ = ["ConeDims", "NTScaling", "Solution", "SolverOptions", "ConicSolution", "solve",
           "solve_conic", "verify_kkt", "KKTReport", "OPTIMAL", "INFEASIBLE", "UNBOUNDED",
           "MAX_ITERATIONS", "NUMERICAL_FAILURE"]


@dataclass
class Solution:
    """Solver output in program coordinates.

    ``x`` covers every program column (fixed ones included), ``y`` every
    equality row and ``z``/``s`` every cone row.  ``fixed_duals`` are the
    reconstructed multipliers of the fixings removed in presolve.  Named
    blocks (``xi``, ``T``, ``xin``, ``lam``, ``rho``) are filled in by the
    program that produced the solve.
    """

    x: np.ndarray
    y: np.ndarray
    z: np.ndarray
    s: np.ndarray
    status: str
    objective: float
    dual_objective: float
    gap: float
    rel_gap: float
    pres: float
    dres: float
    iterations: int
    solve_time: float = 0.0
    fixed_duals: dict = field(default_factory=dict)
    history: list = field(default_factory=list)
    blocks: dict = field(default_factory=dict)

    @property
    def optimal(self) -> bool:
        return self.status == OPTIMAL

    def __getattr__(self, name):
        blocks = self.__dict__.get("blocks", {})
        if name in blocks:
            return blocks[name]
        raise AttributeError(name)


def solve(program, options: SolverOptions = None) -> Solution:
    """Presolve, run the interior-point method and map back to the program."""
    if isinstance(options, dict):
        options = SolverOptions.from_dict(options)
    reduced = program.presolve()
    raw = solve_conic(reduced.c, reduced.A, reduced.b, reduced.G, reduced.h,
                      reduced.dims, options)
    return reduced.expand(raw)


@dataclass
class KKTReport:
    primal: float
    dual: float
    complementarity: float
    gap: float
    tol: float = 1e-7

    @property
    def passed(self) -> bool:
        return max(self.primal, self.dual, self.complementarity, self.gap) <= self.tol

    def as_dict(self):
        return dict(primal=self.primal, dual=self.dual, complementarity=self.complementarity,
                    gap=self.gap, tol=self.tol, passed=self.passed)


def _cone_violation(dims: ConeDims, u) -> float:
    return max(0.0, -dims.inner_margin(u)) if dims.m else 0.0


def verify_kkt(program, solution, tol=1e-7) -> KKTReport:
    """Infinity-norm optimality residuals, each scaled by max(1, data norm).

    primal: equality and cone-row residuals plus cone violation of s.
    dual: stationarity residual plus cone violation of z.
    complementarity: max |s_i z_i| per orthant entry / |s'z| per cone block.
    gap: |c'x - dual objective| relative to max(1, |c'x|).
    """
    c, A, b, G, h, dims = program.c, program.A, program.b, program.G, program.h, program.dims
    x, y, z = solution.x, solution.y, solution.z
    s = h - G @ x
    nb = max(1.0, np.max(np.abs(b)) if b.size else 0.0)
    nh = max(1.0, np.max(np.abs(h)) if h.size else 0.0)
    nc = max(1.0, np.max(np.abs(c)) if c.size else 0.0)
    primal = max(np.max(np.abs(A @ x - b)) / nb if b.size else 0.0,
                 _cone_violation(dims, s) / nh)
    stat = c + A.T @ y + G.T @ z
    fixed = getattr(program, "fixed_mask", None)
    fixed_term = 0.0
    if fixed is not None:
        # multipliers of the column fixings absorb their stationarity rows
        fixed_term = float(stat[fixed] @ x[fixed])
        stat = stat[~fixed]
    dual = max(np.max(np.abs(stat)) / nc if stat.size else 0.0, _cone_violation(dims, z) / nc)
    comp = [np.abs(s[:dims.l] * z[:dims.l])]
    for idx in dims.groups.values():
        comp.append(np.abs(np.einsum("ij,ij->i", s[idx], z[idx])))
    comp = np.concatenate(comp) if comp else np.zeros(0)
    pobj = c @ x
    dobj = -(b @ y) - h @ z + fixed_term
    scale = max(1.0, abs(pobj))
    return KKTReport(primal=float(primal), dual=float(dual),
                     complementarity=float(comp.max() / scale if comp.size else 0.0),
                     gap=float(abs(pobj - dobj) / scale), tol=tol)
