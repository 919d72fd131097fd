"""Regularized quasi-definite KKT system with iterative refinement.

    [ dI   A'   G'       ] [x]   [r1]
    [ A   -dI   0        ] [y] = [r2]
    [ G    0   -W^2 - dI ] [z]   [r3]

The pattern (and the fill-reducing order) is fixed for a problem; only
the W^2 blocks change between iterations.
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .cones import ConeDims
from .ldl import LDLFactor, fill_reducing_order


class KKTSystem:
    def __init__(self, A: sp.csc_matrix, G: sp.csc_matrix, dims: ConeDims,
                 static_reg=1e-8, refine_steps=10, refine_tol=1e-14, fallback_tol=1e-9):
        self.A, self.G, self.dims = A.tocsr(), G.tocsr(), dims
        self.AT, self.GT = self.A.T.tocsr(), self.G.T.tocsr()
        n, p, m = A.shape[1], A.shape[0], G.shape[0]
        self.n, self.p, self.m = n, p, m
        self.size = n + p + m
        self.static_reg = static_reg
        self.refine_steps, self.refine_tol = refine_steps, refine_tol
        self.fallback_tol = fallback_tol
        self._exact_lu = None

        rows, cols, vals = [], [], []

        def add(r, c, v):
            rows.append(np.asarray(r, dtype=np.int64))
            cols.append(np.asarray(c, dtype=np.int64))
            vals.append(np.asarray(v, dtype=float))

        add(np.arange(n), np.arange(n), np.full(n, static_reg))
        Ac = sp.coo_matrix(A)
        add(Ac.col, n + Ac.row, Ac.data)
        Gc = sp.coo_matrix(G)
        add(Gc.col, n + p + Gc.row, Gc.data)
        add(n + np.arange(p), n + np.arange(p), np.full(p, -static_reg))
        self._w_start = sum(len(r) for r in rows)
        off = n + p
        add(off + np.arange(dims.l), off + np.arange(dims.l), -np.ones(dims.l))
        self._soc_layout = {}
        for dim, idx in dims.groups.items():
            iu, ju = np.triu_indices(dim)
            r = (off + idx[:, iu]).ravel()
            c = (off + idx[:, ju]).ravel()
            self._soc_layout[dim] = (iu, ju)
            add(r, c, -np.ones(r.size))
        rows, cols = np.concatenate(rows), np.concatenate(cols)
        self._vals = np.concatenate(vals)
        self._w_count = self._vals.size - self._w_start

        pattern = sp.coo_matrix((np.ones(rows.size), (rows, cols)), shape=(self.size,) * 2)
        # cone rows go first so no column is eliminated against its tiny
        # regularization pivot before the scaling blocks reach it
        perm = fill_reducing_order(pattern)
        group = np.where(perm < n, 1, np.where(perm < n + p, 2, 0))
        self.perm = perm[np.argsort(group, kind="stable")]
        pinv = np.empty_like(self.perm)
        pinv[self.perm] = np.arange(self.size)
        pr, pc = pinv[rows], pinv[cols]
        lo, hi = np.minimum(pr, pc), np.maximum(pr, pc)
        order = np.lexsort((lo, hi))
        self._order = order
        self._Ai = lo[order]
        self._Ap = np.zeros(self.size + 1, dtype=np.int64)
        np.cumsum(np.bincount(hi, minlength=self.size), out=self._Ap[1:])
        signs = np.concatenate([np.ones(n), -np.ones(p + m)])
        self.factor = LDLFactor(self._Ap, self._Ai, signs[self.perm])
        self._W2diag = np.ones(dims.l)
        self._W2blocks = {d: np.broadcast_to(np.eye(d), (idx.shape[0], d, d))
                          for d, idx in dims.groups.items()}
        self.scaling = None

    @property
    def factor_nnz(self) -> int:
        return int(self.factor.Lp[-1])

    def update(self, scaling=None):
        """Refactor with W^2 from ``scaling`` (identity when None)."""
        self.scaling = scaling
        if scaling is not None:
            self._W2diag, self._W2blocks = scaling.squared_blocks()
        else:
            self._W2diag = np.ones(self.dims.l)
            self._W2blocks = {d: np.broadcast_to(np.eye(d), (idx.shape[0], d, d))
                              for d, idx in self.dims.groups.items()}
        w = [-self._W2diag - self.static_reg]
        for dim, (iu, ju) in self._soc_layout.items():
            blk = -self._W2blocks[dim][:, iu, ju]
            blk[:, iu == ju] -= self.static_reg
            w.append(blk.ravel())
        vals = self._vals.copy()
        vals[self._w_start:] = np.concatenate(w) if w else vals[self._w_start:]
        self.factor.factor(vals[self._order])
        self._exact_lu = None
        return self

    def _exact_matrix(self):
        m, l = self.m, self.dims.l
        rows, cols, vals = [np.arange(l)], [np.arange(l)], [self._W2diag]
        for dim, idx in self.dims.groups.items():
            rows.append(np.repeat(idx, dim, axis=1).ravel())
            cols.append(np.tile(idx, (1, dim)).ravel())
            vals.append(np.asarray(self._W2blocks[dim]).ravel())
        W2 = sp.csc_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                           shape=(m, m))
        return sp.bmat([[None, self.AT, self.GT], [self.A, None, None], [self.G, None, -W2]],
                       format="csc")

    def _fallback_solve(self, rhs):
        # the regularized factor can lose every digit when the quasi-definite
        # Schur complement is nearly singular; a pivoting LU does not
        if self._exact_lu is None:
            try:
                self._exact_lu = spla.splu(self._exact_matrix())
            except RuntimeError:
                self._exact_lu = False
        return self._exact_lu.solve(rhs) if self._exact_lu else None

    def _apply_W2(self, v):
        out = np.empty_like(v)
        l = self.dims.l
        out[:l] = self._W2diag * v[:l]
        for dim, idx in self.dims.groups.items():
            out[idx] = np.einsum("kij,kj->ki", self._W2blocks[dim], v[idx])
        return out

    def matvec(self, sol):
        """Unregularized KKT product."""
        n, p = self.n, self.p
        x, y, z = sol[:n], sol[n:n + p], sol[n + p:]
        return np.concatenate([self.AT @ y + self.GT @ z,
                               self.A @ x,
                               self.G @ x - self._apply_W2(z)])

    def _raw_solve(self, rhs):
        out = np.empty_like(rhs)
        out[self.perm] = self.factor.solve(rhs[self.perm])
        return out

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        sol = self._raw_solve(rhs)
        scale = 1.0 + np.max(np.abs(rhs))
        err = rhs - self.matvec(sol)
        err_norm = np.max(np.abs(err))
        for _ in range(self.refine_steps):
            if err_norm <= self.refine_tol * scale:
                break
            trial = sol + self._raw_solve(err)
            trial_err = rhs - self.matvec(trial)
            trial_norm = np.max(np.abs(trial_err))
            if not trial_norm < err_norm:
                break
            sol, err, err_norm = trial, trial_err, trial_norm
        if not err_norm <= self.fallback_tol * scale:
            alt = self._fallback_solve(rhs)
            if alt is not None and np.all(np.isfinite(alt)):
                alt_norm = np.max(np.abs(rhs - self.matvec(alt)))
                if alt_norm < err_norm or not np.isfinite(err_norm):
                    sol = alt
        return sol
