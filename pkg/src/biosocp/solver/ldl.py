"""Sparse LDL' factorization of quasi-definite matrices.

Up-looking factorization on the elimination tree, after the QDLDL scheme.
The input is the upper triangle in CSC form of a symmetric matrix that is
already permuted.  Pivots whose sign disagrees with the expected one (or
that are tiny) are replaced by a signed regularization constant.
"""

from __future__ import annotations

import numba
import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import reverse_cuthill_mckee

_UNUSED = 0
_USED = 1


@numba.njit(cache=True)
def _etree(n, Ap, Ai):
    work = np.zeros(n, dtype=np.int64)
    Lnz = np.zeros(n, dtype=np.int64)
    etree = -np.ones(n, dtype=np.int64)
    for j in range(n):
        work[j] = j
        for p in range(Ap[j], Ap[j + 1]):
            i = Ai[p]
            if i > j:
                return etree, Lnz, False
            while work[i] != j:
                if etree[i] == -1:
                    etree[i] = j
                Lnz[i] += 1
                work[i] = j
                i = etree[i]
    return etree, Lnz, True


@numba.njit(cache=True)
def _factor(n, Ap, Ai, Ax, Lp, etree, signs, eps, delta, Li, Lx, D, Dinv):
    y_markers = np.zeros(n, dtype=np.int64)
    y_idx = np.zeros(n, dtype=np.int64)
    elim = np.zeros(n, dtype=np.int64)
    next_space = Lp[:-1].copy()
    y_vals = np.zeros(n)
    n_fixed = 0
    for k in range(n):
        D[k] = 0.0
        nnz_y = 0
        for p in range(Ap[k], Ap[k + 1]):
            bidx = Ai[p]
            if bidx == k:
                D[k] = Ax[p]
                continue
            y_vals[bidx] = Ax[p]
            nxt = bidx
            if y_markers[nxt] == _UNUSED:
                y_markers[nxt] = _USED
                elim[0] = nxt
                n_e = 1
                nxt = etree[bidx]
                while nxt != -1 and nxt < k:
                    if y_markers[nxt] == _USED:
                        break
                    y_markers[nxt] = _USED
                    elim[n_e] = nxt
                    n_e += 1
                    nxt = etree[nxt]
                while n_e:
                    n_e -= 1
                    y_idx[nnz_y] = elim[n_e]
                    nnz_y += 1
        for i in range(nnz_y - 1, -1, -1):
            c = y_idx[i]
            tmp = next_space[c]
            yc = y_vals[c]
            for j in range(Lp[c], tmp):
                y_vals[Li[j]] -= Lx[j] * yc
            Li[tmp] = k
            Lx[tmp] = yc * Dinv[c]
            D[k] -= yc * Lx[tmp]
            next_space[c] += 1
            y_vals[c] = 0.0
            y_markers[c] = _UNUSED
        if D[k] * signs[k] <= eps:
            D[k] = signs[k] * delta
            n_fixed += 1
        Dinv[k] = 1.0 / D[k]
    return n_fixed


@numba.njit(cache=True)
def _solve(n, Lp, Li, Lx, Dinv, x):
    for i in range(n):
        xi = x[i]
        for j in range(Lp[i], Lp[i + 1]):
            x[Li[j]] -= Lx[j] * xi
    for i in range(n):
        x[i] *= Dinv[i]
    for i in range(n - 1, -1, -1):
        acc = x[i]
        for j in range(Lp[i], Lp[i + 1]):
            acc -= Lx[j] * x[Li[j]]
        x[i] = acc
    return x


def symbolic_nnz(upper: sp.csc_matrix) -> int:
    etree, lnz, ok = _etree(upper.shape[0], upper.indptr.astype(np.int64),
                            upper.indices.astype(np.int64))
    if not ok:
        raise ValueError("matrix is not upper triangular")
    return int(lnz.sum())


def fill_reducing_order(pattern: sp.spmatrix) -> np.ndarray:
    """Reverse Cuthill-McKee or the natural order, whichever fills less."""
    sym = sp.csr_matrix(abs(pattern) + abs(pattern).T)
    n = sym.shape[0]
    candidates = [np.arange(n), np.asarray(reverse_cuthill_mckee(sym, symmetric_mode=True))]
    best, best_nnz = None, None
    for perm in candidates:
        nnz = symbolic_nnz(sp.triu(sym[perm][:, perm], format="csc"))
        if best_nnz is None or nnz < best_nnz:
            best, best_nnz = perm, nnz
    return best.astype(np.int64)


class LDLFactor:
    """Numeric LDL' of a fixed sparsity pattern; refactor with new values."""

    def __init__(self, indptr, indices, signs, eps=1e-13, delta=2e-7):
        self.n = len(indptr) - 1
        self.Ap = np.asarray(indptr, dtype=np.int64)
        self.Ai = np.asarray(indices, dtype=np.int64)
        self.signs = np.asarray(signs, dtype=np.float64)
        self.eps, self.delta = eps, delta
        self.etree, lnz, ok = _etree(self.n, self.Ap, self.Ai)
        if not ok:
            raise ValueError("matrix is not upper triangular")
        self.Lp = np.zeros(self.n + 1, dtype=np.int64)
        np.cumsum(lnz, out=self.Lp[1:])
        nnz = int(self.Lp[-1])
        self.Li = np.zeros(nnz, dtype=np.int64)
        self.Lx = np.zeros(nnz)
        self.D = np.zeros(self.n)
        self.Dinv = np.zeros(self.n)
        self.n_regularized = 0

    def factor(self, Ax):
        self.n_regularized = _factor(self.n, self.Ap, self.Ai, np.asarray(Ax, dtype=np.float64),
                                     self.Lp, self.etree, self.signs, self.eps, self.delta,
                                     self.Li, self.Lx, self.D, self.Dinv)
        return self

    def solve(self, b):
        return _solve(self.n, self.Lp, self.Li, self.Lx, self.Dinv,
                      np.array(b, dtype=np.float64, copy=True))
