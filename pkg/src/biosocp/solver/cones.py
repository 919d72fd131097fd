"""Nonnegative orthant and second-order cone operations.

Vectors in the product cone are laid out as ``l`` orthant entries followed
by the second-order cone blocks.  Second-order blocks of equal dimension are
processed together as 2-D arrays.
"""

from __future__ import annotations

import numpy as np


class ConeDims:
    def __init__(self, l: int, q=()):
        self.l = int(l)
        self.q = tuple(int(d) for d in q)
        if self.l < 0 or any(d < 1 for d in self.q):
            raise ValueError(f"invalid cone dimensions l={l}, q={q}")
        self.m = self.l + sum(self.q)
        self.degree = self.l + len(self.q)
        starts = self.l + np.concatenate([[0], np.cumsum(self.q)[:-1]]).astype(int) \
            if self.q else np.zeros(0, dtype=int)
        self.starts = starts
        groups = {}
        for start, d in zip(starts, self.q):
            groups.setdefault(d, []).append(start + np.arange(d))
        self.groups = {d: np.array(idx) for d, idx in sorted(groups.items())}

    def __eq__(self, other):
        return isinstance(other, ConeDims) and (self.l, self.q) == (other.l, other.q)

    def __repr__(self):
        return f"ConeDims(l={self.l}, q={self.q})"

    def identity(self) -> np.ndarray:
        e = np.zeros(self.m)
        e[:self.l] = 1.0
        if self.q:
            e[self.starts] = 1.0
        return e

    def inner_margin(self, u) -> float:
        """Smallest of u_i (orthant) and u0 - ||u1|| (second-order blocks)."""
        vals = [np.min(u[:self.l])] if self.l else []
        for idx in self.groups.values():
            U = u[idx]
            vals.append(np.min(U[:, 0] - np.linalg.norm(U[:, 1:], axis=1)))
        return float(min(vals)) if vals else np.inf

    def shift_inside(self, u) -> np.ndarray:
        alpha = -self.inner_margin(u)
        if alpha >= 0:
            return u + (1.0 + alpha) * self.identity()
        return u.copy()

    def jdot(self, u, v) -> np.ndarray:
        """Per-block Jordan determinant-like products u' J v (second-order blocks)."""
        out = []
        for idx in self.groups.values():
            U, V = u[idx], v[idx]
            out.append(U[:, 0] * V[:, 0] - np.einsum("ij,ij->i", U[:, 1:], V[:, 1:]))
        return np.concatenate(out) if out else np.zeros(0)

    def product(self, u, v) -> np.ndarray:
        """Jordan product u o v."""
        out = np.empty(self.m)
        out[:self.l] = u[:self.l] * v[:self.l]
        for idx in self.groups.values():
            U, V = u[idx], v[idx]
            out[idx[:, 0]] = np.einsum("ij,ij->i", U, V)
            out[idx[:, 1:]] = U[:, :1] * V[:, 1:] + V[:, :1] * U[:, 1:]
        return out

    def divide(self, lam, r) -> np.ndarray:
        """Solve lam o x = r for x."""
        out = np.empty(self.m)
        out[:self.l] = r[:self.l] / lam[:self.l]
        for idx in self.groups.values():
            L, R = lam[idx], r[idx]
            det = L[:, 0] ** 2 - np.einsum("ij,ij->i", L[:, 1:], L[:, 1:])
            x0 = (L[:, 0] * R[:, 0] - np.einsum("ij,ij->i", L[:, 1:], R[:, 1:])) / det
            out[idx[:, 0]] = x0
            out[idx[:, 1:]] = (R[:, 1:] - x0[:, None] * L[:, 1:]) / L[:, :1]
        return out

    def max_step(self, u, d) -> float:
        """Largest alpha >= 0 with u + alpha d in the cone (u interior)."""
        alpha = np.inf
        if self.l:
            neg = d[:self.l] < 0
            if neg.any():
                alpha = min(alpha, float(np.min(-u[:self.l][neg] / d[:self.l][neg])))
        for idx in self.groups.values():
            U, D = u[idx], d[idx]
            a = D[:, 0] ** 2 - np.einsum("ij,ij->i", D[:, 1:], D[:, 1:])
            b = U[:, 0] * D[:, 0] - np.einsum("ij,ij->i", U[:, 1:], D[:, 1:])
            c = np.maximum(U[:, 0] ** 2 - np.einsum("ij,ij->i", U[:, 1:], U[:, 1:]), 0.0)
            disc = b * b - a * c
            root = np.sqrt(np.maximum(disc, 0.0))
            steps = np.full(a.shape, np.inf)
            with np.errstate(divide="ignore", invalid="ignore"):
                first = (b <= 0) & (disc >= 0) & ((-b + root) > 0)
                steps[first] = c[first] / (-b[first] + root[first])
                second = (b > 0) & (a < 0)
                steps[second] = (b[second] + root[second]) / (-a[second])
            # a block pointing into the negative first coordinate must stop at
            # the latest where its first coordinate reaches zero
            cross = D[:, 0] < 0
            steps[cross] = np.minimum(steps[cross], -U[cross, 0] / D[cross, 0])
            if steps.size:
                alpha = min(alpha, float(np.min(steps)))
        return max(alpha, 0.0)


class NTScaling:
    """Nesterov-Todd scaling W with W z = W^{-1} s = lambda.

    For second-order blocks W = eta [[w0, w1'], [w1, I + w1 w1'/(1 + w0)]]
    with w' J w = 1.  W is symmetric.
    """

    def __init__(self, dims: ConeDims, s, z):
        self.dims = dims
        l = dims.l
        self.d = np.sqrt(s[:l] / z[:l])
        self.blocks = {}
        for dim, idx in dims.groups.items():
            S, Z = s[idx], z[idx]
            sn = np.sqrt(np.maximum(S[:, 0] ** 2 - np.einsum("ij,ij->i", S[:, 1:], S[:, 1:]), 1e-300))
            zn = np.sqrt(np.maximum(Z[:, 0] ** 2 - np.einsum("ij,ij->i", Z[:, 1:], Z[:, 1:]), 1e-300))
            Sb, Zb = S / sn[:, None], Z / zn[:, None]
            gamma = np.sqrt(np.maximum((1.0 + np.einsum("ij,ij->i", Sb, Zb)) / 2.0, 1e-300))
            w = Sb.copy()
            w[:, 0] += Zb[:, 0]
            w[:, 1:] -= Zb[:, 1:]
            w /= (2.0 * gamma)[:, None]
            # renormalise so that w' J w = 1 exactly
            w1n = np.einsum("ij,ij->i", w[:, 1:], w[:, 1:])
            w[:, 0] = np.sqrt(1.0 + w1n)
            self.blocks[dim] = (idx, np.sqrt(sn / zn), w)
        self.lam = self.apply(z)

    def apply(self, v, inverse=False) -> np.ndarray:
        dims = self.dims
        out = np.empty(dims.m)
        out[:dims.l] = v[:dims.l] / self.d if inverse else v[:dims.l] * self.d
        for idx, eta, w in self.blocks.values():
            V = v[idx]
            w0, w1 = w[:, 0], w[:, 1:]
            dot = np.einsum("ij,ij->i", w1, V[:, 1:])
            if inverse:
                out[idx[:, 0]] = (w0 * V[:, 0] - dot) / eta
                coef = (-V[:, 0] + dot / (1.0 + w0)) / eta
                out[idx[:, 1:]] = V[:, 1:] / eta[:, None] + coef[:, None] * w1
            else:
                out[idx[:, 0]] = eta * (w0 * V[:, 0] + dot)
                coef = eta * (V[:, 0] + dot / (1.0 + w0))
                out[idx[:, 1:]] = eta[:, None] * V[:, 1:] + coef[:, None] * w1
        return out

    def squared_blocks(self):
        """Orthant diagonal of W^2 and, per dimension, the dense W^2 blocks."""
        blocks = {}
        for dim, (idx, eta, w) in self.blocks.items():
            W2 = 2.0 * w[:, :, None] * w[:, None, :]
            W2[:, 0, 0] -= 1.0
            diag = np.arange(1, dim)
            W2[:, diag, diag] += 1.0
            blocks[dim] = (eta ** 2)[:, None, None] * W2
        return self.d ** 2, blocks

    def apply_squared(self, v) -> np.ndarray:
        return self.apply(self.apply(v))
