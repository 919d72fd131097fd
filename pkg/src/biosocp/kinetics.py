"""Growth kinetics: rates, Jacobians and their second-order cone encodings.

Every supported rate is concave on the nonnegative orthant, so the set
``{T <= phi(state)}`` is convex.  The cone encodings below are derived from
the hyperbolic form ``T * denominator <= numerator``:

* Monod with exogenous biomass ``Xb`` and ``a = mu * Xb``:
  ``T <= a S / (k + S)``  iff  ``(a - T)(S + k) >= a k`` with both factors >= 0.
* Contois with ``t = k T / mu``, ``p = S``, ``q = k X``:
  ``t <= p q / (p + q)``  iff  ``(p - t)(q - t) >= t**2`` with both factors >= 0.

A rotated cone ``u v >= w**2, u, v >= 0`` is the Lorentz cone
``||(2 w, u - v)|| <= u + v``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np
import scipy.sparse as sp

from .network import ValidationError


class UnsupportedKinetics(ValidationError):
    """The requested growth model has no convex encoding here."""


# ---------------------------------------------------------------- models


@dataclass(frozen=True)
class Monod:
    """``mu * S / (k + S) * X``.

    Biomass is either an exogenous per-step profile (``biomass_profile``,
    entry ``n - 1`` for step ``n``; a single entry means constant) or a state
    entry (``biomass_index``).  Only the former has a cone encoding.
    """

    mu: float
    k: float
    substrate: int
    biomass_profile: tuple = None
    biomass_index: int = None

    def __post_init__(self):
        if not self.mu > 0 or not self.k > 0:
            raise ValidationError(f"Monod needs mu > 0 and k > 0, got mu={self.mu}, k={self.k}")
        if (self.biomass_profile is None) == (self.biomass_index is None):
            raise ValidationError("Monod needs exactly one of biomass_profile or biomass_index")
        if self.biomass_profile is not None:
            prof = tuple(float(v) for v in np.atleast_1d(self.biomass_profile))
            if not prof or min(prof) < 0:
                raise ValidationError("biomass profile must be nonempty and nonnegative")
            object.__setattr__(self, "biomass_profile", prof)

    @property
    def constant_biomass(self) -> bool:
        return self.biomass_profile is not None

    def biomass(self, step=None) -> float:
        prof = self.biomass_profile
        if len(prof) == 1:
            return prof[0]
        if step is None:
            raise ValidationError("time-varying biomass profile needs a step index")
        if not 1 <= step <= len(prof):
            raise IndexError(f"biomass profile has no entry for step {step}")
        return prof[step - 1]

    def indices(self):
        return (self.substrate,) if self.constant_biomass else (self.substrate, self.biomass_index)


@dataclass(frozen=True)
class Contois:
    """``mu * S * X / (k X + S)``."""

    mu: float
    k: float
    substrate: int
    biomass: int

    def __post_init__(self):
        if not self.mu > 0 or not self.k > 0:
            raise ValidationError(f"Contois needs mu > 0 and k > 0, got mu={self.mu}, k={self.k}")

    def indices(self):
        return (self.substrate, self.biomass)


@dataclass(frozen=True)
class NonInteractive:
    """Minimum of two rates."""

    a: "GrowthModel"
    b: "GrowthModel"

    def indices(self):
        return tuple(sorted(set(self.a.indices()) | set(self.b.indices())))


@dataclass(frozen=True)
class GeometricInteractive:
    """Geometric mean of two rates."""

    a: "GrowthModel"
    b: "GrowthModel"

    def indices(self):
        return tuple(sorted(set(self.a.indices()) | set(self.b.indices())))


GrowthModel = Union[Monod, Contois, NonInteractive, GeometricInteractive]


@dataclass(frozen=True)
class KineticsSpec:
    """Per-tank reaction lists and stoichiometric matrices.

    ``reactions[i][j]`` is the growth model of reaction ``j`` in tank ``i``;
    ``kappa[i]`` is the ``m x r`` stoichiometric matrix of tank ``i``.
    """

    reactions: tuple
    kappa: tuple
    n_states: int
    state_names: tuple = None
    reaction_names: tuple = None

    def __post_init__(self):
        reactions = tuple(tuple(r) for r in self.reactions)
        object.__setattr__(self, "reactions", reactions)
        m = int(self.n_states)
        if m < 1:
            raise ValidationError("n_states must be positive")
        r = len(reactions[0]) if reactions else 0
        if len(self.kappa) != len(reactions):
            raise ValidationError(
                f"kappa given for {len(self.kappa)} tanks but reactions for {len(reactions)}")
        kappas = []
        for i, (rx, kap) in enumerate(zip(reactions, self.kappa)):
            if len(rx) != r:
                raise ValidationError(f"tank {i} has {len(rx)} reactions, expected {r}")
            kap = np.asarray(kap, dtype=float).reshape(m, r) if r else np.zeros((m, 0))
            if not np.all(np.isfinite(kap)):
                raise ValidationError(f"kappa of tank {i} has non-finite entries")
            kap.setflags(write=False)
            kappas.append(kap)
            for j, model in enumerate(rx):
                for idx in model.indices():
                    if not 0 <= idx < m:
                        raise ValidationError(
                            f"reaction {j} of tank {i} references state entry {idx} "
                            f"outside 0..{m - 1}")
        object.__setattr__(self, "kappa", tuple(kappas))
        if self.state_names is None:
            object.__setattr__(self, "state_names", tuple(f"x{k}" for k in range(m)))
        if self.reaction_names is None:
            object.__setattr__(self, "reaction_names", tuple(f"r{k}" for k in range(r)))

    @property
    def n_tanks(self) -> int:
        return len(self.reactions)

    @property
    def n_reactions(self) -> int:
        return len(self.reactions[0]) if self.reactions else 0

    def stoichiometry(self) -> sp.csr_matrix:
        """Block-diagonal K of shape (m s, r s)."""
        if self.n_reactions == 0:
            return sp.csr_matrix((self.n_states * self.n_tanks, 0))
        return sp.block_diag(self.kappa, format="csr")

    @staticmethod
    def empty(n_tanks: int, n_states: int, state_names=None) -> "KineticsSpec":
        return KineticsSpec(reactions=((),) * n_tanks,
                            kappa=(np.zeros((n_states, 0)),) * n_tanks,
                            n_states=n_states, state_names=state_names)


# ---------------------------------------------------------------- evaluation


def _contois(model, S, X):
    den = model.k * X + S
    if den <= 0:
        return 0.0
    return model.mu * S * X / den


def evaluate_rate(model: GrowthModel, state, step=None) -> float:
    """Rate of one reaction at a tank state vector."""
    state = np.asarray(state, dtype=float)
    if isinstance(model, Monod):
        S = state[model.substrate]
        X = model.biomass(step) if model.constant_biomass else state[model.biomass_index]
        return model.mu * S * X / (model.k + S)
    if isinstance(model, Contois):
        return _contois(model, state[model.substrate], state[model.biomass])
    if isinstance(model, NonInteractive):
        return min(evaluate_rate(model.a, state, step), evaluate_rate(model.b, state, step))
    if isinstance(model, GeometricInteractive):
        ra = evaluate_rate(model.a, state, step)
        rb = evaluate_rate(model.b, state, step)
        return float(np.sqrt(max(ra, 0.0) * max(rb, 0.0)))
    raise UnsupportedKinetics(f"unknown growth model {type(model).__name__}")


def rate_gradient(model: GrowthModel, state, step=None):
    """Gradient of one rate w.r.t. the tank state and a nondifferentiability flag.

    At kinks (tied minimum, Contois at the origin, zero geometric mean) a
    one-sided limit is returned and the flag is set.
    """
    state = np.asarray(state, dtype=float)
    g = np.zeros(state.size)
    if isinstance(model, Monod):
        S = state[model.substrate]
        if model.constant_biomass:
            X = model.biomass(step)
        else:
            X = state[model.biomass_index]
            g[model.biomass_index] += model.mu * S / (model.k + S)
        g[model.substrate] += model.mu * X * model.k / (model.k + S) ** 2
        return g, False
    if isinstance(model, Contois):
        S, X = state[model.substrate], state[model.biomass]
        den = model.k * X + S
        if den <= 0:
            # limit along the substrate axis (X = 0, S -> 0+)
            g[model.biomass] += model.mu
            return g, True
        g[model.substrate] += model.mu * model.k * X ** 2 / den ** 2
        g[model.biomass] += model.mu * S ** 2 / den ** 2
        return g, False
    if isinstance(model, NonInteractive):
        ra = evaluate_rate(model.a, state, step)
        rb = evaluate_rate(model.b, state, step)
        child = model.a if ra <= rb else model.b
        gc, flag = rate_gradient(child, state, step)
        return gc, flag or ra == rb
    if isinstance(model, GeometricInteractive):
        ra = evaluate_rate(model.a, state, step)
        rb = evaluate_rate(model.b, state, step)
        ga, fa = rate_gradient(model.a, state, step)
        gb, fb = rate_gradient(model.b, state, step)
        if ra <= 0 or rb <= 0:
            return g, True
        root = np.sqrt(ra * rb)
        return (rb * ga + ra * gb) / (2 * root), fa or fb
    raise UnsupportedKinetics(f"unknown growth model {type(model).__name__}")


def tank_blocks(spec: KineticsSpec, state):
    state = np.asarray(state, dtype=float)
    m, s = spec.n_states, spec.n_tanks
    if state.size != m * s:
        raise ValidationError(f"state has {state.size} entries, expected {m * s}")
    return state.reshape(s, m)


def rates(spec: KineticsSpec, state, step=None) -> np.ndarray:
    """Stacked phi(state) of length r s."""
    blocks = tank_blocks(spec, state)
    out = [evaluate_rate(model, blocks[i], step)
           for i, rx in enumerate(spec.reactions) for model in rx]
    return np.asarray(out, dtype=float)


def jacobian_with_flags(spec: KineticsSpec, state, step=None):
    """Block-diagonal (r s x m s) Jacobian plus (tank, reaction) kink flags."""
    blocks = tank_blocks(spec, state)
    m, r, s = spec.n_states, spec.n_reactions, spec.n_tanks
    rows, cols, vals, flags = [], [], [], []
    for i, rx in enumerate(spec.reactions):
        for j, model in enumerate(rx):
            g, flag = rate_gradient(model, blocks[i], step)
            if flag:
                flags.append((i, j))
            nz = np.flatnonzero(g)
            rows.extend([i * r + j] * nz.size)
            cols.extend(i * m + nz)
            vals.extend(g[nz])
    J = sp.csr_matrix((vals, (rows, cols)), shape=(r * s, m * s))
    return J, flags


def jacobian(spec: KineticsSpec, state, step=None) -> sp.csr_matrix:
    return jacobian_with_flags(spec, state, step)[0]


# ---------------------------------------------------------------- cone rows


@dataclass
class ConeBlock:
    """Membership of affine expressions in a cone.

    ``kind`` is ``"soc"`` (first entry bounds the norm of the rest) or
    ``"nonneg"``.  Each row is ``(coefs, const)`` meaning
    ``const + sum(coef * x[col] for col, coef in coefs.items())``.
    """

    kind: str
    rows: list
    tag: str = ""

    def values(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([const + sum(c * x[j] for j, c in coefs.items())
                         for coefs, const in self.rows])

    def contains(self, x, tol=0.0) -> bool:
        v = self.values(x)
        if self.kind == "nonneg":
            return bool(np.all(v >= -tol))
        return bool(v[0] + tol >= np.linalg.norm(v[1:]))


def _rotated(u, v, w, tag):
    """``u v >= w**2, u, v >= 0`` for affine u, v, w given as (coefs, const)."""
    def comb(p, q, sign, scale=1.0):
        coefs = dict(p[0])
        for j, c in q[0].items():
            coefs[j] = coefs.get(j, 0.0) + sign * c
        coefs = {j: scale * c for j, c in coefs.items() if c != 0.0}
        return coefs, scale * (p[1] + sign * q[1])
    two_w = ({j: 2.0 * c for j, c in w[0].items()}, 2.0 * w[1])
    return ConeBlock("soc", [comb(u, v, 1.0), two_w, comb(u, v, -1.0)], tag)


def soc_rows(model: GrowthModel, state_cols: Sequence[int], T: int, step=None,
             new_var: Callable[[str], int] = None, tag="kinetics") -> list:
    """Cone blocks whose feasible set (T >= 0) is exactly ``T <= phi``.

    ``state_cols`` maps tank state entries to variable columns, ``T`` is the
    rate column.  Composite models request auxiliary columns via ``new_var``;
    the auxiliaries get their own nonnegativity block.
    """
    if isinstance(model, Monod):
        if not model.constant_biomass:
            raise UnsupportedKinetics(
                "Monod growth with state biomass is only quasiconcave; "
                "supply an exogenous biomass profile")
        a = model.mu * model.biomass(step)
        S = state_cols[model.substrate]
        if a == 0.0:
            return [ConeBlock("nonneg", [({T: -1.0}, 0.0)], tag)]
        u = ({T: -1.0}, a)
        v = ({S: 1.0}, model.k)
        w = ({}, float(np.sqrt(a * model.k)))
        return [_rotated(u, v, w, tag)]
    if isinstance(model, Contois):
        S, X = state_cols[model.substrate], state_cols[model.biomass]
        t = model.k / model.mu
        u = ({S: 1.0, T: -t}, 0.0)
        v = ({X: model.k, T: -t}, 0.0)
        w = ({T: t}, 0.0)
        return [_rotated(u, v, w, tag)]
    if isinstance(model, (NonInteractive, GeometricInteractive)):
        if new_var is None:
            raise ValueError("composite growth models need an auxiliary-variable allocator")
        Ta, Tb = new_var("aux"), new_var("aux")
        blocks = [ConeBlock("nonneg", [({Ta: 1.0}, 0.0), ({Tb: 1.0}, 0.0)], "aux_nonneg")]
        blocks += soc_rows(model.a, state_cols, Ta, step, new_var, tag)
        blocks += soc_rows(model.b, state_cols, Tb, step, new_var, tag)
        if isinstance(model, NonInteractive):
            blocks.append(ConeBlock("nonneg", [({Ta: 1.0, T: -1.0}, 0.0),
                                               ({Tb: 1.0, T: -1.0}, 0.0)], tag))
        else:
            blocks.append(_rotated(({Ta: 1.0}, 0.0), ({Tb: 1.0}, 0.0), ({T: 1.0}, 0.0), tag))
        return blocks
    raise UnsupportedKinetics(f"unknown growth model {type(model).__name__}")


def aux_values(model: GrowthModel, state, step=None) -> list:
    """Largest feasible auxiliary values, in the order ``soc_rows`` allocates them."""
    if isinstance(model, (NonInteractive, GeometricInteractive)):
        out = [evaluate_rate(model.a, state, step), evaluate_rate(model.b, state, step)]
        return out + aux_values(model.a, state, step) + aux_values(model.b, state, step)
    return []
