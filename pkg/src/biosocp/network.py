"""Reactor network: tank volumes, flows, diffusion and the derived matrices."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.csgraph import breadth_first_order


class ValidationError(ValueError):
    """Raised when model data violates a structural invariant."""


def _as_matrix(value, s, name):
    if value is None:
        return np.zeros((s, s))
    arr = np.asarray(value, dtype=float)
    if arr.shape != (s, s):
        raise ValidationError(f"{name} must have shape ({s}, {s}), got {arr.shape}")
    return arr


@dataclass(frozen=True)
class TankNetwork:
    """Well-mixed tanks connected by directed flows and symmetric diffusion.

    Rates are volume per day; ``flows[i, j]`` is the flow from tank ``i``
    into tank ``j``.
    """

    volumes: np.ndarray
    inflow_rates: np.ndarray
    outflow_rates: np.ndarray
    flows: np.ndarray = field(default=None)
    diffusion: np.ndarray = field(default=None)

    def __post_init__(self):
        vol = np.atleast_1d(np.asarray(self.volumes, dtype=float))
        s = vol.size
        object.__setattr__(self, "volumes", vol)
        for name in ("inflow_rates", "outflow_rates"):
            arr = np.atleast_1d(np.asarray(getattr(self, name), dtype=float))
            if arr.shape != (s,):
                raise ValidationError(f"{name} must have length {s}, got {arr.shape}")
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "flows", _as_matrix(self.flows, s, "flows"))
        object.__setattr__(self, "diffusion", _as_matrix(self.diffusion, s, "diffusion"))
        for arr in (self.volumes, self.inflow_rates, self.outflow_rates,
                    self.flows, self.diffusion):
            arr.setflags(write=False)
        self.validate()

    @property
    def n_tanks(self) -> int:
        return self.volumes.size

    def validate(self):
        if np.any(~np.isfinite(self.volumes)) or np.any(self.volumes <= 0):
            i = int(np.flatnonzero(~(self.volumes > 0))[0])
            raise ValidationError(f"volume of tank {i} must be positive")
        for name in ("inflow_rates", "outflow_rates"):
            arr = getattr(self, name)
            bad = np.flatnonzero(~(arr >= 0))
            if bad.size:
                raise ValidationError(f"{name}[{bad[0]}] is negative")
        for name in ("flows", "diffusion"):
            arr = getattr(self, name)
            bad = np.argwhere(~(arr >= 0))
            if bad.size:
                i, j = bad[0]
                raise ValidationError(f"{name}[{i},{j}] is negative")
            diag = np.flatnonzero(np.diag(arr))
            if diag.size:
                raise ValidationError(f"{name}[{diag[0]},{diag[0]}] must be zero")
        asym = np.argwhere(self.diffusion != self.diffusion.T)
        if asym.size:
            i, j = asym[0]
            raise ValidationError(
                f"diffusion must be symmetric: d[{i},{j}]={self.diffusion[i, j]} "
                f"!= d[{j},{i}]={self.diffusion[j, i]}")


@dataclass(frozen=True)
class NetworkMatrices:
    M: np.ndarray
    L: np.ndarray
    N: np.ndarray
    C: np.ndarray
    V: np.ndarray


def build_matrices(net: TankNetwork) -> NetworkMatrices:
    """Compartmental flow matrix M, diffusion Laplacian L, N = M + L and C."""
    net.validate()
    Q = net.flows
    M = Q.T.copy()
    M[np.diag_indices_from(M)] = -net.outflow_rates - Q.sum(axis=1)
    L = net.diffusion.copy()
    L[np.diag_indices_from(L)] = -net.diffusion.sum(axis=1)
    return NetworkMatrices(M=M, L=L, N=M + L, C=np.diag(net.inflow_rates),
                           V=np.diag(net.volumes))


def is_outflow_connected(net: TankNetwork) -> bool:
    """Every tank has a directed flow path to a tank with positive outflow."""
    s = net.n_tanks
    has_out = net.outflow_rates > 0
    if not has_out.any():
        return False
    # search backwards from the outflow tanks along reversed flow edges
    rev = sp.csr_matrix((net.flows > 0).T.astype(float))
    reached = np.zeros(s, dtype=bool)
    for i in np.flatnonzero(has_out):
        if not reached[i]:
            order = breadth_first_order(rev, i, directed=True,
                                        return_predecessors=False)
            reached[order] = True
    return bool(reached.all())


def kron_lift(A, m: int) -> sp.csr_matrix:
    """Sparse ``A ⊗ I_m``."""
    if m < 1:
        raise ValueError("m must be a positive integer")
    return sp.kron(sp.csr_matrix(A), sp.identity(m, format="csr"), format="csr")


class NetworkSchedule:
    """Per-step network snapshots; a single snapshot means a constant network.

    Step indices run 1..tau. With ``k`` snapshots and ``k > 1``, snapshot
    ``k-1`` is used for step ``k`` (one snapshot per step).
    """

    def __init__(self, snapshots):
        if isinstance(snapshots, TankNetwork):
            snapshots = [snapshots]
        self.snapshots = tuple(snapshots)
        if not self.snapshots:
            raise ValidationError("network schedule is empty")
        s = self.snapshots[0].n_tanks
        for k, net in enumerate(self.snapshots):
            if net.n_tanks != s:
                raise ValidationError(f"snapshot {k} has {net.n_tanks} tanks, expected {s}")
            if not np.array_equal(net.volumes, self.snapshots[0].volumes):
                raise ValidationError(f"snapshot {k} changes tank volumes")
        self._matrices = [build_matrices(net) for net in self.snapshots]

    @property
    def n_tanks(self) -> int:
        return self.snapshots[0].n_tanks

    @property
    def is_constant(self) -> bool:
        return len(self.snapshots) == 1

    @property
    def volumes(self) -> np.ndarray:
        return self.snapshots[0].volumes

    def network(self, step: int) -> TankNetwork:
        if self.is_constant:
            return self.snapshots[0]
        if not 1 <= step <= len(self.snapshots):
            raise IndexError(f"no network snapshot for step {step}")
        return self.snapshots[step - 1]

    def matrices(self, step: int) -> NetworkMatrices:
        if self.is_constant:
            return self._matrices[0]
        self.network(step)
        return self._matrices[step - 1]

    def check_horizon(self, tau: int):
        if not self.is_constant and len(self.snapshots) != tau:
            raise ValidationError(
                f"network schedule has {len(self.snapshots)} snapshots but tau={tau}")
