"""Time grid and implicit-Euler dynamics rows."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .kinetics import KineticsSpec
from .network import NetworkSchedule, ValidationError, kron_lift

FIXED = "fixed"
PERIODIC = "periodic"


@dataclass(frozen=True)
class TimeGrid:
    """``tau`` steps of length ``delta`` (days); steps are numbered 1..tau."""

    tau: int
    delta: float

    def __post_init__(self):
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValidationError(f"tau must be a positive integer, got {self.tau}")
        if not self.delta > 0:
            raise ValidationError(f"delta must be positive, got {self.delta}")
        object.__setattr__(self, "tau", int(self.tau))
        object.__setattr__(self, "delta", float(self.delta))

    @property
    def steps(self) -> range:
        return range(1, self.tau + 1)

    @property
    def times(self) -> np.ndarray:
        return self.delta * np.arange(self.tau + 1)


@dataclass
class LinearRows:
    """Sparse equality rows ``A x = b`` in triplet form."""

    rows: np.ndarray
    cols: np.ndarray
    vals: np.ndarray
    rhs: np.ndarray
    labels: list

    @property
    def n_rows(self) -> int:
        return self.rhs.size

    def matrix(self, n_cols) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(self.n_rows, n_cols))

    @staticmethod
    def concat(parts) -> "LinearRows":
        parts = [p for p in parts if p.n_rows]
        if not parts:
            return LinearRows(*(np.zeros(0, dtype=t) for t in (int, int, float, float)), [])
        offsets = np.cumsum([0] + [p.n_rows for p in parts[:-1]])
        return LinearRows(
            rows=np.concatenate([p.rows + o for p, o in zip(parts, offsets)]),
            cols=np.concatenate([p.cols for p in parts]),
            vals=np.concatenate([p.vals for p in parts]),
            rhs=np.concatenate([p.rhs for p in parts]),
            labels=[lab for p in parts for lab in p.labels])


@dataclass
class StepHandles:
    """Variable columns per step.

    ``xi[n]`` (n = 0..tau) holds the m s state columns, ``T[n]`` and
    ``xin[n]`` (n = 1..tau; row 0 unused) the r s rate and m s influent
    columns.  Under the periodic boundary ``xi[0]`` repeats ``xi[tau]``.
    """

    xi: np.ndarray
    T: np.ndarray
    xin: np.ndarray


class Discretization:
    """Interface of a derivative approximation over a time grid."""

    def step_blocks(self, schedule, spec, grid, n):
        raise NotImplementedError


class ImplicitEuler(Discretization):
    """``(xi(n) - xi(n-1)) / delta``."""

    def step_blocks(self, schedule: NetworkSchedule, spec: KineticsSpec, grid: TimeGrid, n: int):
        """Coefficient blocks of step n's residual.

        Residual = Vh/delta xi(n) - Vh/delta xi(n-1) - Vh K T(n) - Nh(n) xi(n) - Ch(n) xin(n).
        Returned in the order (on xi(n), on xi(n-1), on T(n), on xin(n)).
        """
        m = spec.n_states
        mats = schedule.matrices(n)
        Vh = kron_lift(mats.V, m)
        Nh = kron_lift(mats.N, m)
        Ch = kron_lift(mats.C, m)
        K = spec.stoichiometry()
        Vd = Vh / grid.delta
        return (Vd - Nh).tocsr(), (-Vd).tocsr(), (-(Vh @ K)).tocsr(), (-Ch).tocsr()


IMPLICIT_EULER = ImplicitEuler()


def _block_triplets(block, row_off, col_map):
    coo = sp.coo_matrix(block)
    keep = coo.data != 0.0
    return coo.row[keep] + row_off, np.asarray(col_map)[coo.col[keep]], coo.data[keep]


def _check_handles(handles: StepHandles, ms, rs, tau):
    for name, arr, width, first in (("xi", handles.xi, ms, 0), ("T", handles.T, rs, 1),
                                    ("xin", handles.xin, ms, 1)):
        arr = np.asarray(arr)
        if arr.ndim != 2 or arr.shape[0] != tau + 1 or arr.shape[1] != width:
            raise ValidationError(
                f"handle block {name} has shape {arr.shape}, expected ({tau + 1}, {width})")


def dynamics_rows(schedule: NetworkSchedule, spec: KineticsSpec, grid: TimeGrid,
                  handles: StepHandles, scheme: Discretization = IMPLICIT_EULER) -> LinearRows:
    """ms equality rows per step, stacked in step order."""
    ms, rs = spec.n_states * spec.n_tanks, spec.n_reactions * spec.n_tanks
    if schedule.n_tanks != spec.n_tanks:
        raise ValidationError(
            f"network has {schedule.n_tanks} tanks, kinetics has {spec.n_tanks}")
    schedule.check_horizon(grid.tau)
    _check_handles(handles, ms, rs, grid.tau)
    rows, cols, vals, labels = [], [], [], []
    for n in grid.steps:
        off = (n - 1) * ms
        blocks = scheme.step_blocks(schedule, spec, grid, n)
        maps = (handles.xi[n], handles.xi[n - 1], handles.T[n], handles.xin[n])
        for name, block, cmap in zip(("xi(n)", "xi(n-1)", "T(n)", "xin(n)"), blocks, maps):
            want = (ms, len(cmap))
            if block.shape != want:
                raise ValidationError(
                    f"step {n}, block {name}: shape {block.shape}, expected {want}")
            r, c, v = _block_triplets(block, off, cmap)
            rows.append(r), cols.append(c), vals.append(v)
        labels.extend(("dynamics", n, k) for k in range(ms))
    return LinearRows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                      np.zeros(grid.tau * ms), labels)


def steady_rows(schedule: NetworkSchedule, spec: KineticsSpec, xi_cols, T_cols,
                xin_cols) -> LinearRows:
    """``0 = Vh K T + Nh xi + Ch xin`` as ``-Vh K T - Nh xi - Ch xin = 0``."""
    if not schedule.is_constant:
        raise ValidationError("steady state requires a constant network, not a schedule")
    m = spec.n_states
    mats = schedule.matrices(1)
    Vh = kron_lift(mats.V, m)
    blocks = (-kron_lift(mats.N, m), -(Vh @ spec.stoichiometry()), -kron_lift(mats.C, m))
    ms = m * spec.n_tanks
    rows, cols, vals = [], [], []
    for block, cmap in zip(blocks, (xi_cols, T_cols, xin_cols)):
        r, c, v = _block_triplets(block, 0, cmap)
        rows.append(r), cols.append(c), vals.append(v)
    return LinearRows(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
                      np.zeros(ms), [("steady", 0, k) for k in range(ms)])
