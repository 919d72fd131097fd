"""Synthetic influent totals: a diurnal cycle with a storm spike."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from .network import ValidationError

DEFAULTS = dict(base=1.0, diurnal_amplitude=0.0, period=96, phase=0.0, spike_step=None,
                spike_width=4.0, spike_height=0.0, noise=0.0, seed=0)


def synth_influent(params: dict, grid, scale: float = 1.0) -> np.ndarray:
    """Per-step series for steps 1..tau.

    ``scale * base * (1 + A sin(2 pi n / period + phase) + H g(n)) * (1 + noise e_n)``
    where ``g`` is a unit Gaussian bump centred on ``spike_step`` and
    ``e_n`` are standard normals drawn from ``seed``.  A ``csv`` entry
    (with ``column``) replaces the generated series by the file contents.
    """
    unknown = set(params) - set(DEFAULTS) - {"csv", "column"}
    if unknown:
        raise ValidationError(f"unknown influent generator parameters {sorted(unknown)}")
    p = dict(DEFAULTS, **params)
    tau = grid.tau
    if "csv" in p:
        with open(Path(p["csv"]), newline="") as fh:
            rows = list(csv.DictReader(fh))
        column = p.get("column") or next(iter(rows[0]))
        vals = np.array([float(r[column]) for r in rows])
        if vals.size != tau:
            raise ValidationError(f"{p['csv']}: {vals.size} rows, expected {tau}")
        return vals
    for key in ("base", "diurnal_amplitude", "spike_height", "noise", "spike_width"):
        if float(p[key]) < 0:
            raise ValidationError(f"influent generator parameter {key} must be >= 0")
    n = np.arange(1, tau + 1, dtype=float)
    shape = 1.0 + float(p["diurnal_amplitude"]) * np.sin(2 * np.pi * n / float(p["period"])
                                                         + float(p["phase"]))
    if p["spike_step"] is not None and float(p["spike_height"]) > 0:
        w = max(float(p["spike_width"]), 1e-9)
        shape = shape + float(p["spike_height"]) * np.exp(-0.5 * ((n - float(p["spike_step"])) / w) ** 2)
    if float(p["noise"]) > 0:
        rng = np.random.default_rng(int(p["seed"]))
        shape = shape * (1.0 + float(p["noise"]) * rng.standard_normal(tau))
    return np.maximum(scale * float(p["base"]) * shape, 0.0)


def write_series(path, columns: dict):
    """CSV with a header row and one row per step."""
    names = list(columns)
    n = len(next(iter(columns.values())))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["step"] + names)
        for k in range(n):
            w.writerow([k + 1] + [repr(float(columns[c][k])) for c in names])
