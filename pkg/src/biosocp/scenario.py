"""Scenario configuration: loading, validation, unit handling and canonical dumps.

A scenario file is YAML with the sections ``network``, ``kinetics``,
``horizon``, ``objective``, ``constraints`` and ``influent``.  Physical
units are declared once under ``units`` and converted on load to the
canonical system (volume m3, time day, concentration mg/L).  Setting
``units.paper_units: true`` skips every conversion so the literal
step-length-one convention can be reproduced.
"""

from __future__ import annotations

import copy
import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import kinetics as kin
from .discretize import FIXED, PERIODIC, TimeGrid
from .network import NetworkSchedule, TankNetwork, ValidationError
from .program import (Allocation, BiogasMax, Composite, ConstraintSet, SetpointTracking,
                      SubstrateOutflow)

log = logging.getLogger(__name__)

TRANSIENT = "transient"
STEADY = "steady"

FLOW_UNITS = {"m3/day": 1.0, "m3/d": 1.0, "m3/h": 24.0, "m3/s": 86400.0,
              "L/day": 1e-3, "L/h": 24e-3, "L/s": 86.4}
VOLUME_UNITS = {"m3": 1.0, "L": 1e-3}
RATE_UNITS = {"1/day": 1.0, "1/d": 1.0, "1/h": 24.0, "1/min": 1440.0, "1/s": 86400.0}
TIME_UNITS = {"day": 1.0, "d": 1.0, "h": 1 / 24, "min": 1 / 1440, "s": 1 / 86400}
CANONICAL_UNITS = {"flow": "m3/day", "volume": "m3", "rate": "1/day", "time": "day"}


class ConfigErrors(ValidationError):
    """Every problem found in a config, each prefixed with its location."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("invalid scenario:\n  " + "\n  ".join(self.problems))


class _Collector:
    def __init__(self):
        self.problems = []

    def run(self, where, fn, *args, default=None):
        try:
            return fn(*args)
        except ConfigErrors as exc:
            self.problems.extend(f"{where}.{p}" if not p.startswith(where) else p
                                 for p in exc.problems)
        except (ValidationError, ValueError, KeyError, TypeError, IndexError, OSError) as exc:
            msg = f"missing key {exc.args[0]!r}" if isinstance(exc, KeyError) and exc.args else exc
            self.problems.append(f"{where}: {msg}")
        return default

    def raise_if_any(self):
        if self.problems:
            raise ConfigErrors(self.problems)


@dataclass
class Scenario:
    """A fully compiled problem instance plus the canonical config it came from."""

    name: str
    mode: str
    network: NetworkSchedule
    kinetics: kin.KineticsSpec
    grid: TimeGrid
    objective: object
    constraints: ConstraintSet
    boundary: str = FIXED
    initial_state: np.ndarray = None
    config: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    base_dir: Path = None

    @property
    def state_names(self):
        return self.kinetics.state_names

    @property
    def dims(self):
        k = self.kinetics
        return k.n_tanks, k.n_states, k.n_reactions

    def fixed_influent(self) -> np.ndarray:
        """Influent array (tau, s, m) with NaN on decision entries."""
        s, m, _ = self.dims
        return np.stack([self.constraints.influent_at(n, s, m) for n in self.grid.steps])

    def to_config(self) -> dict:
        return copy.deepcopy(self.config)

    def __eq__(self, other):
        return isinstance(other, Scenario) and self.config == other.config


# ---------------------------------------------------------------- helpers


def _entry_index(names, key):
    if isinstance(key, (int, np.integer)):
        if not 0 <= key < len(names):
            raise IndexError(f"entry index {key} outside 0..{len(names) - 1}")
        return int(key)
    if key not in names:
        raise KeyError(f"unknown state entry {key!r}; known entries are {list(names)}")
    return names.index(key)


def _per_tank(value, s, what):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(s, float(arr))
    if arr.shape != (s,):
        raise ValidationError(f"{what} needs one value or {s} per-tank values, got shape {arr.shape}")
    return arr


def _factor(table, unit, kind, paper_units):
    if paper_units:
        return 1.0
    if unit not in table:
        raise ValidationError(f"unknown {kind} unit {unit!r}; choose from {sorted(table)}")
    return table[unit]


def _tolist(x):
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, dict):
        return {k: _tolist(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_tolist(v) for v in x]
    return x


# ---------------------------------------------------------------- sections


def _network_snapshot(cfg, units, paper):
    fq = _factor(FLOW_UNITS, units["flow"], "flow", paper)
    fv = _factor(VOLUME_UNITS, units["volume"], "volume", paper)
    tanks = cfg["tanks"]
    if not tanks:
        raise ValidationError("network needs at least one tank")
    s = len(tanks)
    names = [t.get("name", str(i)) for i, t in enumerate(tanks)]

    def tank_index(key):
        if isinstance(key, int):
            if not 0 <= key < s:
                raise IndexError(f"tank index {key} outside 0..{s - 1}")
            return key
        return names.index(key) if key in names else _entry_index(names, key)

    vol = np.array([float(t["volume"]) for t in tanks]) * fv
    qin = np.array([float(t.get("inflow", 0.0)) for t in tanks]) * fq
    qout = np.array([float(t.get("outflow", 0.0)) for t in tanks]) * fq
    flows = np.zeros((s, s))
    for k, e in enumerate(cfg.get("flows") or []):
        flows[tank_index(e["from"]), tank_index(e["to"])] += float(e["rate"]) * fq
    diff = np.zeros((s, s))
    for e in cfg.get("diffusion") or []:
        i, j = (tank_index(t) for t in e["between"])
        # "rates" gives each direction separately; the network rejects a mismatch
        ij, ji = (e["rates"] if "rates" in e else (e["rate"], e["rate"]))
        diff[i, j] += float(ij) * fq
        diff[j, i] += float(ji) * fq
    canon = dict(tanks=[dict(name=n, volume=float(v), inflow=float(a), outflow=float(b))
                        for n, v, a, b in zip(names, vol, qin, qout)],
                 flows=[dict(**{"from": int(i), "to": int(j)}, rate=float(flows[i, j]))
                        for i, j in zip(*np.nonzero(flows))],
                 diffusion=[dict(between=[int(i), int(j)], rate=float(diff[i, j]))
                            for i, j in zip(*np.nonzero(np.triu(diff)))])
    return TankNetwork(vol, qin, qout, flows, diff), names, canon


def _network(cfg, units, paper):
    if "snapshots" in cfg:
        built = [_network_snapshot(c, units, paper) for c in cfg["snapshots"]]
        return (NetworkSchedule([b[0] for b in built]), built[0][1],
                dict(snapshots=[b[2] for b in built]))
    net, names, canon = _network_snapshot(cfg, units, paper)
    return NetworkSchedule([net]), names, canon


def _biomass(cfg, tau, step_scale=1.0):
    """Exogenous biomass profile (tuple over steps) from a config entry."""
    if "constant" in cfg:
        return (float(cfg["constant"]),)
    if "profile" in cfg:
        prof = [float(v) for v in cfg["profile"]]
        if len(prof) not in (1, tau):
            raise ValidationError(f"biomass profile has {len(prof)} entries, expected 1 or {tau}")
        return tuple(prof)
    if "sinusoid" in cfg:
        p = cfg["sinusoid"]
        n = np.arange(1, tau + 1)
        vals = float(p["mean"]) + float(p.get("sign", 1)) * float(p["amplitude"]) * \
            np.sin(2 * np.pi * float(p["cycles"]) * n / tau + float(p.get("phase", 0.0)))
        return tuple(np.maximum(vals, 0.0).tolist())
    raise ValidationError("biomass needs one of constant, profile, sinusoid or state")


def _reaction(cfg, names, tau, fr):
    model = cfg["model"]
    if model in ("monod", "contois"):
        mu = float(cfg["mu"]) * fr
        k = float(cfg["k"])
        sub = _entry_index(names, cfg["substrate"])
        bio = cfg["biomass"]
        if model == "contois":
            if "state" not in bio:
                raise ValidationError("Contois growth needs a state biomass entry")
            return kin.Contois(mu, k, sub, _entry_index(names, bio["state"]))
        if "state" in bio:
            return kin.Monod(mu, k, sub, biomass_index=_entry_index(names, bio["state"]))
        return kin.Monod(mu, k, sub, biomass_profile=_biomass(bio, tau))
    if model in ("non_interactive", "geometric"):
        a = _reaction(cfg["a"], names, tau, fr)
        b = _reaction(cfg["b"], names, tau, fr)
        return kin.NonInteractive(a, b) if model == "non_interactive" else \
            kin.GeometricInteractive(a, b)
    raise kin.UnsupportedKinetics(
        f"unknown kinetics model {model!r}; use monod, contois, non_interactive or geometric")


def _canon_reaction(cfg, fr):
    out = copy.deepcopy(cfg)
    if out["model"] in ("monod", "contois"):
        out["mu"] = float(cfg["mu"]) * fr
    else:
        out["a"] = _canon_reaction(cfg["a"], fr)
        out["b"] = _canon_reaction(cfg["b"], fr)
    return out


def _kinetics(cfg, s, tau, units, paper):
    fr = _factor(RATE_UNITS, units["rate"], "rate", paper)
    names = list(cfg["states"])
    tanks = cfg["tanks"]
    if len(tanks) != s:
        raise ValidationError(f"kinetics lists {len(tanks)} tanks, network has {s}")
    col = _Collector()
    reactions, kappas = [], []
    for i, t in enumerate(tanks):
        rx = [col.run(f"tanks[{i}].reactions[{j}]", _reaction, r, names, tau, fr)
              for j, r in enumerate(t.get("reactions") or [])]
        reactions.append(rx)
        kap = np.asarray(t.get("kappa", np.zeros((len(names), 0))), dtype=float)
        if kap.size == 0:
            kap = np.zeros((len(names), len(rx)))
        kappas.append(kap)
    col.raise_if_any()
    rnames = cfg.get("reaction_names")
    spec = kin.KineticsSpec(reactions, kappas, len(names), state_names=tuple(names),
                            reaction_names=tuple(rnames) if rnames else None)
    canon = dict(states=names, tanks=[dict(reactions=[_canon_reaction(r, fr)
                                                      for r in t.get("reactions") or []],
                                           kappa=_tolist(k))
                                      for t, k in zip(tanks, kappas)])
    if rnames:
        canon["reaction_names"] = list(rnames)
    return spec, canon


def _weights(value, s, width, what, notes):
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1:
        arr = np.tile(arr, (s, 1))
    if arr.shape[0] != s:
        raise ValidationError(f"{what} needs {s} rows, got {arr.shape[0]}")
    if arr.shape[1] > width:
        extra = arr[:, width:]
        if np.any(extra != 0):
            raise ValidationError(f"{what} has {arr.shape[1]} entries per tank, expected {width}")
        notes.append(f"{what}: trailing zero entries beyond {width} dropped "
                     f"(given {arr.shape[1]} per tank)")
        arr = arr[:, :width]
    if arr.shape[1] != width:
        raise ValidationError(f"{what} has {arr.shape[1]} entries per tank, expected {width}")
    return arr


def _objective(cfg, s, m, r, names, notes):
    kind = cfg["type"]
    if kind == "substrate_outflow":
        eta = _weights(cfg["eta"], s, m, "eta", notes)
        return SubstrateOutflow(eta), dict(type=kind, eta=_tolist(np.asarray(cfg["eta"], dtype=float)))
    if kind == "biogas":
        sigma = _weights(cfg["sigma"], s, r, "sigma", notes)
        capture = [int(i) for i in cfg.get("capture", range(s))]
        if any(not 0 <= i < s for i in capture):
            raise IndexError(f"capture set {capture} has tanks outside 0..{s - 1}")
        return BiogasMax(sigma, tuple(capture)), dict(type=kind, sigma=_tolist(np.asarray(cfg["sigma"], dtype=float)),
                                                      capture=capture)
    if kind == "tracking":
        ms = m * s
        A = np.diag(np.broadcast_to(np.asarray(cfg["diag"], dtype=float), (ms,))) \
            if "diag" in cfg else np.asarray(cfg["A"], dtype=float)
        target = np.asarray(cfg["target"], dtype=float).ravel()
        if target.size == m:
            target = np.tile(target, s)
        if A.shape != (ms, ms) or target.size != ms:
            raise ValidationError(f"tracking needs an {ms}x{ms} matrix and {ms} targets")
        return SetpointTracking(A, target), dict(type=kind, A=A.tolist(), target=target.tolist())
    if kind == "composite":
        terms, canon = [], []
        for t in cfg["terms"]:
            obj, c = _objective(t["objective"], s, m, r, names, notes)
            terms.append((float(t.get("weight", 1.0)), obj))
            canon.append(dict(weight=float(t.get("weight", 1.0)), objective=c))
        return Composite(tuple(terms)), dict(type=kind, terms=canon)
    raise ValidationError(
        f"unknown objective type {kind!r}; use substrate_outflow, biogas, tracking or composite")


def _entry_table(cfg, names, s, what):
    """``{entry: scalar | per-tank list}`` into an (s, m) array with NaN elsewhere."""
    out = np.full((s, len(names)), np.nan)
    for key, val in (cfg or {}).items():
        out[:, _entry_index(names, key)] = _per_tank(val, s, f"{what}.{key}")
    return out


def _resolve(path, base_dir):
    path = Path(path)
    return path if path.is_absolute() or base_dir is None else Path(base_dir) / path


def _read_csv_columns(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    return {k: np.array([float(r[k]) for r in rows]) for k in rows[0]}


def _totals(cfg, tau, total_inflow, base_dir):
    from .influent import synth_influent
    if "values" in cfg:
        vals = np.atleast_1d(np.asarray(cfg["values"], dtype=float))
    elif "constant" in cfg:
        vals = np.full(tau, float(cfg["constant"]))
    elif "csv" in cfg:
        cols = _read_csv_columns(_resolve(cfg["csv"], base_dir))
        vals = cols[cfg["column"]]
    elif "synthetic" in cfg:
        params = dict(cfg["synthetic"])
        vals = synth_influent(params, TimeGrid(tau, 1.0), scale=total_inflow)
    else:
        raise ValidationError("allocation totals need values, constant, csv or synthetic")
    if vals.size != tau:
        raise ValidationError(f"allocation totals have {vals.size} entries, expected {tau}")
    return vals


# ---------------------------------------------------------------- load / dump


def scenario_from_config(cfg: dict, base_dir=None) -> Scenario:
    """Validate and compile a config dict; all problems are reported together."""
    cfg = copy.deepcopy(cfg)
    col = _Collector()
    units = dict(CANONICAL_UNITS)
    units.update({k: v for k, v in (cfg.get("units") or {}).items() if k != "paper_units"})
    paper = bool((cfg.get("units") or {}).get("paper_units", False))
    for key, table in (("flow", FLOW_UNITS), ("volume", VOLUME_UNITS), ("rate", RATE_UNITS),
                       ("time", TIME_UNITS)):
        col.run(f"units.{key}", _factor, table, units[key], key, paper)
    col.raise_if_any()
    mode = cfg.get("mode", TRANSIENT)
    if mode not in (TRANSIENT, STEADY):
        col.problems.append(f"mode: unknown mode {mode!r}; use transient or steady")
    hz = cfg.get("horizon") or {}
    notes = []
    if mode == STEADY:
        grid = TimeGrid(1, 1.0)
        boundary = "steady"
    else:
        ft = _factor(TIME_UNITS, units["time"], "time", paper)
        grid = col.run("horizon", lambda: TimeGrid(int(hz["tau"]), float(hz["delta"]) * ft))
        boundary = hz.get("boundary", FIXED)
        if boundary not in (FIXED, PERIODIC):
            col.problems.append(f"horizon.boundary: unknown boundary {boundary!r}")
    tau = grid.tau if grid else 1
    net = col.run("network", _network, cfg.get("network") or {}, units, paper)
    if net is None:
        col.raise_if_any()
    schedule, tank_names, net_canon = net
    s = schedule.n_tanks
    kres = col.run("kinetics", _kinetics, cfg.get("kinetics") or {}, s, tau, units, paper)
    if kres is None:
        col.raise_if_any()
    spec, kin_canon = kres
    names = list(spec.state_names)
    m, r = spec.n_states, spec.n_reactions
    obj, obj_cfg = col.run("objective", _objective, cfg.get("objective") or {}, s, m, r, names,
                           notes, default=(None, None))

    init = None
    if mode == TRANSIENT and boundary == FIXED:
        init = col.run("horizon.initial_state",
                       lambda: np.nan_to_num(_entry_table(hz.get("initial_state"), names, s,
                                                          "initial_state"), nan=0.0))
    infl = cfg.get("influent") or {}
    fixed = col.run("influent.fixed", _entry_table, infl.get("fixed"), names, s, "fixed")
    free = col.run("influent.free", lambda: [_entry_index(names, k) for k in infl.get("free", [])])
    influent = None
    if fixed is not None and free is not None:
        base = np.nan_to_num(fixed, nan=0.0)
        base[:, free] = np.nan
        influent = np.repeat(base[None], tau, axis=0)
        if "csv" in infl:
            def load_csv():
                cols = _read_csv_columns(_resolve(infl["csv"], base_dir))
                for key, vals in cols.items():
                    parts = key.split(":")
                    if len(parts) != 3 or parts[0] != "xin":
                        continue
                    i, k = int(parts[1]), _entry_index(names, parts[2])
                    if vals.size != tau:
                        raise ValidationError(f"column {key} has {vals.size} rows, expected {tau}")
                    influent[:, i, k] = vals
            col.run("influent.csv", load_csv)

    cons_cfg = cfg.get("constraints") or {}
    upper = col.run("constraints.upper_bounds",
                    lambda: np.nan_to_num(_entry_table(cons_cfg.get("upper_bounds"), names, s,
                                                       "upper_bounds"), nan=np.inf))
    q_total = float(schedule.network(1).inflow_rates.sum())
    allocs = []
    for a, acfg in enumerate(cons_cfg.get("allocations") or []):
        def make(acfg=acfg):
            entry = _entry_index(names, acfg["entry"])
            totals = _totals(acfg["totals"], tau, q_total, Path(base_dir) if base_dir else None)
            return Allocation(entry, totals, names[entry])
        allocs.append(col.run(f"constraints.allocations[{a}]", make))
    col.raise_if_any()
    constraints = ConstraintSet(influent=influent, upper_bounds=upper, allocations=tuple(allocs))
    col.run("constraints", constraints.validate, s, m, tau)
    for alloc in allocs:
        if influent is not None and not np.all(np.isnan(influent[:, :, alloc.entry])):
            col.problems.append(
                f"constraints.allocations: entry {alloc.name} is allocated but also fixed; "
                f"list it under influent.free")
    col.raise_if_any()

    canon = dict(name=cfg.get("name", "scenario"), mode=mode,
                 units=dict(CANONICAL_UNITS, paper_units=True) if paper else dict(CANONICAL_UNITS),
                 network=net_canon, kinetics=kin_canon, objective=obj_cfg)
    if mode == TRANSIENT:
        hz_c = dict(tau=tau, delta=grid.delta, boundary=boundary)
        if init is not None:
            hz_c["initial_state"] = {nm: init[:, k].tolist() for k, nm in enumerate(names)}
        canon["horizon"] = hz_c
    canon["influent"] = _tolist(dict(
        fixed={nm: np.nan_to_num(fixed[:, k]).tolist() for k, nm in enumerate(names)
               if k not in free},
        free=[names[k] for k in free],
        **({"csv": str(_resolve(infl["csv"], base_dir))} if "csv" in infl else {})))
    canon["constraints"] = dict(
        upper_bounds={nm: upper[:, k].tolist() for k, nm in enumerate(names)
                      if np.any(np.isfinite(upper[:, k]))},
        allocations=[dict(entry=names[al.entry], totals=dict(values=al.totals.tolist()))
                     for al in allocs])
    for key in ("description", "outputs", "solver", "plot"):
        if key in cfg:
            canon[key] = copy.deepcopy(cfg[key])
    return Scenario(name=canon["name"], mode=mode, network=schedule, kinetics=spec, grid=grid,
                    objective=obj, constraints=constraints,
                    boundary=boundary if mode == TRANSIENT else "steady",
                    initial_state=None if init is None else init.ravel(),
                    config=canon, notes=notes, base_dir=Path(base_dir) if base_dir else None)


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ValidationError(f"cannot read scenario {path}: {exc}") from exc
    try:
        cfg = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ValidationError(f"{path}: parse error: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top level must be a mapping")
    return scenario_from_config(cfg, base_dir=path.parent)


class _PlainDumper(yaml.SafeDumper):
    def ignore_aliases(self, data):
        return True


def config_text(cfg: dict) -> str:
    """YAML text without anchors, keys in insertion order."""
    return yaml.dump(cfg, Dumper=_PlainDumper, sort_keys=False, default_flow_style=None)


def dump_scenario(scenario: Scenario, path=None) -> str:
    """Canonical YAML; loading it gives an equal scenario."""
    text = config_text(scenario.to_config())
    if path is not None:
        Path(path).write_text(text)
    return text
