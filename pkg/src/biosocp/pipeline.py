"""Build, solve, certify and replay one scenario, writing the run artifacts."""

from __future__ import annotations

import csv
import hashlib
import json
import logging
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .exactness import certify, _jsonable
from .network import ValidationError
from .program import build_steady_state, build_transient
from .scenario import TRANSIENT, Scenario, dump_scenario, load_scenario, scenario_from_config
from .simulate import ConvergenceError, forward_simulate, write_trajectory_csv
from .solver import Solution, SolverOptions, solve, verify_kkt
from .solver.ipm import INFEASIBLE, MAX_ITERATIONS, NUMERICAL_FAILURE, OPTIMAL, UNBOUNDED

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_VALIDATION = 2
EXIT_INFEASIBLE = 3
EXIT_NUMERICAL = 4
EXIT_INEXACT = 5
EXIT_UNBOUNDED = 6
EXIT_SIMULATION = 7

EXIT_CODES = {
    EXIT_OK: "ok",
    EXIT_ERROR: "unexpected error",
    EXIT_VALIDATION: "invalid scenario or input",
    EXIT_INFEASIBLE: "program infeasible",
    EXIT_NUMERICAL: "numerical failure or iteration limit",
    EXIT_INEXACT: "relaxation not exact within tolerance",
    EXIT_UNBOUNDED: "program unbounded",
    EXIT_SIMULATION: "forward simulation disagrees with the exact solution",
}

SIMULATION_TOL = 1e-6
FULL_TAU = 1345

SOLUTION_BLOCKS = ("xi", "xin", "T", "lam", "rho", "rate_floor_dual")


def status_exit_code(status: str) -> int:
    return {OPTIMAL: EXIT_OK, INFEASIBLE: EXIT_INFEASIBLE, UNBOUNDED: EXIT_UNBOUNDED,
            MAX_ITERATIONS: EXIT_NUMERICAL, NUMERICAL_FAILURE: EXIT_NUMERICAL}.get(status, EXIT_ERROR)


# ---------------------------------------------------------------- scenario sources


def preset_config(name: str, tau: int = None, paper_units: bool = False) -> dict:
    from . import presets
    if name == "wastewater":
        kw = dict(paper_units=paper_units)
        if tau is not None:
            kw["tau"] = tau
        return presets.wastewater_config(**kw)
    if name in ("gradostat", "gradostat-transient"):
        kw = dict(mode="transient" if name.endswith("transient") else "steady")
        if tau is not None:
            kw["tau"] = tau
        return presets.gradostat_config(**kw)
    raise ValidationError(f"unknown preset {name!r}; choose wastewater, gradostat, "
                          "gradostat-transient")


def resolve_scenario(path=None, preset: str = None, tau: int = None,
                     paper_units: bool = False) -> Scenario:
    """Load a scenario file or build a preset, optionally overriding the horizon length.

    A horizon override applies to the raw config, so synthetic allocation
    totals are regenerated at the new length.  Configs that list explicit
    per-step totals fail validation if the lengths no longer agree.
    """
    if (path is None) == (preset is None):
        raise ValidationError("give exactly one of a scenario file or a preset")
    if preset is not None:
        return scenario_from_config(preset_config(preset, tau, paper_units))
    if tau is None:
        return load_scenario(path)
    path = Path(path)
    try:
        cfg = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ValidationError(f"{path}: top level must be a mapping")
    cfg.setdefault("horizon", {})["tau"] = int(tau)
    return scenario_from_config(cfg, base_dir=path.parent)


def build_program(scenario: Scenario):
    return build_transient(scenario) if scenario.mode == TRANSIENT else build_steady_state(scenario)


# ---------------------------------------------------------------- artifact files


def write_solution_csv(path, scenario: Scenario, solution: Solution):
    blocks = {k: solution.blocks[k] for k in SOLUTION_BLOCKS if k in solution.blocks}
    write_trajectory_csv(path, scenario, blocks)


def read_solution_csv(path, scenario: Scenario) -> Solution:
    """Rebuild a certifiable Solution (named blocks only) from a solution CSV."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValidationError(f"{path}: empty solution file")
    header, body = rows[0], rows[1:]
    data = np.array([[float(v) if v != "" else np.nan for v in row] for row in body])
    data = data.reshape(len(body), len(header))
    blocks = {}
    for q in SOLUTION_BLOCKS:
        cols = [j for j, h in enumerate(header) if h.split(":")[0] == q]
        if cols:
            blocks[q] = data[:, cols]
    missing = {"xi", "T", "rho"} - set(blocks)
    if missing:
        raise ValidationError(f"{path}: missing columns for {sorted(missing)}")
    s, m, r = scenario.dims
    rows_expected = scenario.grid.tau + 1 if scenario.mode == TRANSIENT else 1
    if blocks["xi"].shape != (rows_expected, s * m) or blocks["T"].shape[1] != s * r:
        raise ValidationError(f"{path}: solution shape does not match the scenario")
    blocks["upper_active"] = _upper_active(scenario, blocks["xi"])
    empty = np.zeros(0)
    return Solution(x=empty, y=empty, z=empty, s=empty, status=OPTIMAL, objective=np.nan,
                    dual_objective=np.nan, gap=np.nan, rel_gap=np.nan, pres=np.nan,
                    dres=np.nan, iterations=0, blocks=blocks)


def _upper_active(scenario, xi, rel=1e-6) -> bool:
    s, m, _ = scenario.dims
    steps = scenario.grid.steps if scenario.mode == TRANSIENT else [None]
    rows = xi[1:] if scenario.mode == TRANSIENT else xi
    for row, n in zip(rows, steps):
        up = scenario.constraints.upper_at(n, s, m)
        if up is None:
            continue
        up = np.asarray(up, dtype=float).ravel()
        ok = np.isfinite(up)
        if np.any(row[ok] >= up[ok] - rel * np.maximum(1.0, np.abs(up[ok]))):
            return True
    return False


def write_plot_tsv(path, scenario: Scenario, solution: Solution, window=None):
    """Influent allocation and effluent concentration series over a step window."""
    xi, xin = solution.xi, solution.xin
    names = scenario.state_names
    s, m, _ = scenario.dims
    first, last = (1, scenario.grid.tau) if window is None else window
    first, last = max(first, 1), min(last, scenario.grid.tau)
    header = ["step", "time"]
    header += [f"influent:{i}:{names[k]}" for i in range(s) for k in range(m)]
    header += [f"effluent:{i}:{names[k]}" for i in range(s) for k in range(m)]
    times = scenario.grid.times
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, delimiter="\t")
        w.writerow(header)
        for n in range(first, last + 1):
            w.writerow([n, f"{times[n]:.10g}"] + [f"{v:.10g}" for v in xin[n]]
                       + [f"{v:.10g}" for v in xi[n]])


def environment_versions() -> dict:
    import numba
    import scipy
    return dict(package=__version__, python=platform.python_version(), numpy=np.__version__,
                scipy=scipy.__version__, numba=numba.__version__, pyyaml=yaml.__version__,
                platform=platform.platform())


def solution_digest(solution: Solution) -> str:
    return hashlib.sha256(np.ascontiguousarray(solution.x, dtype=float).tobytes()).hexdigest()


# ---------------------------------------------------------------- the run


@dataclass
class RunOptions:
    solver: dict = field(default_factory=dict)
    tol: float = 1e-6
    margin: float = 1e-9
    samples: int = 1000
    seed: int = 0
    simulate: bool = True
    plot_window: tuple = None
    kkt_tol: float = 1e-7

    def to_dict(self):
        return dict(solver=dict(self.solver), tol=self.tol, margin=self.margin,
                    samples=self.samples, seed=self.seed, simulate=self.simulate,
                    plot_window=list(self.plot_window) if self.plot_window else None,
                    kkt_tol=self.kkt_tol)

    @classmethod
    def from_dict(cls, d):
        d = dict(d or {})
        if d.get("plot_window"):
            d["plot_window"] = tuple(d["plot_window"])
        return cls(**d)


@dataclass
class RunResult:
    exit_code: int
    scenario: Scenario
    solution: Solution = None
    report: object = None
    manifest: dict = None
    simulation_error: float = None
    files: dict = field(default_factory=dict)

    @property
    def message(self) -> str:
        return EXIT_CODES.get(self.exit_code, "unknown")


def run(scenario: Scenario, out_dir=None, options: RunOptions = None) -> RunResult:
    """Build, solve, certify and (transient, exact) replay; write artifacts to ``out_dir``."""
    options = options or RunOptions()
    timings = {}
    t0 = time.perf_counter()
    program = build_program(scenario)
    timings["build"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    solution = solve(program, SolverOptions.from_dict(options.solver))
    timings["solve"] = time.perf_counter() - t0
    code = status_exit_code(solution.status)
    result = RunResult(exit_code=code, scenario=scenario, solution=solution)
    manifest = dict(
        scenario=scenario.name, mode=scenario.mode, versions=environment_versions(),
        command=sys.argv, options=options.to_dict(),
        program=program.summary(), solver=dict(
            status=solution.status, iterations=solution.iterations,
            objective=solution.objective, dual_objective=solution.dual_objective,
            rel_gap=solution.rel_gap, primal_residual=solution.pres,
            dual_residual=solution.dres),
        timings=timings, notes=list(scenario.notes),
        config=scenario.to_config())

    if solution.status == OPTIMAL:
        kkt = verify_kkt(program, solution, options.kkt_tol)
        manifest["kkt"] = kkt.as_dict()
        t0 = time.perf_counter()
        report = certify(scenario, solution, options.tol, options.margin, options.samples,
                         options.seed)
        timings["certify"] = time.perf_counter() - t0
        result.report = report
        manifest["verdicts"] = dict(
            exact=report.exact, certified=report.certified, summary=report.summary(),
            corollaries=report.corollaries, advisory=report.advisory,
            steady=None if report.steady is None else report.steady.get("verdict"))
        if not report.exact:
            result.exit_code = EXIT_INEXACT
        elif scenario.mode == TRANSIENT and options.simulate:
            t0 = time.perf_counter()
            try:
                traj = forward_simulate(scenario, solution.xin[1:], solution.xi[0])
                err = float(np.max(np.abs(traj.xi - solution.xi)))
            except (ConvergenceError, ValidationError) as exc:
                log.error("forward simulation failed: %s", exc)
                err = float("inf")
            timings["simulate"] = time.perf_counter() - t0
            result.simulation_error = err
            manifest["simulation"] = dict(max_abs_error=err, tol=SIMULATION_TOL,
                                          consistent=err <= SIMULATION_TOL)
            if not err <= SIMULATION_TOL:
                result.exit_code = EXIT_SIMULATION
        manifest["solution_sha256"] = solution_digest(solution)
    manifest["exit_code"] = result.exit_code
    manifest["exit_message"] = result.message
    result.manifest = _jsonable(manifest)

    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        files = dict(manifest=out / "manifest.json", scenario=out / "scenario.yaml")
        dump_scenario(scenario, files["scenario"])
        if solution.status == OPTIMAL:
            files["solution"] = out / "solution.csv"
            files["report"] = out / "report.json"
            write_solution_csv(files["solution"], scenario, solution)
            files["report"].write_text(result.report.to_json(indent=1))
            if scenario.mode == TRANSIENT:
                files["plot"] = out / "plot.tsv"
                write_plot_tsv(files["plot"], scenario, solution, options.plot_window)
        files["manifest"].write_text(json.dumps(result.manifest, indent=1))
        result.files = {k: str(v) for k, v in files.items()}
    return result


def replay_manifest(path, out_dir=None) -> tuple[RunResult, dict]:
    """Re-run the scenario and options stored in a manifest; report what matched."""
    manifest = json.loads(Path(path).read_text())
    scenario = scenario_from_config(manifest["config"], base_dir=Path(path).parent)
    result = run(scenario, out_dir, RunOptions.from_dict(manifest["options"]))
    check = dict(
        iterations=(manifest["solver"]["iterations"], result.solution.iterations),
        status=(manifest["solver"]["status"], result.solution.status),
        solution_sha256=(manifest.get("solution_sha256"), result.manifest.get("solution_sha256")))
    check["identical"] = all(a == b for a, b in check.values())
    return result, check
