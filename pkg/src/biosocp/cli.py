"""Command-line entry point: ``python -m biosocp <command> ...``."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import yaml

from . import __version__
from .discretize import TimeGrid
from .exactness import certify
from .influent import synth_influent, write_series
from .network import ValidationError
from .pipeline import (EXIT_CODES, EXIT_ERROR, EXIT_INEXACT, EXIT_OK, EXIT_VALIDATION, FULL_TAU,
                       RunOptions, build_program, preset_config, read_solution_csv, replay_manifest,
                       resolve_scenario, run, status_exit_code)
from .program import write_interchange
from .scenario import TRANSIENT, config_text, dump_scenario
from .simulate import ConvergenceError, forward_simulate
from .solver import SolverOptions, solve

log = logging.getLogger("biosocp")

PRESETS = ("wastewater", "gradostat", "gradostat-transient")


def _add_source(p, tau=True):
    p.add_argument("scenario", nargs="?", help="scenario YAML file")
    p.add_argument("--preset", choices=PRESETS, help="use a built-in scenario instead of a file")
    p.add_argument("--paper-units", action="store_true",
                   help="wastewater preset with unit-length steps and unconverted rates")
    if tau:
        p.add_argument("--tau", type=int, help="override the number of steps")
        p.add_argument("--full", action="store_true",
                       help=f"full-length wastewater horizon (tau={FULL_TAU})")


def _add_solver(p):
    g = p.add_argument_group("solver")
    g.add_argument("--feastol", type=float, help="primal/dual residual tolerance")
    g.add_argument("--gaptol", type=float, help="relative duality gap tolerance")
    g.add_argument("--max-iter", type=int, help="interior-point iteration limit")


def _solver_dict(args) -> dict:
    d = {}
    for key in ("feastol", "gaptol", "max_iter"):
        v = getattr(args, key, None)
        if v is not None:
            d[key] = v
    return d


def _scenario(args):
    tau = getattr(args, "tau", None)
    if getattr(args, "full", False):
        tau = FULL_TAU
    return resolve_scenario(args.scenario, args.preset, tau, args.paper_units)


def _window(text):
    if text is None:
        return None
    try:
        a, b = text.split(":")
        return int(a), int(b)
    except ValueError:
        raise argparse.ArgumentTypeError("window must look like FIRST:LAST") from None


# ---------------------------------------------------------------- commands


def cmd_validate(args) -> int:
    sc = _scenario(args)
    s, m, r = sc.dims
    print(f"{sc.name}: valid {sc.mode} scenario")
    print(f"  tanks {s}, states {m} ({', '.join(sc.state_names)}), reactions {r}")
    if sc.mode == TRANSIENT:
        print(f"  steps {sc.grid.tau} of {sc.grid.delta:.6g} day, boundary {sc.boundary}")
    for note in sc.notes:
        print(f"  note: {note}")
    if args.emit:
        dump_scenario(sc, args.emit)
        print(f"  canonical config written to {args.emit}")
    return EXIT_OK


def _print_run(result):
    sol = result.solution
    rows = [("scenario", result.scenario.name), ("status", sol.status),
            ("iterations", str(sol.iterations)), ("objective", f"{sol.objective:.10g}"),
            ("relative gap", f"{sol.rel_gap:.3g}")]
    if result.report is not None:
        rep = result.report
        rows.append(("exactness", rep.summary()))
        if rep.corollaries:
            rows.append(("corollaries", rep.corollaries.get("verdict", "")))
        if rep.steady:
            rows.append(("steady certificate", rep.steady.get("verdict", "")))
        for a in rep.advisory:
            rows.append(("advisory", a))
    for note in result.scenario.notes:
        rows.append(("note", note))
    if result.simulation_error is not None:
        rows.append(("replay error", f"{result.simulation_error:.3g}"))
    for k, v in result.manifest.get("timings", {}).items():
        rows.append((f"time {k}", f"{v:.3f} s"))
    for k, v in result.files.items():
        rows.append((f"file {k}", v))
    rows.append(("exit", f"{result.exit_code} ({result.message})"))
    width = max(len(k) for k, _ in rows)
    for k, v in rows:
        print(f"{k:<{width}}  {v}")


def _run_options(args) -> RunOptions:
    return RunOptions(solver=_solver_dict(args), tol=args.tol, margin=args.margin,
                      simulate=not args.no_simulate, plot_window=args.plot_window)


def cmd_run(args) -> int:
    if args.replay:
        result, check = replay_manifest(args.replay, args.out)
        _print_run(result)
        print("replay " + ("identical" if check["identical"] else "differs") + ": "
              + json.dumps({k: v for k, v in check.items() if k != "identical"}))
        return result.exit_code if check["identical"] else EXIT_ERROR
    sc = _scenario(args)
    out = args.out or Path("runs") / sc.name
    result = run(sc, out, _run_options(args))
    _print_run(result)
    return result.exit_code


def _read_influent_csv(path, scenario):
    """Per-tank influent CSV with ``xin:tank:entry`` columns (tank index or name)."""
    names = scenario.state_names
    tanks = [t.get("name") for t in scenario.config.get("network", {}).get("tanks", [])]
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != scenario.grid.tau:
        raise ValidationError(f"{path}: {len(rows)} rows, expected {scenario.grid.tau}")
    out = scenario.fixed_influent()
    for col in rows[0]:
        parts = col.split(":")
        if len(parts) != 3 or parts[0] != "xin":
            continue
        try:
            tank = int(parts[1]) if parts[1].isdigit() else tanks.index(parts[1])
            entry = names.index(parts[2])
        except ValueError:
            raise ValidationError(f"{path}: unknown tank or entry in column {col!r}") from None
        out[:, tank, entry] = [float(r[col]) for r in rows]
    if np.any(np.isnan(out)):
        raise ValidationError(f"{path}: decision influent entries left without a column")
    return out


def cmd_simulate(args) -> int:
    sc = _scenario(args)
    if sc.mode != TRANSIENT:
        raise ValidationError("simulate needs a transient scenario")
    s, m, _ = sc.dims
    x0 = sc.initial_state
    if args.solution:
        sol = read_solution_csv(args.solution, sc)
        xin, x0 = sol.xin[1:], sol.xi[0]
    elif args.influent:
        xin = _read_influent_csv(args.influent, sc)
    else:
        xin = sc.fixed_influent()
        if np.any(np.isnan(xin)):
            raise ValidationError("scenario has decision influent entries; pass --influent "
                                  "or --solution")
    if x0 is None:
        raise ValidationError("scenario has no initial state; pass --solution")
    traj = forward_simulate(sc, xin, x0)
    out = args.output or f"{sc.name}-trajectory.csv"
    traj.to_csv(out, sc)
    print(f"simulated {sc.grid.tau} steps, max Newton iterations {int(traj.iterations.max())}, "
          f"{traj.clipped} clipped entries; trajectory written to {out}")
    if args.solution:
        err = float(np.max(np.abs(traj.xi - sol.xi)))
        print(f"max deviation from the solution states: {err:.3g}")
    return EXIT_OK


def cmd_certify(args) -> int:
    sc = _scenario(args)
    if args.solution:
        sol = read_solution_csv(args.solution, sc)
    else:
        sol = solve(build_program(sc), SolverOptions.from_dict(_solver_dict(args)))
        code = status_exit_code(sol.status)
        if code != EXIT_OK:
            print(f"solver status {sol.status}")
            return code
    rep = certify(sc, sol, args.tol, args.margin)
    print(rep.summary())
    if rep.corollaries:
        print(f"corollaries: {rep.corollaries.get('verdict')}")
    if rep.omega_min is not None:
        worst = int(np.argmin(rep.omega_min))
        print(f"smallest certificate entry {rep.omega_min[worst]:.6g} at step {worst + 1}")
        print(f"dual identity error {rep.dual_identity_error:.3g}")
    if rep.steady:
        print(f"steady certificate: {rep.steady['verdict']} (margin {rep.steady['margin']:g})")
    for a in rep.advisory:
        print(f"advisory: {a}")
    if args.output:
        Path(args.output).write_text(rep.to_json(indent=1))
        print(f"report written to {args.output}")
    return EXIT_OK if rep.exact else EXIT_INEXACT


def cmd_export(args) -> int:
    sc = _scenario(args)
    prog = build_program(sc)
    out = args.output or f"{sc.name}.conic.txt"
    write_interchange(prog, out)
    summ = prog.summary()
    print(f"{summ['columns']} columns, {summ['equalities']} equalities, "
          f"{summ['cone_rows']} cone rows written to {out}")
    return EXIT_OK


def cmd_synth(args) -> int:
    from .presets import DEFAULT_INFLUENT
    if args.params:
        params = yaml.safe_load(Path(args.params).read_text())
        if not isinstance(params, dict):
            raise ValidationError(f"{args.params}: expected a mapping of series name to parameters")
    else:
        params = {k: dict(v) for k, v in DEFAULT_INFLUENT.items()}
        for v in params.values():
            if v.get("spike_step") is None:
                v["spike_step"] = int(round(0.75 * args.tau))
    grid = TimeGrid(args.tau, 1.0)
    series = {name: synth_influent(dict(p or {}), grid, args.scale) for name, p in params.items()}
    out = args.output or "influent.csv"
    write_series(out, series)
    print(f"{len(series)} series of {args.tau} steps written to {out}")
    return EXIT_OK


def cmd_preset(args) -> int:
    tau = FULL_TAU if args.full else args.tau
    cfg = preset_config(args.name, tau, args.paper_units)
    text = config_text(cfg)
    if args.output:
        Path(args.output).write_text(text)
        print(f"{args.name} preset written to {args.output}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _batch_job(job):
    path, out, options = job
    logging.basicConfig(level=logging.WARNING)
    try:
        sc = resolve_scenario(path)
        result = run(sc, out, RunOptions.from_dict(options))
        return path, result.exit_code, result.report.summary() if result.report else \
            result.solution.status
    except ValidationError as exc:
        return path, EXIT_VALIDATION, str(exc)
    except Exception as exc:  # noqa: BLE001 - one bad job must not sink the batch
        return path, EXIT_ERROR, f"{type(exc).__name__}: {exc}"


def cmd_batch(args) -> int:
    root = Path(args.out)
    options = _run_options(args).to_dict()
    jobs, seen = [], {}
    for path in args.scenarios:
        stem = Path(path).stem
        seen[stem] = seen.get(stem, 0) + 1
        name = stem if seen[stem] == 1 else f"{stem}-{seen[stem]}"
        jobs.append((path, str(root / name), options))
    with ProcessPoolExecutor(max_workers=args.jobs) as pool:
        results = list(pool.map(_batch_job, jobs))
    worst = EXIT_OK
    for (path, code, text), (_, out, _) in zip(results, jobs):
        print(f"{code}  {path} -> {out}: {text}")
        worst = max(worst, code)
    return worst


# ---------------------------------------------------------------- parser


def build_parser() -> argparse.ArgumentParser:
    codes = "\n".join(f"  {k}  {v}" for k, v in EXIT_CODES.items())
    parser = argparse.ArgumentParser(
        prog="biosocp", formatter_class=argparse.RawDescriptionHelpFormatter,
        description="Convex relaxations of bioprocess network control problems.",
        epilog="exit codes:\n" + codes)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="load and check a scenario")
    _add_source(p)
    p.add_argument("--emit", help="write the canonical config to this file")
    p.set_defaults(func=cmd_validate)

    def certify_args(p):
        p.add_argument("--tol", type=float, default=1e-6, help="relative exactness tolerance")
        p.add_argument("--margin", type=float, default=1e-9, help="certificate positivity margin")

    p = sub.add_parser("run", help="solve, certify, replay and write all artifacts")
    _add_source(p)
    _add_solver(p)
    certify_args(p)
    p.add_argument("--out", help="output directory (default runs/<scenario name>)")
    p.add_argument("--no-simulate", action="store_true", help="skip the forward replay")
    p.add_argument("--plot-window", type=_window, help="steps FIRST:LAST for plot.tsv")
    p.add_argument("--replay", metavar="MANIFEST", help="re-run a previous manifest and compare")
    p.set_defaults(func=cmd_run)

    p = sub.add_parser("simulate", help="integrate the nonlinear dynamics")
    _add_source(p)
    p.add_argument("--influent", help="CSV with xin:tank:entry columns, one row per step")
    p.add_argument("--solution", help="replay the influent and initial state of a solution CSV")
    p.add_argument("-o", "--output", help="trajectory CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("certify", help="exactness checks for a solution")
    _add_source(p)
    _add_solver(p)
    certify_args(p)
    p.add_argument("--solution", help="solution CSV from a previous run (otherwise solve)")
    p.add_argument("-o", "--output", help="report JSON")
    p.set_defaults(func=cmd_certify)

    p = sub.add_parser("export-program", help="write the conic program as a sparse text file")
    _add_source(p)
    p.add_argument("-o", "--output", help="output file")
    p.set_defaults(func=cmd_export)

    p = sub.add_parser("synth-influent", help="generate synthetic influent totals")
    p.add_argument("--params", help="YAML mapping of series name to generator parameters")
    p.add_argument("--tau", type=int, default=96)
    p.add_argument("--scale", type=float, default=1.0, help="multiplier applied to every series")
    p.add_argument("-o", "--output", help="output CSV (default influent.csv)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("preset", help="write a built-in scenario as a config file")
    p.add_argument("name", choices=PRESETS)
    p.add_argument("--tau", type=int)
    p.add_argument("--full", action="store_true")
    p.add_argument("--paper-units", action="store_true")
    p.add_argument("-o", "--output")
    p.set_defaults(func=cmd_preset)

    p = sub.add_parser("batch", help="run several scenario files concurrently")
    p.add_argument("scenarios", nargs="+")
    p.add_argument("--out", default="runs", help="parent directory; one subdirectory per scenario")
    p.add_argument("--jobs", type=int, default=None, help="worker processes")
    _add_solver(p)
    certify_args(p)
    p.add_argument("--no-simulate", action="store_true")
    p.add_argument("--plot-window", type=_window)
    p.set_defaults(func=cmd_batch)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
