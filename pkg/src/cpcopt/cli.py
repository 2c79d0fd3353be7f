"""Command-line front end.

Subcommands:
  solve    solve a track (built-in scenario or JSON definition) and export artifacts
  suite    run a set of scenarios and summarize pass/fail
  verify   re-check an exported solution CSV against a scenario's track
  timings  segment-based lap-timing statistics for a trajectory CSV
  list     list built-in scenarios

Exit codes: 0 solved and verified, 2 solved but verification failed,
1 anything else.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from concurrent.futures import ProcessPoolExecutor, as_completed
from pathlib import Path

import numpy as np

from .scenarios import (
    ScenarioResult,
    get_scenario,
    list_scenarios,
    load_scenario_file,
    run_scenario,
)
from .solver import SolverOptions
from .verify import lap_timings

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_UNVERIFIED = 2


class CliError(Exception):
    """User-facing error: printed to stderr, exits with EXIT_ERROR."""


def _scenario_arg(name: str):
    if name.endswith(".json") or os.path.sep in name:
        try:
            return load_scenario_file(name)
        except json.JSONDecodeError as err:
            raise CliError(
                f"cannot parse scenario file {name!r}: {err}\n"
                "expected a JSON object with keys: name, config, node_count, d_tol, "
                "waypoints [[x,y,z],...], start_position [x,y,z], end_conditions, "
                "and optionally initializer, init_args, model, expected, notes"
            )
        except (OSError, ValueError, KeyError, TypeError) as err:
            raise CliError(f"cannot load scenario file {name!r}: {err}")
    try:
        return get_scenario(name)
    except KeyError as err:
        raise CliError(str(err.args[0]))


def _apply_overrides(scenario, args):
    """Scenario parameter overrides from the command line, validated upfront."""
    import dataclasses

    kw = {}
    if getattr(args, "nodes", None) is not None:
        if args.nodes < 2:
            raise CliError("--nodes must be >= 2")
        kw["node_count"] = args.nodes
    if getattr(args, "d_tol", None) is not None:
        if args.d_tol <= 0:
            raise CliError("--d-tol must be positive")
        kw["d_tol"] = args.d_tol
    if getattr(args, "config", None) is not None:
        from .quad_model import named_config

        try:
            named_config(args.config)
        except KeyError as err:
            raise CliError(str(err.args[0]))
        kw["config_key"] = args.config
    if getattr(args, "model", None) is not None:
        kw["model"] = args.model
    if getattr(args, "initializer", None) is not None:
        kw["initializer"] = args.initializer
    if kw:
        # overriding the definition invalidates the catalog expectations
        kw.setdefault("expected", ())
        scenario = dataclasses.replace(scenario, **kw)
    return scenario


def _solver_options(args) -> SolverOptions:
    kw = {}
    if getattr(args, "kkt_tolerance", None) is not None:
        kw["kkt_tolerance"] = args.kkt_tolerance
    if getattr(args, "max_iterations", None) is not None:
        kw["max_iterations"] = args.max_iterations
    if getattr(args, "max_wall_time", None) is not None:
        kw["max_wall_time"] = args.max_wall_time
    return SolverOptions(**kw)


def _write_artifacts(result: ScenarioResult, outdir: Path) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    name = result.scenario.name
    sol = result.solution.renormalized()
    sol.to_csv(outdir / f"{name}_trajectory.csv")
    sol.progress_to_csv(outdir / f"{name}_progress.csv", initial_lam=result.initial_lam)
    result.verification.to_json(outdir / f"{name}_verification.json")
    with open(outdir / f"{name}_report.json", "w") as fh:
        json.dump(result.as_dict(), fh, indent=2)
        fh.write("\n")


def _print_result(result: ScenarioResult) -> None:
    rep = result.report
    print(
        f"{result.scenario.name}: {rep.status.name} t_N={result.solution.total_time:.4f} s "
        f"iters={rep.iterations} verified={result.verification.ok}"
    )
    for row in result.comparison:
        mark = "PASS" if row.passed else "FAIL"
        print(
            f"  {row.quantity}: achieved {row.achieved:.4f} expected {row.expected:.4f} "
            f"(±{row.rel_tol * 100:.1f}%) {mark}"
        )


def _result_exit_code(result: ScenarioResult) -> int:
    if not getattr(result.report, "success", False):
        return EXIT_ERROR
    if not result.verification.ok:
        return EXIT_UNVERIFIED
    return EXIT_OK


def cmd_solve(args) -> int:
    scenario = _apply_overrides(_scenario_arg(args.scenario), args)
    rng = np.random.default_rng(args.seed) if args.seed is not None else None
    try:
        result = run_scenario(scenario, solver_options=_solver_options(args), rng=rng)
    except RuntimeError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    _print_result(result)
    if args.output:
        _write_artifacts(result, Path(args.output))
    return _result_exit_code(result)


def _run_one(name: str) -> dict:
    result = run_scenario(name)
    return result.as_dict()


def _suite_names(patterns, include_long) -> list[str]:
    available = list_scenarios()
    if not patterns:
        names = list(available)
    else:
        names = []
        for pat in patterns:
            # an exact name selects just that scenario; otherwise treat as prefix
            matched = [pat] if pat in available else [n for n in available if n.startswith(pat)]
            if not matched:
                raise CliError(f"no scenario matches {pat!r}")
            names.extend(m for m in matched if m not in names)
    if not include_long:
        names = [n for n in names if not get_scenario(n).long_running]
    if not names:
        raise CliError("selection matched only long-running scenarios; use --include-long")
    return names


def cmd_suite(args) -> int:
    names = _suite_names(args.scenarios, args.include_long)
    threads = int(os.environ.get("CPC_THREADS", "1"))
    outdir = Path(args.output) if args.output else None
    summaries = []
    failed = False
    if threads > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            futures = {pool.submit(_run_one, n): n for n in names}
            for fut in as_completed(futures):
                name = futures[fut]
                try:
                    summaries.append(fut.result())
                except Exception as err:
                    print(f"{name}: error: {err}", file=sys.stderr)
                    failed = True
    else:
        for name in names:
            try:
                result = run_scenario(name)
                summaries.append(result.as_dict())
                _print_result(result)
                if outdir:
                    _write_artifacts(result, outdir)
            except Exception as err:
                print(f"{name}: error: {err}", file=sys.stderr)
                failed = True
    summaries.sort(key=lambda s: s["scenario"])
    ok = all(s["ok"] for s in summaries) and not failed
    print(f"suite: {sum(s['ok'] for s in summaries)}/{len(names)} passed")
    if outdir:
        outdir.mkdir(parents=True, exist_ok=True)
        with open(outdir / "suite_summary.json", "w") as fh:
            json.dump(summaries, fh, indent=2)
            fh.write("\n")
    return EXIT_OK if ok else EXIT_ERROR


def _read_trajectory_csv(path):
    data = np.genfromtxt(path, delimiter=",", names=True)
    t = data["t"]
    pos = np.stack([data["px"], data["py"], data["pz"]], axis=1)
    return t, pos


def cmd_verify(args) -> int:
    from .solution import Solution
    from .progress import ProgressVariables
    from .verify import verify_solution

    scenario = _scenario_arg(args.scenario)
    problem, track, cfg = scenario.build()
    data = np.genfromtxt(args.trajectory, delimiter=",", names=True)
    t = data["t"]
    states = np.stack(
        [data[k] for k in ("px", "py", "pz", "qw", "qx", "qy", "qz", "vx", "vy", "vz", "wx", "wy", "wz")],
        axis=1,
    )
    n_u = problem.grid.input_dim
    inputs = np.stack([data[f"T{i + 1}"] for i in range(n_u)], axis=1)[:-1]
    N = states.shape[0] - 1
    lam = np.linspace(1.0, 0.0, N + 1)[:, None] * np.ones((1, track.waypoint_count))
    sol = Solution(
        total_time=float(t[-1]),
        states=states,
        inputs=inputs,
        progress=ProgressVariables(lam=lam, mu=-np.diff(lam, axis=0), nu=np.zeros((N, track.waypoint_count))),
        metadata={"model": scenario.model},
    )
    report = verify_solution(sol, track, cfg, refinement=args.refinement)
    # progress variables are not in the CSV; complementarity is out of scope here
    print(report.to_json())
    wp_ok = bool(
        np.all(report.waypoints.min_distance <= track.tolerance + report.waypoint_slack)
    )
    ok = wp_ok and report.input_bounds["ok"] and report.quaternion_drift["ok"]
    return EXIT_OK if ok else EXIT_UNVERIFIED


def cmd_timings(args) -> int:
    t, pos = _read_trajectory_csv(args.trajectory)
    if args.reference:
        _, ref = _read_trajectory_csv(args.reference)
    else:
        ref = pos
    window = None
    if args.window:
        lo, hi = args.window.split(":")
        window = (float(lo), float(hi))
    try:
        report = lap_timings(t, pos, ref, points_per_lap=args.points, window=window)
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR
    print(json.dumps(report.as_dict(), indent=2))
    return EXIT_OK


def cmd_list(args) -> int:
    for name in list_scenarios():
        sc = get_scenario(name)
        tag = " (long)" if sc.long_running else ""
        exp = ", ".join(f"{e.quantity}={e.value:g}±{e.rel_tol * 100:g}%" for e in sc.expected)
        print(f"{name}{tag}: N={sc.node_count} d_tol={sc.d_tol:g} config={sc.config_key} {exp}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cpcopt", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)

    ps = sub.add_parser("solve", help="solve one scenario (built-in name or JSON file)")
    ps.add_argument("scenario")
    ps.add_argument("-o", "--output", help="directory for CSV/JSON artifacts")
    ps.add_argument("--kkt-tolerance", type=float, dest="kkt_tolerance")
    ps.add_argument("--max-iterations", type=int, dest="max_iterations")
    ps.add_argument("--max-wall-time", type=float, dest="max_wall_time")
    ps.add_argument("--seed", type=int, help="seed for randomized initializers")
    ps.add_argument("--nodes", type=int, help="override discretization node count")
    ps.add_argument("--d-tol", type=float, dest="d_tol", help="override waypoint tolerance [m]")
    ps.add_argument("--config", help="override quadrotor configuration name")
    ps.add_argument("--model", choices=["full", "reduced", "point_mass"], help="override dynamics model")
    ps.add_argument(
        "--initializer",
        choices=["default", "endpoint_interp", "bang_bang", "point_mass", "orientation_interp"],
        help="override the initial-guess generator",
    )
    ps.set_defaults(func=cmd_solve)

    pu = sub.add_parser("suite", help="run the default scenario suite")
    pu.add_argument(
        "scenarios",
        nargs="*",
        help="scenario names or name prefixes, e.g. 'p2p' (default: all non-long)",
    )
    pu.add_argument("-o", "--output", help="directory for artifacts and summary JSON")
    pu.add_argument("--include-long", action="store_true", help="also run long-running scenarios")
    pu.set_defaults(func=cmd_suite)

    pv = sub.add_parser("verify", help="verify an exported trajectory CSV")
    pv.add_argument("scenario", help="scenario the trajectory belongs to")
    pv.add_argument("trajectory", help="trajectory CSV path")
    pv.add_argument("--refinement", type=int, default=10)
    pv.set_defaults(func=cmd_verify)

    pt = sub.add_parser("timings", help="lap-timing statistics for a trajectory CSV")
    pt.add_argument("trajectory")
    pt.add_argument("--reference", help="reference-lap CSV (default: the trajectory itself)")
    pt.add_argument("--points", type=int, default=40)
    pt.add_argument("--window", help="time window lo:hi to analyze")
    pt.set_defaults(func=cmd_timings)

    pl = sub.add_parser("list", help="list built-in scenarios")
    pl.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
