"""Command-line entry point: ``signalfree <command> [options]``.

Exit codes: 0 success, 1 configuration or input error, 2 safety monitor
violation, 3 numerical failure or infeasible request.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import io
from .baseline import run_baseline
from .config import ScenarioConfig, bundled_scenario, bundled_scenarios, dump_config, parse_config, with_overrides
from .feasibility import PredecessorContext, feasibility_map
from .metrics import compare
from .model import ConfigurationError, DomainError, InfeasibleError, NumericalError, VehicleLimits
from .ocp import BoundaryConditions, solve
from .sim import RunResult, run

EXIT_OK, EXIT_CONFIG, EXIT_MONITOR, EXIT_NUMERIC = 0, 1, 2, 3

# Published improvement figures, printed next to ours for comparison only.
REFERENCE_IMPROVEMENT = {"fuel": 0.466, "travel_time": 0.309}


def _load(args: argparse.Namespace) -> ScenarioConfig:
    source = args.config
    path = Path(source)
    if not path.exists() and source in bundled_scenarios():
        path = bundled_scenario(source)
    cfg = parse_config(path)
    return with_overrides(
        cfg,
        **{
            "arrivals.seed": getattr(args, "seed", None),
            "simulation.sample_step": getattr(args, "sample_step", None),
            "output.dir": getattr(args, "out", None),
        },
    )


def _out_dir(cfg: ScenarioConfig) -> Path:
    return Path(cfg.output.dir)


def write_run(result: RunResult, cfg: ScenarioConfig) -> list[Path]:
    out = _out_dir(cfg)
    o = cfg.output
    return [
        io.write_text(out / o.trajectories, io.trajectory_csv(result.trajectory_rows())),
        io.write_json(out / o.metrics, result.summary.to_dict()),
        io.write_text(out / o.events, result.log.to_jsonl()),
        io.write_text(out / o.schedule, io.schedule_csv(result.entries)),
        io.write_text(out / "config.cfg", dump_config(cfg)),
    ]


def _report_violations(result: RunResult) -> None:
    for vid, rep in sorted(result.rear_end.items()):
        if rep.violated:
            print(f"rear-end violation: vehicle {vid}, min gap {rep.min_gap:.6g} m at t={rep.t_min:.6g} s", file=sys.stderr)
    for v in result.lateral:
        print(f"lateral violation: vehicles {v.first_id} and {v.second_id} overlap by {v.overlap:.6g} s", file=sys.stderr)


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run(cfg, strict=False)
    for path in write_run(result, cfg):
        print(path)
    s = result.summary
    print(f"vehicles={s.n_vehicles} rejections={s.n_rejections} mean_travel_time={s.mean_travel_time:.6g} s "
          f"mean_fuel={s.mean_fuel:.6g} l")
    if result.violated:
        _report_violations(result)
        return EXIT_MONITOR
    return EXIT_OK


def cmd_baseline(args: argparse.Namespace) -> int:
    cfg = _load(args)
    summary = run_baseline(cfg)
    path = io.write_json(_out_dir(cfg) / "baseline_metrics.json", summary.to_dict())
    print(path)
    print(f"vehicles={summary.n_vehicles} mean_travel_time={summary.mean_travel_time:.6g} s "
          f"mean_fuel={summary.mean_fuel:.6g} l")
    return EXIT_OK


def cmd_compare(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run(cfg, strict=False)
    write_run(result, cfg)
    cmp = compare(result.summary, run_baseline(cfg))
    data = cmp.to_dict()
    data["reference_improvement"] = REFERENCE_IMPROVEMENT
    print(io.write_json(_out_dir(cfg) / "comparison.json", data))
    print(f"fuel improvement {100 * cmp.fuel_improvement:.1f}% (reference {100 * REFERENCE_IMPROVEMENT['fuel']:.1f}%)")
    print(f"travel time improvement {100 * cmp.travel_time_improvement:.1f}% "
          f"(reference {100 * REFERENCE_IMPROVEMENT['travel_time']:.1f}%)")
    if result.violated:
        _report_violations(result)
        return EXIT_MONITOR
    return EXIT_OK


def cmd_schedule(args: argparse.Namespace) -> int:
    cfg = _load(args)
    result = run(cfg, strict=False)
    text = io.schedule_csv(result.entries)
    if args.stdout:
        sys.stdout.write(text)
    else:
        print(io.write_text(_out_dir(cfg) / cfg.output.schedule, text))
    return EXIT_MONITOR if result.violated else EXIT_OK


def _limits(args: argparse.Namespace) -> VehicleLimits | None:
    if args.unconstrained:
        return None
    if args.config:
        return _load(args).to_limits()
    return VehicleLimits(args.u_min, args.u_max, args.v_min, args.v_max)


def cmd_solve(args: argparse.Namespace) -> int:
    limits = _limits(args)
    traj = solve(BoundaryConditions(args.t0, args.v0, args.tm, args.L), limits)
    arcs = [
        {"kind": a.kind.value, "t_start": a.t_start, "t_end": a.t_end, "a": a.a, "b": a.b, "c": a.c, "d": a.d}
        for a in traj.arcs
    ]
    summary = {"arcs": arcs, "cost": sum(a.cost() for a in traj.arcs), "vm": traj.terminal_speed}
    text = io.solution_csv(traj, args.sample_step)
    if args.out:
        out = Path(args.out)
        print(io.write_text(out / "solution.csv", text))
        print(io.write_json(out / "solution.json", summary))
    else:
        print(json.dumps(summary, sort_keys=True))
        sys.stdout.write(text)
    return EXIT_OK


def cmd_feasibility_map(args: argparse.Namespace) -> int:
    cfg = _load(args)
    f = cfg.feasibility
    geom = cfg.to_geometry()
    if f.k_tm is None:
        ctx = PredecessorContext.constant_speed(f.k_t0, f.k_v0, geom.cz_length, geom.mz_side, geom.min_gap, cfg.to_limits())
    else:
        traj = solve(BoundaryConditions(f.k_t0, f.k_v0, f.k_tm, geom.cz_length), cfg.to_limits())
        ctx = PredecessorContext.from_trajectory(traj, geom.cz_length, geom.mz_side, geom.min_gap, cfg.to_limits())
    res = args.resolution or f.resolution
    raster = feasibility_map(ctx, (f.tau_min, f.tau_max), (f.upsilon_min, f.upsilon_max), res)
    print(io.write_text(_out_dir(cfg) / cfg.output.raster, io.raster_csv(raster)))
    print(f"feasible points: {int(raster.feasible.sum())} of {raster.feasible.size}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="signalfree", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def scenario(p: argparse.ArgumentParser) -> None:
        p.add_argument("config", help="scenario file, or the name of a bundled scenario")
        p.add_argument("--out", help="output directory (overrides output.dir)")
        p.add_argument("--seed", type=int, help="arrival seed (overrides arrivals.seed)")
        p.add_argument("--sample-step", type=float, help="sampling step in s")

    scenario(sub.add_parser("simulate", help="coordinated run"))
    scenario(sub.add_parser("baseline", help="fixed-cycle signal run"))
    scenario(sub.add_parser("compare", help="coordinated vs baseline improvement ratios"))
    p = sub.add_parser("schedule", help="merging-zone entry schedule as CSV")
    scenario(p)
    p.add_argument("--stdout", action="store_true", help="print instead of writing a file")
    p = sub.add_parser("feasibility-map", help="feasible (entry time, entry speed) raster")
    scenario(p)
    p.add_argument("--resolution", type=int, help="grid points per axis")

    p = sub.add_parser("solve", help="single energy-optimal trajectory")
    p.add_argument("--t0", type=float, required=True)
    p.add_argument("--v0", type=float, required=True)
    p.add_argument("--tm", type=float, required=True)
    p.add_argument("--L", type=float, default=400.0)
    p.add_argument("--config", help="take limits from this scenario")
    p.add_argument("--u-min", type=float, default=-4.0)
    p.add_argument("--u-max", type=float, default=2.0)
    p.add_argument("--v-min", type=float, default=0.0)
    p.add_argument("--v-max", type=float, default=30.0)
    p.add_argument("--unconstrained", action="store_true", help="ignore speed and control limits")
    p.add_argument("--sample-step", type=float, default=0.1)
    p.add_argument("--out", help="directory for solution.csv and solution.json")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "baseline": cmd_baseline,
    "compare": cmd_compare,
    "schedule": cmd_schedule,
    "solve": cmd_solve,
    "feasibility-map": cmd_feasibility_map,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args)
    except (ConfigurationError, DomainError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (InfeasibleError, NumericalError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
