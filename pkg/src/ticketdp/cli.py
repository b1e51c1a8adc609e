"""Command-line front end: run the benchmark, report on it, validate configs."""

from __future__ import annotations

import argparse
import json
import sys

from . import experiment, metrics
from . import scenarios as sc


def _build_run_config(args) -> experiment.BenchmarkConfig:
    if args.config:
        config = experiment.load_config(args.config)
        if args.preset:
            raise SystemExit("use either --config or --preset, not both")
    elif args.preset == "desk":
        config = experiment.desk_preset()
    else:
        config = experiment.full_preset()
    overrides = {}
    if args.runs is not None:
        overrides["runs"] = args.runs
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.scenarios is not None:
        overrides["scenario_ids"] = tuple(s.strip() for s in args.scenarios.split(","))
    if args.dump_trajectories:
        overrides["dump_trajectories"] = True
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = experiment.BenchmarkConfig.from_dict({**config.to_dict(), **overrides})
    return config


def _cmd_run(args) -> int:
    config = _build_run_config(args)
    summary = experiment.run_benchmark(config)
    print(f"wrote raw results to {summary['out_dir']}")
    print(f"cells: {summary['cells']}  cases: {summary['cases_completed']}"
          f"/{summary['cases_expected']}  wall: {summary['wall_seconds']:.1f}s")
    if summary["failures"]:
        print(f"{len(summary['failures'])} case(s) failed:", file=sys.stderr)
        for f in summary["failures"]:
            print(f"  {f['scenario']} {f['label']} {f['env_id']}: {f['error']}",
                  file=sys.stderr)
        return 1
    return 0


def _cmd_report(args) -> int:
    summary = metrics.emit_report(args.in_dir, args.out, args.group_by, args.confidence)
    print(metrics.human_tables(summary))
    return 0


def _cmd_validate(args) -> int:
    try:
        config = (experiment.load_config(args.config) if args.config
                  else experiment.BenchmarkConfig())
        experiment.validate_config(config)
        specs = experiment.benchmark_scenarios(config)
        envs = experiment.environments(config)
        # Building every profile exercises the component and mass invariants.
        oracles, proxies = sc.build_library(specs, config.horizon_t, config.target_mass)
    except (ValueError, OSError, json.JSONDecodeError) as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 1
    n_proxies = sum(len(p) for p in proxies.values())
    print(f"ok: {len(specs)} scenarios, {n_proxies} proxies, {len(envs)} environments, "
          f"{config.runs} runs per case")
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ticketdp",
        description="Ticket-pricing DP benchmark: demand misspecification revenue loss")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run the benchmark grid and persist raw results")
    run_p.add_argument("--config", help="JSON config file mirroring BenchmarkConfig")
    run_p.add_argument("--preset", choices=["desk", "full"],
                       help="desk: minutes-scale grid; full: benchmark-scale grid")
    run_p.add_argument("--runs", type=int, help="simulation runs per case")
    run_p.add_argument("--seed", type=int, help="master seed")
    run_p.add_argument("--out", help="output directory")
    run_p.add_argument("--scenarios", help="comma-separated scenario ids, e.g. SC1,SC3")
    run_p.add_argument("--dump-trajectories", action="store_true",
                       help="also write per-period trajectory rows (large)")
    run_p.add_argument("--workers", type=int, help="parallel worker processes")
    run_p.set_defaults(func=_cmd_run)

    rep_p = sub.add_parser("report", help="compute metrics and tables from raw results")
    rep_p.add_argument("--in", dest="in_dir", required=True,
                       help="directory written by `ticketdp run`")
    rep_p.add_argument("--out", help="report directory (default: <in>/report)")
    rep_p.add_argument("--group-by", action="append",
                       choices=sorted(metrics.GROUPING_COLUMNS),
                       help="grouping key, repeatable (default: all)")
    rep_p.add_argument("--confidence", type=float, default=0.95,
                       help="confidence level for paired tests (default 0.95)")
    rep_p.set_defaults(func=_cmd_report)

    val_p = sub.add_parser("validate", help="check a config and its scenario manifest")
    val_p.add_argument("--config", help="JSON config file (default: built-in defaults)")
    val_p.set_defaults(func=_cmd_validate)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
