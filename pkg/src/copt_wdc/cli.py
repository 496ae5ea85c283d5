"""Command-line interface.

Subcommands: gen-scenario, run, baseline, synthetic, validate.  Config
files are JSON; flags override config values.  All outputs are CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .datacenter import Scenario, equiprobable_policy
from .harness import ExperimentConfig, gen_scenario, run_experiment, synthetic_study, validate
from .harness import _final_metrics


def _parse_seeds(text: str) -> list[int]:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _parse_overrides(pairs) -> dict:
    out = {}
    for pair in pairs or []:
        key, _, value = pair.partition("=")
        if not _:
            raise SystemExit(f"override {pair!r} must look like key=value")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
    return out


def _load_scenario(args) -> Scenario:
    if getattr(args, "scenario", None):
        return Scenario.from_json(args.scenario)
    if getattr(args, "config", None):
        config = ExperimentConfig.from_json(args.config)
        return config.scenario
    raise SystemExit("provide --scenario or --config")


def _add_run_flags(parser):
    parser.add_argument("--config", help="experiment config JSON")
    parser.add_argument("--scenario", help="scenario JSON (overrides config scenario)")
    parser.add_argument("--preset", choices=["t1-row1", "t1-row2", "t1-row3"])
    parser.add_argument("--iters", type=int, help="iteration horizon T")
    parser.add_argument("--seeds", help="comma-separated seed list")
    parser.add_argument("--out", help="output directory")
    parser.add_argument("--solver", choices=["acscpg", "cscgd", "both"])


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="copt-wdc")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen-scenario", help="generate a scenario JSON")
    gen.add_argument("kind", choices=["paper-iv", "desk"])
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out", required=True, help="output scenario path")
    gen.add_argument("--set", action="append", dest="overrides", metavar="KEY=VALUE")

    run = sub.add_parser("run", help="run solvers on a data-center scenario")
    _add_run_flags(run)

    base = sub.add_parser("baseline", help="evaluate the equiprobable baseline")
    base.add_argument("--config")
    base.add_argument("--scenario")
    base.add_argument("--out", help="write the report JSON here (default stdout)")
    base.add_argument("--samples", type=int, default=20_000)

    syn = sub.add_parser("synthetic", help="convergence study on the synthetic problem")
    syn.add_argument("--out", default="out-synthetic")
    syn.add_argument("--iters", type=int, default=100_000)
    syn.add_argument("--seeds", default="0,1,2,3,4,5,6,7,8,9")
    syn.add_argument("--preset", choices=["t1-row1", "t1-row2", "t1-row3"])

    val = sub.add_parser("validate", help="run the oracle validation suites")
    val.add_argument("--config")
    val.add_argument("--scenario")
    val.add_argument("--seed", type=int, default=0)
    val.add_argument("--quick", action="store_true")
    val.add_argument("--out", help="write the report JSON here (default stdout)")

    args = parser.parse_args(argv)

    if args.command == "gen-scenario":
        scenario = gen_scenario(args.kind, args.seed, _parse_overrides(args.overrides))
        scenario.to_json(args.out)
        print(f"wrote {args.out}")
        return 0

    if args.command == "run":
        if args.config:
            config = ExperimentConfig.from_json(args.config)
        else:
            if not args.scenario:
                raise SystemExit("run requires --config or --scenario")
            config = ExperimentConfig(scenario=Scenario.from_json(args.scenario))
        if args.scenario:
            config.scenario = Scenario.from_json(args.scenario)
        if args.preset:
            config.preset = args.preset
        if args.iters:
            config.horizon = args.iters
        if args.seeds:
            config.seeds = _parse_seeds(args.seeds)
        if args.out:
            config.out_dir = args.out
        if args.solver:
            config.solver = args.solver
        summary = run_experiment(config)
        print(json.dumps({k: v for k, v in summary.items() if k != "runs"}, indent=2))
        return 1 if summary["all_failed"] else 0

    if args.command == "baseline":
        scenario = _load_scenario(args)
        x = equiprobable_policy(scenario).ravel()
        report = _final_metrics(scenario, x, args.samples, 9999)
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return 0

    if args.command == "synthetic":
        horizons = tuple(sorted({max(4, args.iters // 100), max(4, args.iters // 10), args.iters}))
        rows = synthetic_study(
            horizons=horizons,
            seeds=_parse_seeds(args.seeds),
            out_dir=args.out,
            presets=[args.preset] if args.preset else None,
        )
        print(f"wrote {args.out}/synthetic.csv ({len(rows)} rows)")
        return 0

    if args.command == "validate":
        scenario = None
        if args.scenario or args.config:
            scenario = _load_scenario(args)
        report = validate(scenario, seed=args.seed, quick=args.quick)
        text = json.dumps(report, indent=2, sort_keys=True)
        if args.out:
            Path(args.out).write_text(text + "\n")
        else:
            print(text)
        return 0 if report["passed"] else 1

    raise SystemExit(f"unknown command {args.command}")


if __name__ == "__main__":
    sys.exit(main())
