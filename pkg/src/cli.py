from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from typing import Any, Dict, List, Optional

import yaml
from dotenv import load_dotenv
from jsonschema.exceptions import ValidationError

from .bounds.pools import PoolSpec, coupling_problems
from .engine.types import PoolKind, ScenarioConfig
from .engine.validator import ScenarioError, build_scenario, validate_scenario
from .experiments.config import apply_overrides, load_config, set_path
from .experiments.export import write_json, write_table
from .experiments.plan import derived_scenario, plan_from_tree
from .experiments.runner import run_many, run_many_coupled
from .experiments.scaling import ScalingSpec, run_scaling, scaling_rows
from .experiments.sweeps import SweepSpec, run_sweep, sweep_rows
from .experiments.tables import TableSpec, run_table, scaled_reps

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2


class ConfigProblem(Exception):
    def __init__(self, messages: List[str]):
        super().__init__("\n".join(messages))
        self.messages = messages


def load_tree(args: argparse.Namespace) -> Dict[str, Any]:
    try:
        tree = load_config(args.config)
    except ValueError as exc:
        raise ConfigProblem([f"{args.config}: {exc}"]) from exc
    flags = {
        "seed": getattr(args, "seed", None),
        "horizon": getattr(args, "horizon", None),
        "burnin": getattr(args, "burnin", None),
        "sample_dt": getattr(args, "sample_dt", None),
    }
    for key, value in flags.items():
        if value is not None:
            tree = set_path(tree, key, value)
    try:
        return apply_overrides(tree, getattr(args, "set", None) or [])
    except (ValueError, IndexError) as exc:
        raise ConfigProblem([f"bad override: {exc}"]) from exc


def scenario(tree: Dict[str, Any]) -> ScenarioConfig:
    cfg = build_scenario(tree)
    problems = validate_scenario(cfg)
    if problems:
        raise ConfigProblem(problems)
    return cfg


def out_dir(args: argparse.Namespace, name: str) -> str:
    base = args.out or os.path.join(os.getenv("RJSQ_OUT_DIR", "runs"), name)
    os.makedirs(base, exist_ok=True)
    return base


def emit(data: Dict[str, Any]) -> None:
    print(json.dumps(data, ensure_ascii=False, indent=2, default=str))


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = scenario(load_tree(args))
    metrics = run_many(cfg, args.reps, out_dir(args, cfg.scenario_id), args.parallel)
    emit(metrics)
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    tree = load_tree(args)
    spec = SweepSpec.from_tree(tree, args.reps)
    if args.variable:
        spec.variable = args.variable
    if args.grid:
        spec.grid = [float(v) for v in args.grid.split(",")]
    if args.refine:
        spec.refine = True
    result = run_sweep(spec, args.parallel)
    target = out_dir(args, f"{tree.get('scenario_id', 'scenario')}-sweep-{spec.variable}")
    columns, rows = sweep_rows(result)
    write_table(os.path.join(target, "sweep.csv"), columns, rows)
    best = result.best.estimates[spec.metric]
    emit({"variable": spec.variable, "argmin": result.argmin, "mean": best.mean, "half_width": best.half_width, "points": len(rows)})
    return EXIT_OK


def cmd_scaling(args: argparse.Namespace) -> int:
    tree = load_tree(args)
    spec = ScalingSpec.from_tree(tree, args.reps)
    if args.chi_rule:
        spec.chi_rule = args.chi_rule
    result = run_scaling(spec, args.parallel)
    target = out_dir(args, f"{tree.get('scenario_id', 'scenario')}-scaling")
    columns, rows = scaling_rows(result)
    write_table(os.path.join(target, "scaling.csv"), columns, rows)
    emit({"chi_rule": result.chi_rule, "slope": result.slope, "stderr": result.stderr, "points": len(rows)})
    return EXIT_OK


def cmd_plan(args: argparse.Namespace) -> int:
    tree = load_tree(args)
    report = plan_from_tree(tree, model=args.border_model)
    target = out_dir(args, f"{tree.get('scenario_id', 'scenario')}-plan")
    write_json(os.path.join(target, "plan.json"), report.as_dict())
    derived = derived_scenario(tree, report)
    with open(os.path.join(target, "scenario.yaml"), "w", encoding="utf-8") as f:
        yaml.safe_dump(derived, f, sort_keys=False)
    summary = report.as_dict()
    summary.pop("plan")
    emit(summary)
    return EXIT_OK


def cmd_table(args: argparse.Namespace) -> int:
    spec = TableSpec(
        table_id=args.id,
        reps=scaled_reps(args.id, args.scale, args.reps),
        seed=args.seed or 0,
        horizon=args.horizon or TableSpec.horizon,
        burnin=args.burnin if args.burnin is not None else TableSpec.burnin,
        sweep=args.sweep,
    )
    columns, rows = run_table(spec, args.parallel)
    target = out_dir(args, f"table-{args.id}")
    write_table(os.path.join(target, f"{args.id}.csv"), columns, rows)
    emit({"table": args.id, "reps": spec.reps, "rows": len(rows)})
    return EXIT_OK


def cmd_coupled(args: argparse.Namespace) -> int:
    tree = load_tree(args)
    kind = args.pool or (tree.get("pool") or {}).get("kind", PoolKind.SSP.value)
    cfg = scenario({k: v for k, v in tree.items() if k != "pool"} | {"pool": {"kind": kind}})
    problems = coupling_problems(cfg, PoolSpec.for_scenario(cfg, kind))
    if problems:
        raise ConfigProblem(problems)
    metrics = run_many_coupled(cfg, PoolKind(kind), args.reps, out_dir(args, f"{cfg.scenario_id}-{kind}"), args.parallel, args.record)
    emit({k: v for k, v in metrics.items() if k != "per_replication"})
    return EXIT_OK if metrics["holds"] else EXIT_RUNTIME


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=False, help="Path to YAML scenario")
    common.add_argument("--seed", type=int, default=None, help="Base seed")
    common.add_argument("--reps", type=int, default=None, help="Replications")
    common.add_argument("--horizon", type=float, default=None, help="Simulated minutes per replication")
    common.add_argument("--burnin", type=float, default=None, help="Minutes discarded at the start")
    common.add_argument("--out", default=None, help="Output directory")
    common.add_argument("--parallel", type=int, default=1, help="Worker processes")
    common.add_argument("--sample-dt", dest="sample_dt", type=float, default=None, help="Trajectory sampling interval")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE", help="Override a config entry")
    common.add_argument("-v", "--verbose", action="store_true", help="Debug logging")

    parser = argparse.ArgumentParser(description="Remote-queue routing simulation and tuning")
    sub = parser.add_subparsers(dest="cmd")
    sub.add_parser("simulate", parents=[common], help="Replicate one scenario")

    sweep = sub.add_parser("sweep", parents=[common], help="Mean total count over a parameter grid")
    sweep.add_argument("--variable", choices=["chi", "tau_bar", "delay", "rho", "n"], default=None)
    sweep.add_argument("--grid", default=None, help="Comma-separated values")
    sweep.add_argument("--refine", action="store_true", help="Refine around the balancing-fraction argmin")

    scaling = sub.add_parser("scaling", parents=[common], help="Scaled load imbalance along the heavy-traffic sequence")
    scaling.add_argument("--chi-rule", dest="chi_rule", choices=["fixed", "root_excess", "log_quarter_root"], default=None)

    plan = sub.add_parser("plan", parents=[common], help="Capacities, routing plan and tolerance")
    plan.add_argument("--border-model", dest="border_model", choices=["band", "exact"], default="band")

    table = sub.add_parser("table", parents=[common], help="Rebuild a reference results table")
    table.add_argument("--id", required=True, choices=["two_station", "five_station", "geographic"])
    table.add_argument("--scale", type=float, default=None, help="Fraction of the reference replication count")
    table.add_argument("--sweep", action="store_true", help="Search the optimal fraction instead of using the reference one")

    coupled = sub.add_parser("coupled", parents=[common], help="Check the service-pool lower bounds pathwise")
    coupled.add_argument("--pool", choices=["ssp", "mdsp"], default=None)
    coupled.add_argument("--record", action="store_true", help="Write gap trajectories")
    return parser


COMMANDS = {
    "simulate": cmd_simulate,
    "sweep": cmd_sweep,
    "scaling": cmd_scaling,
    "plan": cmd_plan,
    "table": cmd_table,
    "coupled": cmd_coupled,
}


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.cmd is None:
        parser.print_help()
        return EXIT_CONFIG
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.reps is None and args.cmd in ("simulate", "coupled"):
        args.reps = 10
    try:
        return COMMANDS[args.cmd](args)
    except ConfigProblem as exc:
        for message in exc.messages:
            print(message, file=sys.stderr)
        return EXIT_CONFIG
    except (ValidationError, ScenarioError, FileNotFoundError, yaml.YAMLError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:
        logger.exception("command %s failed", args.cmd)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
