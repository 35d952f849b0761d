"""Command-line interface.

Subcommands: topology, plan, validate, export-lp, solve-exact,
solve-benders, experiment. Exit codes: 0 success, 1 validation failure,
2 problem-size cap exceeded, 3 configuration error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .harness import (CapExceeded, ConfigError, ScenarioConfig,
                      ValidationFailure, build_scenario_teg,
                      generate_services, plan_with, run_scenario, sweep)
from .ilp import build_full_model, export_lp, export_metadata
from .model import (plan_from_json, plan_to_json, services_from_json,
                    services_to_json, validate_plan)
from .teg import serialize

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_CAP = 2
EXIT_CONFIG = 3


def _load_config(args) -> ScenarioConfig:
    if not args.config:
        raise ConfigError("--config is required for this subcommand")
    text = Path(args.config).read_text()
    cfg = ScenarioConfig.from_json(text)
    if getattr(args, "seed", None) is not None:
        cfg.services = type(cfg.services)(
            **{**cfg.services.__dict__, "rng_seed": args.seed})
    if getattr(args, "algo", None):
        cfg.algorithm = args.algo
        cfg.__post_init__()
    if getattr(args, "k", None) is not None:
        cfg.k = args.k
    return cfg


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _scenario_inputs(cfg: ScenarioConfig):
    teg = build_scenario_teg(cfg)
    services = generate_services(cfg.services, teg)
    return teg, services


def cmd_topology(args) -> int:
    cfg = _load_config(args)
    teg = build_scenario_teg(cfg)
    _emit(serialize(teg), args.out)
    return EXIT_OK


def cmd_plan(args) -> int:
    cfg = _load_config(args)
    metrics, plan = run_scenario(cfg)
    document = json.loads(plan_to_json(plan))
    # wall time is excluded so the artifact is byte-identical across runs
    document["metrics"] = {k: v for k, v in metrics.items()
                           if k not in ("perServiceLatency", "wallTime")}
    document["metrics"]["perServiceLatency"] = {
        str(k): v for k, v in metrics["perServiceLatency"].items()}
    _emit(json.dumps(document, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load_config(args)
    plan = plan_from_json(Path(args.plan).read_text())
    teg, services = _scenario_inputs(cfg)
    if args.services:
        services = services_from_json(Path(args.services).read_text())
    violations = validate_plan(plan, teg, services, cfg.latency_params())
    if violations:
        for v in violations:
            print(v, file=sys.stderr)
        return EXIT_INVALID
    print("plan is valid")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    cfg = _load_config(args)
    teg, services = _scenario_inputs(cfg)
    model = build_full_model(teg, services, cfg.latency_params())
    text = export_lp(model)
    _emit(text, args.out)
    if args.out:
        Path(args.out).with_suffix(".meta.json").write_text(
            export_metadata(model))
    return EXIT_OK


def _exact(args, algorithm: str) -> int:
    cfg = _load_config(args)
    cfg.algorithm = algorithm
    metrics, plan = run_scenario(cfg)
    document = json.loads(plan_to_json(plan))
    document["metrics"] = {k: v for k, v in metrics.items()
                           if k not in ("perServiceLatency", "wallTime")}
    _emit(json.dumps(document, indent=2, sort_keys=True), args.out)
    return EXIT_OK


def cmd_solve_exact(args) -> int:
    return _exact(args, "exact")


def cmd_solve_benders(args) -> int:
    return _exact(args, "benders")


def cmd_experiment(args) -> int:
    cfg = _load_config(args)
    values = [json.loads(v) for v in args.values.split(",")]
    algorithms = tuple(args.algos.split(",")) if args.algos else None
    csv_text = sweep(args.axis, values, cfg, algorithms=algorithms)
    _emit(csv_text, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stnplan",
        description="Planning toolkit for dynamic satellite-terrestrial "
                    "networks: time-evolving topology, exact ILP solves, "
                    "and heuristic planners.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, services=False):
        p.add_argument("--config", required=True,
                       help="scenario configuration JSON file")
        p.add_argument("--seed", type=int, help="service generator seed")
        p.add_argument("--out", help="output file (default: stdout)")

    p = sub.add_parser("topology", help="build and export the time-evolving graph")
    common(p)
    p.set_defaults(func=cmd_topology)

    p = sub.add_parser("plan", help="run a planner and export the plan")
    common(p)
    p.add_argument("--algo", choices=["tedg", "ew", "dg", "ga", "exact",
                                      "benders"])
    p.add_argument("--k", type=int, help="candidate paths per horizon")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("validate", help="check a plan against the scenario")
    common(p)
    p.add_argument("--plan", required=True, help="plan JSON file")
    p.add_argument("--services", help="service list JSON (default: regenerate)")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("export-lp", help="write the full linearized model as LP text")
    common(p)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("solve-exact", help="branch-and-bound solve of the full model")
    common(p)
    p.set_defaults(func=cmd_solve_exact)

    p = sub.add_parser("solve-benders", help="decomposition branch-and-cut solve")
    common(p)
    p.set_defaults(func=cmd_solve_benders)

    p = sub.add_parser("experiment", help="sweep one scenario axis to CSV")
    common(p)
    p.add_argument("--axis", required=True,
                   choices=["capacity", "sdsCount", "serviceCount", "k"])
    p.add_argument("--values", required=True,
                   help="comma-separated axis values")
    p.add_argument("--algos", help="comma-separated algorithms (default: config)")
    p.add_argument("--algo", choices=["tedg", "ew", "dg", "ga", "exact",
                                      "benders"])
    p.add_argument("--k", type=int)
    p.set_defaults(func=cmd_experiment)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CapExceeded as exc:
        print(f"problem size cap exceeded: {exc}", file=sys.stderr)
        return EXIT_CAP
    except ValidationFailure as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
