"""Command-line experiment runner.

Subcommands::

    opamp run --config cfg.json                      # Monte Carlo + predictor CSV
    opamp se --config cfg.json                       # predictor-only CSV
    opamp figure --config cfg.json --axis <axis>     # plot-shaped CSV
    opamp validate --suite <name> [--seed K]         # oracle suites, JSON report

Exit codes: 0 success, 1 runtime/IO failure or failed validation suite,
2 usage or configuration error.
"""

import argparse
import json
import sys

from . import validate as validate_mod
from .experiments import ConfigError, ExperimentConfig, run_experiment


def _load_config(path):
    try:
        return ExperimentConfig.from_json(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None


def _write(path, text):
    if path is None:
        raise ConfigError("config needs 'output_path' for this command")
    with open(path, "w", newline="") as handle:
        handle.write(text)


def cmd_run(args):
    config = _load_config(args.config)
    table = run_experiment(config)
    _write(config.output_path, table.to_csv())
    print(f"wrote {config.output_path}")
    return 0


def cmd_se(args):
    config = _load_config(args.config)
    table = run_experiment(config, with_trials=False)
    _write(config.output_path, table.to_se_csv())
    print(f"wrote {config.output_path}")
    return 0


def cmd_figure(args):
    config = _load_config(args.config)
    table = run_experiment(config)
    _write(config.output_path, table.to_figure_csv(args.axis))
    print(f"wrote {config.output_path}")
    return 0


def cmd_validate(args):
    report = validate_mod.run_suite(args.suite, seed=args.seed)
    print(json.dumps(report, indent=2, sort_keys=True))
    return 0 if report["passed"] else 1


def build_parser():
    parser = argparse.ArgumentParser(
        prog="opamp",
        description="Partial-update AMP experiments: Monte Carlo runs, "
                    "state-evolution predictions, and validation suites.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="Monte Carlo trials plus predictor curves")
    p_run.add_argument("--config", required=True, help="JSON experiment config")
    p_run.set_defaults(func=cmd_run)

    p_se = sub.add_parser("se", help="state-evolution predictions only")
    p_se.add_argument("--config", required=True)
    p_se.set_defaults(func=cmd_se)

    p_fig = sub.add_parser("figure", help="plot-shaped CSV")
    p_fig.add_argument("--config", required=True)
    p_fig.add_argument("--axis", choices=("iterations", "multiplications"),
                       default="iterations")
    p_fig.set_defaults(func=cmd_figure)

    suite_names = sorted(set(validate_mod.SUITES) | set(validate_mod.SUITE_ALIASES))
    p_val = sub.add_parser("validate", help="run an oracle validation suite")
    p_val.add_argument("--suite", required=True, choices=suite_names)
    p_val.add_argument("--seed", type=int, default=0)
    p_val.set_defaults(func=cmd_validate)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
