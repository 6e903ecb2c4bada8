"""Command-line entry point.

Subcommands mirror the pipeline stages (filter, matrix, knn, embed,
cluster, valence, report), plus synth, pipeline, and validate. Every
command reads the YAML config; ``--set key.path=value`` overrides any
config key from the command line. Exit codes: 0 ok, 2 config error,
3 data error, 4 numeric failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import yaml

from .config import load_config, validate_config
from .corpus import read_tweets, write_tweets
from .errors import ConfigError, DataError, NumericError
from .pipeline import STAGES, apply_recipe, run_pipeline, run_stage, run_synth

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", "-c", required=True, help="YAML config file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a config key (dotted path, YAML value); repeatable",
    )
    parser.add_argument("--seed", type=int, help="override the global seed")
    parser.add_argument("--jobs", type=int, help="override the jobs count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="stancelens",
        description="Stance clustering and valence analysis over tweet corpora.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a config file, list every problem")
    p.add_argument("--config", "-c", required=True)

    p = sub.add_parser("synth", help="generate the configured synthetic corpus")
    _add_common(p)

    p = sub.add_parser("filter", help="apply one recipe to a corpus file")
    _add_common(p)
    p.add_argument("--recipe", help="recipe name (default: run the configured chain)")
    p.add_argument("--input", help="input corpus (default: paths.raw)")
    p.add_argument("--output", help="output corpus (required with --recipe)")

    for name in STAGES[1:]:
        p = sub.add_parser(name, help=f"run the {name} stage")
        _add_common(p)
        p.add_argument("--force", action="store_true", help="ignore the stage manifest")

    p = sub.add_parser("pipeline", help="run every stage in order")
    _add_common(p)
    p.add_argument("--force", action="store_true", help="rerun all stages")

    return parser


def _load(args) -> dict:
    overrides = list(args.overrides)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.jobs is not None:
        overrides.append(f"jobs={args.jobs}")
    return load_config(args.config, overrides)


def _cmd_validate(args) -> int:
    path = Path(args.config)
    if not path.is_file():
        print(f"config file not found: {path}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        loaded = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except yaml.YAMLError as exc:
        print(f"config is not valid YAML: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    from .config import DEFAULTS, _deep_merge

    problems = validate_config(_deep_merge(DEFAULTS, loaded))
    if problems:
        for problem in problems:
            print(f"error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    print("config ok")
    return EXIT_OK


def _cmd_filter(args) -> int:
    cfg = _load(args)
    if args.recipe:
        recipes = cfg["filter"]["recipes"]
        if args.recipe not in recipes:
            raise ConfigError([f"unknown recipe {args.recipe!r}"])
        if not args.output:
            raise ConfigError(["--output is required with --recipe"])
        source = args.input or cfg["paths"].get("raw")
        if not source:
            raise ConfigError(["no input corpus: pass --input or set paths.raw"])
        tweets = list(read_tweets(source))
        tweets = apply_recipe(tweets, recipes[args.recipe], int(cfg["seed"]))
        count = write_tweets(tweets, args.output)
        print(f"{args.recipe}: retained {count} tweets -> {args.output}")
        return EXIT_OK
    result = run_stage("filter", cfg, force=True)
    _print_results([result])
    return EXIT_OK


def _cmd_stage(name: str, args) -> int:
    cfg = _load(args)
    result = run_stage(name, cfg, force=args.force)
    _print_results([result])
    return EXIT_OK


def _cmd_pipeline(args) -> int:
    cfg = _load(args)
    results = run_pipeline(cfg, force=args.force)
    _print_results(results)
    return EXIT_OK


def _cmd_synth(args) -> int:
    cfg = _load(args)
    outputs = run_synth(cfg)
    for path in outputs:
        print(f"wrote {path}")
    return EXIT_OK


def _print_results(results) -> None:
    for result in results:
        if result.skipped:
            print(f"{result.name}: up to date, skipped")
        else:
            print(f"{result.name}: done in {result.wall_time_s:.2f}s")
        for path in result.outputs:
            print(f"  {path}")


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "synth":
            return _cmd_synth(args)
        if args.command == "filter":
            return _cmd_filter(args)
        if args.command == "pipeline":
            return _cmd_pipeline(args)
        return _cmd_stage(args.command, args)
    except ConfigError as exc:
        for problem in exc.problems:
            print(f"config error: {problem}", file=sys.stderr)
        return EXIT_CONFIG
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
