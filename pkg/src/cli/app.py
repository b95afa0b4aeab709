"""Command-line surface: run, validate, eval, export.

Exit codes: 0 success, 2 config parse/validation failure, 3 runtime failure.
"""

import argparse
import asyncio
import json
import logging
import sys
from pathlib import Path

from src.application.commands.export_heatmaps_command import ExportHeatmapsCommand
from src.application.commands.run_experiment_command import RunExperimentCommand
from src.application.common.errors import ConfigParseError, ConfigValidationError
from src.application.queries.evaluate_checkpoint_query import EvaluateCheckpointQuery
from src.application.queries.validate_config_query import ValidateConfigQuery
from src.application.services.app_config_service import app_config
from src.application.services.env_service import get_log_level, load_env
from src.application.services.experiment_config_service import load_experiment_config
from src.cli.dependencies import get_mediator
from src.infrastructure.logging_config import get_logger, setup_colored_logging
from src.infrastructure.monitoring import initialize_sentry

logger = get_logger("cli")

EXIT_OK = 0
EXIT_INVALID = 2
EXIT_FAILED = 3


def _u64(value: str) -> int:
    seed = int(value)
    if not 0 <= seed < 2**64:
        raise argparse.ArgumentTypeError(f"seed must fit in an unsigned 64-bit integer, got {value}")
    return seed


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="neustrom", description="Neural Nyström experiments")
    parser.add_argument("--version", action="version", version=f"%(prog)s {app_config.get_version()}")
    sub = parser.add_subparsers(dest="command", required=True)

    def config_flags(p: argparse.ArgumentParser):
        p.add_argument("--config", required=True, help="experiment config (.conf) or a previous manifest.json")
        p.add_argument("--seed", type=_u64, help="master seed, overrides output.seed")
        p.add_argument("--out", help="artifact directory, overrides output.dir")
        p.add_argument("--trials", type=int, help="supervised trials, overrides supervised.trials")
        p.add_argument("--override", action="append", default=[], metavar="SECTION.KEY=VALUE",
                       help="override a config key (repeatable)")
        p.add_argument("--verbose", action="store_true", help="debug logging")

    config_flags(sub.add_parser("run", help="execute the configured pipeline"))
    config_flags(sub.add_parser("validate", help="validate a config without running it"))

    evaluate = sub.add_parser("eval", help="re-score a checkpoint against its dataset")
    config_flags(evaluate)
    evaluate.add_argument("--checkpoint", required=True, help="model.neus file")

    export = sub.add_parser("export", help="re-render heatmaps from matrix CSVs")
    export.add_argument("inputs", nargs="+", help="headerless matrix CSV files")
    export.add_argument("--out", help="output directory (default: next to each CSV)")
    export.add_argument("--verbose", action="store_true", help="debug logging")
    return parser


async def dispatch(args: argparse.Namespace) -> int:
    mediator = get_mediator()

    if args.command == "validate":
        report = await mediator.send(ValidateConfigQuery(args.config, args.override, args.seed, args.out, args.trials))
        print(report.model_dump_json(indent=2))
        return EXIT_OK if report.valid else EXIT_INVALID

    if args.command == "export":
        written = await mediator.send(ExportHeatmapsCommand(args.inputs, args.out))
        print("\n".join(written))
        return EXIT_OK

    try:
        config = load_experiment_config(args.config, args.override, args.seed, args.out, args.trials)
    except ConfigValidationError as e:
        for error in e.errors:
            logger.error("%s", error)
        return EXIT_INVALID
    except ConfigParseError as e:
        logger.error("%s", e)
        return EXIT_INVALID

    if args.command == "run":
        report = await mediator.send(RunExperimentCommand(config, config_source=str(Path(args.config))))
    else:
        report = await mediator.send(EvaluateCheckpointQuery(args.checkpoint, config))
    print(json.dumps(report.model_dump(mode="json"), indent=2))
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    load_env()
    setup_colored_logging(logging.DEBUG if args.verbose else get_log_level())
    initialize_sentry()

    try:
        return asyncio.run(dispatch(args))
    except (ConfigParseError, ConfigValidationError) as e:
        logger.error("%s", e)
        return EXIT_INVALID
    except KeyboardInterrupt:
        logger.warning("Interrupted")
        return EXIT_FAILED
    except Exception as e:
        logger.error("%s failed: %s: %s", args.command, type(e).__name__, e, exc_info=args.verbose)
        return EXIT_FAILED


if __name__ == "__main__":
    sys.exit(main())
