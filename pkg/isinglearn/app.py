"""Command-line entry point: one sub-command per stage of the learning pipeline"""
import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from isinglearn.cli.commands import (
    couplings,
    epsilon,
    estimate,
    fit,
    generate,
    phonon_fit,
    report,
    validate,
)
from isinglearn.cli.models.run_config import Command, RunConfig
from isinglearn.errors import ArtifactError, IsingLearnError

logger = logging.getLogger(__name__)

COMMANDS = {
    Command.generate: generate,
    Command.estimate: estimate,
    Command.fit: fit,
    Command.phonon_fit: phonon_fit,
    Command.couplings: couplings,
    Command.epsilon: epsilon,
    Command.validate: validate,
    Command.report: report,
}
GLOBAL_FLAGS = {"command", "config", "seed", "threads", "verbose"}


def create_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="isinglearn",
        description="Learn long-range Ising couplings from quench measurements",
    )
    parser.add_argument("--config", help="JSON run configuration; flags override it")
    parser.add_argument("--seed", type=int, help="seed of every random stream")
    parser.add_argument("--threads", type=int, help="worker threads")
    parser.add_argument("-v", "--verbose", action="count", default=0,
                        help="-v for progress, -vv for every iteration")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for module in COMMANDS.values():
        module.add_parser(subparsers)
    return parser


def load_config(args: argparse.Namespace) -> RunConfig:
    """Merge the optional JSON configuration with the flags given on the command line"""
    data = {}
    if args.config is not None:
        try:
            data = json.loads(Path(args.config).read_text())
        except OSError as error:
            raise ArtifactError(f"cannot read {args.config}: {error}") from error
        except json.JSONDecodeError as error:
            raise ArtifactError(f"{args.config} is not valid JSON: {error}") from error
    command = Command(args.command)
    data["command"] = command.value
    for flag in ("seed", "threads"):
        if getattr(args, flag) is not None:
            data[flag] = getattr(args, flag)
    key = command.value.replace("-", "_")
    flags = {k: v for k, v in vars(args).items() if k not in GLOBAL_FLAGS}
    data[key] = {**data.get(key, {}), **flags}
    return RunConfig.model_validate(data)


def main(argv: Sequence[str] | None = None) -> int:
    """Run one sub-command and return its exit code"""
    args = create_parser().parse_args(argv)
    level = (logging.WARNING, logging.INFO, logging.DEBUG)[min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        config = load_config(args)
        return COMMANDS[config.command].run(config)
    except ValidationError as error:
        print(f"error: invalid input\n{error}", file=sys.stderr)
        return 2
    except IsingLearnError as error:
        print(f"error: {error}", file=sys.stderr)
        return error.exit_code


if __name__ == "__main__":
    sys.exit(main())
