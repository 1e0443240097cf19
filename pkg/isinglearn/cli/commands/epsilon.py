"""epsilon: relative energy difference between two coupling sets"""
import argparse

from isinglearn import io
from isinglearn.cli.commands.common import require, stream
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.metrics import epsilon

EPSILON_STREAM = 2


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("epsilon", help="compare two models by energy",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--model-a", dest="first", help="first model JSON")
    parser.add_argument("--model-b", dest="second", help="second model JSON")
    parser.add_argument("--configs", type=int, help="spin configurations per repeat (1000)")
    parser.add_argument("--repeats", type=int, help="configuration samples (5)")
    parser.add_argument("--out", help="report JSON")


def run(config: RunConfig) -> int:
    section = config.epsilon
    first = io.read_model(require(section.first, "--model-a"))
    second = io.read_model(require(section.second, "--model-b"))
    report = epsilon(first, second, section.configs, stream(config.seed, EPSILON_STREAM),
                     section.repeats)
    if section.out is not None:
        io.write_json(report, section.out)
    print(f"epsilon={report.epsilon:.6e} std={report.std:.2e} degenerate={report.degenerate}")
    return 3 if report.degenerate else 0
