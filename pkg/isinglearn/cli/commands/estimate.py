"""estimate: turn a dataset into magnetization and correlation estimates"""
import argparse

from isinglearn import io
from isinglearn.cli.commands.common import require, stream
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.estimation import split
from isinglearn.core.protocols import observables_from_shots

SPLIT_STREAM = 1


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("estimate", help="estimate observables from shots",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--dataset", help="dataset JSON-lines file")
    parser.add_argument("--out", help="observables JSON file (train part when splitting)")
    parser.add_argument("--no-filter", dest="filter", action="store_false",
                        help="keep trials flagged by the configuration filter")
    parser.add_argument("--no-leakage", dest="leakage", action="store_false",
                        help="skip the leakage division")
    parser.add_argument("--split", type=float, help="train fraction of a stratified split")
    parser.add_argument("--test-out", dest="test_out", help="test observables JSON file")


def run(config: RunConfig) -> int:
    section = config.estimate
    dataset = io.read_dataset(require(section.dataset, "--dataset"))
    out = require(section.out, "--out")
    if section.split is None:
        observed = observables_from_shots(dataset, section.filter, section.leakage)
        io.write_observables(observed, out)
        print(f"wrote {out}: T={observed.times.size} n={observed.n} "
              f"M={observed.counts.min()}..{observed.counts.max()}")
        return 0

    test_out = require(section.test_out, "--test-out")
    train, test = split(dataset, section.split, stream(config.seed, SPLIT_STREAM))
    for part, path in ((train, out), (test, test_out)):
        observed = observables_from_shots(part, section.filter, section.leakage)
        io.write_observables(observed, path)
        print(f"wrote {path}: T={observed.times.size} n={observed.n} "
              f"M={observed.counts.min()}..{observed.counts.max()}")
    return 0
