"""validate: predicted against measured k-body correlators"""
import argparse

import pandas as pd

from isinglearn import io
from isinglearn.cli.commands.common import int_list, read_decoherence, require
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.protocols import kbody_from_shots
from isinglearn.models.reports import KBodyValidation


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("validate", help="check k-body predictions against shots",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--model", help="model JSON")
    parser.add_argument("--decoherence", help="decoherence JSON")
    parser.add_argument("--dataset", help="dataset JSON-lines file")
    parser.add_argument("--set", dest="sets", type=int_list, action="append",
                        help="comma separated ion indices, repeatable")
    parser.add_argument("--threshold", type=float, help="z-score threshold (4)")
    parser.add_argument("--fraction", type=float, help="required fraction within (0.9)")
    parser.add_argument("--out", help="validation CSV")


def kbody_table(results: list[KBodyValidation]) -> pd.DataFrame:
    """One row per index set and time"""
    frames = [
        pd.DataFrame({
            "set": number,
            "k": len(result.indices),
            "indices": " ".join(str(i) for i in result.indices),
            "time_ms": result.times,
            "predicted": result.predicted,
            "estimated": result.estimated,
            "se": result.se,
            "z": result.z,
        })
        for number, result in enumerate(results)
    ]
    return pd.concat(frames, ignore_index=True)


def run(config: RunConfig) -> int:
    """Exit code 3 when any set fails"""
    section = config.validate_
    model = io.read_model(require(section.model, "--model"))
    dataset = io.read_dataset(require(section.dataset, "--dataset"))
    sets = require(section.sets or None, "--set")
    results = kbody_from_shots(model, read_decoherence(section.decoherence), dataset, sets,
                               section.threshold, section.fraction)
    if section.out is not None:
        io.write_table(kbody_table(results), section.out)
    for result in results:
        print(f"set {result.indices}: max|z|={result.max_z:.2f} within={result.within:.2f} "
              f"{'pass' if result.passed else 'fail'}")
    return 0 if all(result.passed for result in results) else 3
