"""generate: simulate a quench experiment into a dataset file"""
import argparse
import logging

import numpy as np

from isinglearn import io
from isinglearn.cli.commands.common import read_decoherence, require
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.quench import generate_dataset
from isinglearn.models.records import ErrorChannels, QuenchSchedule

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("generate", help="simulate single-shot records",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--model", help="model JSON file")
    parser.add_argument("--out", help="dataset JSON-lines file to write")
    parser.add_argument("--times", type=float, nargs="+", help="explicit times in ms")
    parser.add_argument("--t-max", dest="t_max", type=float, help="last time in ms (9)")
    parser.add_argument("--steps", type=int, help="time points of a uniform schedule (13)")
    parser.add_argument("--shots", type=int, help="trials per time point (1000)")
    parser.add_argument("--no-echo", dest="echo", action="store_false", help="skip the echo")
    parser.add_argument("--no-groups", dest="groups", action="store_false",
                        help="no pi-before-measure trials")
    parser.add_argument("--spam", type=float, help="bit-flip probability")
    parser.add_argument("--leakage", type=float, help="leakage rate per ion in 1/ms")
    parser.add_argument("--decoherence", help="decoherence JSON file")


def run(config: RunConfig) -> int:
    """Write the dataset and print a summary"""
    section = config.generate
    model = io.read_model(require(section.model, "--model"))
    out = require(section.out, "--out")
    if section.times is not None:
        schedule = QuenchSchedule(times=section.times, shots_per_time=section.shots,
                                  echo=section.echo)
    else:
        schedule = QuenchSchedule.uniform(section.t_max, section.steps, section.shots,
                                          echo=section.echo)
    channels = ErrorChannels(spam_flip=section.spam, leakage_rate=section.leakage,
                             decoherence=read_decoherence(section.decoherence))
    dataset = generate_dataset(model, channels, schedule, seed=config.seed,
                               threads=config.threads, groups=section.groups)
    io.write_dataset(dataset, out)
    bright = float(np.mean(dataset.bits))
    print(f"wrote {out}: n={dataset.n} T={schedule.times.size} M={schedule.shots_per_time} "
          f"records={len(dataset)} bright_fraction={bright:.4f}")
    return 0
