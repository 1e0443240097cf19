"""couplings: Ising couplings from the transverse modes and the laser drive"""
import argparse

import numpy as np

from isinglearn import io
from isinglearn.cli.commands.common import require
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.phonon import coupling_matrix
from isinglearn.models.crystal import DriveFile, ModeSet


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("couplings", help="synthesize J from modes and drive",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--modes", help="mode JSON")
    parser.add_argument("--drive", help="drive JSON with tones and laser profile")
    parser.add_argument("--out", help="model JSON to write")


def run(config: RunConfig) -> int:
    section = config.couplings
    modes = io.read_json(ModeSet, require(section.modes, "--modes"))
    drive = io.read_json(DriveFile, require(section.drive, "--drive"))
    model = coupling_matrix(modes, drive.tones, drive.laser)
    out = require(section.out, "--out")
    io.write_model(model, out)
    upper = model.upper
    print(f"wrote {out}: n={model.n} pairs={upper.size} "
          f"|J| max={np.max(np.abs(upper), initial=0.0):.4e} rad/ms")
    return 0
