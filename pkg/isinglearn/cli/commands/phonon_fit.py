"""phonon-fit: staged trap-potential fit and the modes of the fitted crystal"""
import argparse

from isinglearn import io
from isinglearn.cli.commands.common import require
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.phonon import equilibrium, fit_potential_staged, transverse_modes
from isinglearn.models.crystal import PotentialMeasurement, TrapPotential


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("phonon-fit", help="fit the trap potential in five stages",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--measurement", help="potential measurement JSON")
    parser.add_argument("--initial", help="initial potential JSON")
    parser.add_argument("--passes", type=int, help="repeats of the stage sequence (1)")
    parser.add_argument("--out", help="fitted potential JSON")
    parser.add_argument("--modes-out", dest="modes_out", help="transverse modes JSON")


def run(config: RunConfig) -> int:
    section = config.phonon_fit
    measurement = io.read_json(PotentialMeasurement,
                               require(section.measurement, "--measurement"))
    initial = io.read_json(TrapPotential, require(section.initial, "--initial"))
    staged = fit_potential_staged(measurement, initial, passes=section.passes)
    if section.out is not None:
        io.write_json(staged, section.out)
    if section.modes_out is not None:
        positions = equilibrium(staged.potential, measurement.n, measurement.positions)
        io.write_json(transverse_modes(staged.potential, positions), section.modes_out)
    for stage in staged.stages:
        state = "skipped" if stage.skipped else f"rss={stage.rss:.4e} iters={stage.iterations}"
        print(f"{stage.name}: {state}")
    if staged.y_cubics_flagged:
        print("xy2 and zy2 left at 0: no mode patterns supplied")
    return 0 if all(stage.converged for stage in staged.stages) else 3
