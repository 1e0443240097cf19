"""report: figure-data tables from the artifacts of one experiment.

Tables written to the output directory (units in the column names):

* rss_vs_samples.csv: samples, train_rss, fit_a, fit_b, fit_r2
* learning_curve.csv: scheme, step, train_rss, test_rss
* epsilon_vs_samples.csv: samples, epsilon, epsilon_std, alpha, alpha_se
* omega_ratio.csv: tone, ion, calibrated_rad_per_ms, fitted_rad_per_ms, ratio
* kbody_validation.csv: set, k, indices, time_ms, predicted, estimated, se, z
"""
import argparse
import logging
from pathlib import Path

import numpy as np
import pandas as pd

from isinglearn import io
from isinglearn.cli.commands.common import int_list, require, stream
from isinglearn.cli.commands.fit import learning_table
from isinglearn.cli.commands.validate import kbody_table
from isinglearn.cli.models.run_config import RunConfig
from isinglearn.core.estimation import split
from isinglearn.core.metrics import precision_scaling, rss_scaling_fit
from isinglearn.core.protocols import (
    disjoint_precision,
    kbody_from_shots,
    observables_from_shots,
    omega_ratio,
    rss_vs_samples,
    scheme_comparison,
)
from isinglearn.errors import InputValidationError, MissingArtifactError
from isinglearn.models.crystal import DriveFile, ModeSet
from isinglearn.models.hamiltonian import DecoherenceModel
from isinglearn.models.results import FitOptions, Scheme

logger = logging.getLogger(__name__)

DATASET = "dataset.jsonl"
INIT = "init_model.json"
DECOHERENCE = "decoherence.json"
MODES = "modes.json"
DRIVE = "drive.json"
REQUIRED = (DATASET, INIT, DECOHERENCE, MODES, DRIVE)

SPLIT_STREAM, PRECISION_STREAM, SETS_STREAM = 11, 12, 13
SET_SIZES = (3, 4, 5)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("report", help="write the figure-data CSV tables",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--fit-dir", dest="fit_dir",
                        help=f"directory holding {', '.join(REQUIRED)}")
    parser.add_argument("--out-dir", dest="out_dir", help="directory for the CSV tables")
    parser.add_argument("--samples", type=int_list, help="RSS sweep sizes, comma separated")
    parser.add_argument("--precision-samples", dest="precision_samples", type=int_list,
                        help="epsilon sweep sizes, comma separated")
    parser.add_argument("--repeats", type=int, help="disjoint-set repeats (5)")
    parser.add_argument("--configs", type=int, help="spin configurations per epsilon (1000)")
    parser.add_argument("--train-fraction", dest="train_fraction", type=float,
                        help="train fraction of the split (0.5)")
    parser.add_argument("--set", dest="sets", type=int_list, action="append",
                        help="k-body index set, repeatable")


def _random_sets(n: int, rng: np.random.Generator) -> list[list[int]]:
    return [sorted(rng.choice(n, size=min(k, n), replace=False).tolist()) for k in SET_SIZES]


def _rss_table(points: list, sweep: list[tuple[float, float]]) -> pd.DataFrame:
    frame = pd.DataFrame({"samples": [p.samples for p in points],
                          "train_rss": [p.train_rss for p in points]})
    try:
        fit = rss_scaling_fit(sweep)
    except InputValidationError:
        logger.warning("fewer than 3 sample sizes: RSS law not fitted")
        return frame
    return frame.assign(fit_a=fit.a, fit_b=fit.b, fit_r2=fit.r2)


def _epsilon_table(points: list) -> pd.DataFrame:
    frame = pd.DataFrame({"samples": [p.samples for p in points],
                          "epsilon": [p.epsilon for p in points],
                          "epsilon_std": [p.epsilon_std for p in points]})
    try:
        fit = precision_scaling([(p.samples, p.epsilon) for p in points])
    except InputValidationError:
        logger.warning("epsilon exponent not fitted")
        return frame
    return frame.assign(alpha=fit.alpha, alpha_se=fit.alpha_se)


def _omega_table(fitted: np.ndarray, calibrated: np.ndarray, ratio: np.ndarray
                 ) -> pd.DataFrame:
    tones, ions = np.indices(ratio.shape)
    return pd.DataFrame({
        "tone": tones.ravel(),
        "ion": ions.ravel(),
        "calibrated_rad_per_ms": calibrated.ravel(),
        "fitted_rad_per_ms": fitted.ravel(),
        "ratio": ratio.ravel(),
    })


def run(config: RunConfig) -> int:
    section = config.report
    fit_dir = Path(require(section.fit_dir, "--fit-dir"))
    out_dir = Path(require(section.out_dir, "--out-dir"))
    missing = [str(fit_dir / name) for name in REQUIRED if not (fit_dir / name).is_file()]
    if missing:
        raise MissingArtifactError(missing, "generate, estimate and fit before reporting")

    dataset = io.read_dataset(fit_dir / DATASET)
    init = io.read_model(fit_dir / INIT)
    dec = io.read_json(DecoherenceModel, fit_dir / DECOHERENCE)
    modes = io.read_json(ModeSet, fit_dir / MODES)
    drive = io.read_json(DriveFile, fit_dir / DRIVE)
    options = FitOptions(tol=section.tol, max_iters=section.max_iters)

    points = rss_vs_samples(dataset, dec, init, section.samples, options)
    io.write_table(_rss_table(points, [(p.samples, p.train_rss) for p in points]),
                   out_dir / "rss_vs_samples.csv")

    train_data, test_data = split(dataset, section.train_fraction,
                                  stream(config.seed, SPLIT_STREAM))
    results = scheme_comparison(observables_from_shots(train_data),
                                observables_from_shots(test_data), dec, modes, drive.tones,
                                drive.laser, options)
    io.write_table(pd.concat([learning_table(r) for r in results.values()], ignore_index=True),
                   out_dir / "learning_curve.csv")

    omega = results[Scheme.omega]
    io.write_table(_omega_table(np.abs(omega.amplitudes),
                                drive.laser.per_tone(len(drive.tones)),
                                omega_ratio(omega, drive.laser)),
                   out_dir / "omega_ratio.csv")

    precision = disjoint_precision(dataset, dec, init, section.precision_samples,
                                   section.repeats, section.configs, options,
                                   stream(config.seed, PRECISION_STREAM))
    io.write_table(_epsilon_table(precision), out_dir / "epsilon_vs_samples.csv")

    sets = section.sets or _random_sets(dataset.n, stream(config.seed, SETS_STREAM))
    validation = kbody_from_shots(results[Scheme.full].model, dec, test_data, sets,
                                  section.threshold)
    io.write_table(kbody_table(validation), out_dir / "kbody_validation.csv")

    for scheme, result in results.items():
        print(f"{scheme.value}: train_rss={result.train_rss:.6e} "
              f"test_rss={result.test_rss:.6e}")
    print(f"wrote 5 tables to {out_dir}")
    return 0
