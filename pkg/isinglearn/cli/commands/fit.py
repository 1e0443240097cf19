"""fit: run one fitting scheme on estimated observables"""
import argparse
import logging

import pandas as pd

from isinglearn import io
from isinglearn.cli.commands.common import DECOHERENCE_HINT, read_decoherence, require
from isinglearn.cli.models.run_config import FitConfig, RunConfig
from isinglearn.core import fitting
from isinglearn.core.phonon import coupling_matrix
from isinglearn.errors import MissingArtifactError
from isinglearn.models.crystal import DriveFile, ModeSet
from isinglearn.models.hamiltonian import DecoherenceModel
from isinglearn.models.results import FitOptions, FitResult, Scheme

logger = logging.getLogger(__name__)


def add_parser(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("fit", help="fit couplings, amplitudes, rates or fields",
                                   argument_default=argparse.SUPPRESS)
    parser.add_argument("--scheme", choices=[s.value for s in Scheme],
                        help="on2 couplings, on amplitudes, o1 theory, decoherence, fields")
    parser.add_argument("--observables", help="training observables JSON")
    parser.add_argument("--test", help="held-out observables JSON")
    parser.add_argument("--decoherence", help="fixed decoherence JSON")
    parser.add_argument("--no-decoherence", dest="no_decoherence", action="store_true",
                        help="fit without dephasing envelopes")
    parser.add_argument("--init", help="starting model (on2) or fixed couplings (fields)")
    parser.add_argument("--modes", help="mode JSON (on, o1)")
    parser.add_argument("--drive", help="drive JSON with tones and laser profile (on, o1)")
    parser.add_argument("--out", help="fit result JSON")
    parser.add_argument("--params-out", dest="params_out",
                        help="fitted model JSON, or decoherence JSON for that scheme")
    parser.add_argument("--curve", help="learning-curve CSV")
    parser.add_argument("--tol", type=float, help="relative RSS tolerance (1e-8)")
    parser.add_argument("--max-iters", dest="max_iters", type=int, help="iteration cap (500)")
    parser.add_argument("--weighted", action="store_true", help="divide residuals by the errors")


def _fixed_decoherence(section: FitConfig) -> DecoherenceModel | None:
    if section.no_decoherence:
        return None
    if section.decoherence is None:
        raise MissingArtifactError(["decoherence file (--decoherence)"], DECOHERENCE_HINT)
    return read_decoherence(section.decoherence)


def _drive(section: FitConfig) -> tuple[ModeSet, DriveFile]:
    modes = io.read_json(ModeSet, require(section.modes, "--modes"))
    drive = io.read_json(DriveFile, require(section.drive, "--drive"))
    return modes, drive


def learning_table(result: FitResult) -> pd.DataFrame:
    """One row per accepted step"""
    return pd.DataFrame({
        "scheme": result.scheme.value,
        "step": range(len(result.learning_curve)),
        "train_rss": [p.train_rss for p in result.learning_curve],
        "test_rss": [p.test_rss for p in result.learning_curve],
    })


def run_scheme(section: FitConfig) -> FitResult:
    """Dispatch on the scheme; every input is read from the configured files"""
    observed = io.read_observables(require(section.observables, "--observables"))
    test = io.read_observables(section.test) if section.test is not None else None
    options = FitOptions(tol=section.tol, max_iters=section.max_iters, weighted=section.weighted)
    match section.scheme:
        case Scheme.decoherence:
            return fitting.fit_decoherence(observed, options)
        case Scheme.full:
            init = io.read_model(require(section.init, "--init"))
            return fitting.fit_full(observed, _fixed_decoherence(section), init, options, test)
        case Scheme.omega:
            modes, drive = _drive(section)
            return fitting.fit_omega(observed, _fixed_decoherence(section), modes, drive.tones,
                                     drive.laser.per_tone(len(drive.tones)), options, test,
                                     phases=drive.laser.phases)
        case Scheme.theory:
            modes, drive = _drive(section)
            return fitting.evaluate_model(observed, _fixed_decoherence(section),
                                          coupling_matrix(modes, drive.tones, drive.laser), test)
        case Scheme.fields:
            model = io.read_model(require(section.init, "--init"))
            return fitting.fit_fields(observed, model, _fixed_decoherence(section), options, test)


def run(config: RunConfig) -> int:
    """Write the result; exit code 3 when the fit did not converge"""
    section = config.fit
    result = run_scheme(section)
    if section.out is not None:
        io.write_json(result, section.out)
    if section.curve is not None:
        io.write_table(learning_table(result), section.curve)
    if section.params_out is not None:
        if result.decoherence is not None:
            io.write_json(result.decoherence, section.params_out)
        elif result.model is not None:
            io.write_model(result.model, section.params_out)
    test = "n/a" if result.test_rss is None else f"{result.test_rss:.6e}"
    print(f"{result.scheme.value}: train_rss={result.train_rss:.6e} test_rss={test} "
          f"iterations={result.iterations} converged={result.converged} ({result.message})")
    return 0 if result.converged else 3
