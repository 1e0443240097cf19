"""Experiment protocols: sample-size sweeps, disjoint-set precision and scheme comparison"""
import logging

import numpy as np

from isinglearn.core.estimation import (
    config_filter,
    estimate_leakage,
    estimate_observables,
)
from isinglearn.core.fitting import evaluate_model, fit_full, fit_omega
from isinglearn.core.metrics import epsilon, validate_kbody
from isinglearn.core.phonon import coupling_matrix
from isinglearn.errors import InputValidationError
from isinglearn.models.crystal import LaserProfile, ModeSet, ToneSpec
from isinglearn.models.estimates import FilterReport, LeakageEstimate, ObservableSet
from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel
from isinglearn.models.records import Dataset
from isinglearn.models.reports import KBodyValidation, SweepPoint
from isinglearn.models.results import FitOptions, FitResult, Scheme

logger = logging.getLogger(__name__)


def _corrections(dataset: Dataset, filter_configs: bool, correct_leakage: bool
                 ) -> tuple[FilterReport | None, LeakageEstimate | None]:
    report = config_filter(dataset) if filter_configs else None
    leakage = None
    if correct_leakage and dataset.groups:
        leakage = estimate_leakage(dataset, report)
    return report, leakage


def observables_from_shots(dataset: Dataset, filter_configs: bool = True,
                           correct_leakage: bool = True) -> ObservableSet:
    """Filter, estimate leakage when both groups exist, then estimate observables"""
    return estimate_observables(dataset, *_corrections(dataset, filter_configs, correct_leakage))


def kbody_from_shots(model: IsingModel, dec: DecoherenceModel | None, dataset: Dataset,
                     index_sets: list[list[int]], threshold: float = 4.0, fraction: float = 0.9,
                     filter_configs: bool = True, correct_leakage: bool = True
                     ) -> list[KBodyValidation]:
    """k-body validation on shots filtered and corrected like observables_from_shots"""
    report, leakage = _corrections(dataset, filter_configs, correct_leakage)
    return validate_kbody(model, dec, dataset, index_sets, threshold, fraction, report, leakage)


def _take(dataset: Dataset, shots: int, start: int = 0) -> Dataset:
    try:
        return dataset.take_per_time(shots, start)
    except ValueError as error:
        raise InputValidationError(str(error)) from error


def rss_vs_samples(dataset: Dataset, dec: DecoherenceModel | None, init: IsingModel,
                   sample_sizes: list[int], options: FitOptions | None = None,
                   test: ObservableSet | None = None, filter_configs: bool = True
                   ) -> list[SweepPoint]:
    """Minimized training RSS when fitting the first M trials of every time point"""
    points = []
    for shots in sorted(sample_sizes):
        observed = observables_from_shots(_take(dataset, shots), filter_configs)
        result = fit_full(observed, dec, init, options, test)
        points.append(SweepPoint(samples=shots, train_rss=result.train_rss,
                                 test_rss=result.test_rss))
        logger.info("M=%d: train rss %.4e", shots, result.train_rss)
    return points


def disjoint_precision(dataset: Dataset, dec: DecoherenceModel | None, init: IsingModel,
                       sample_sizes: list[int], repeats: int = 5, n_configs: int = 1000,
                       options: FitOptions | None = None,
                       rng: np.random.Generator | None = None, filter_configs: bool = True
                       ) -> list[SweepPoint]:
    """epsilon between fits of two disjoint M-trial sets sharing one starting model.

    Repeat r uses trials [2rM, (2r+1)M) and [(2r+1)M, (2r+2)M) of each time
    point, so the dataset needs 2 * repeats * M trials per time.
    """
    rng = rng if rng is not None else np.random.default_rng()
    points = []
    for shots in sorted(sample_sizes):
        values, train = [], []
        for r in range(repeats):
            fits = [
                fit_full(observables_from_shots(_take(dataset, shots, start), filter_configs),
                         dec, init, options)
                for start in (2 * r * shots, (2 * r + 1) * shots)
            ]
            report = epsilon(fits[0].model, fits[1].model, n_configs, rng, repeats=1)
            values.append(report.epsilon)
            train.append(fits[0].train_rss)
        points.append(SweepPoint(samples=shots, train_rss=float(np.mean(train)),
                                 epsilon=float(np.mean(values)),
                                 epsilon_std=float(np.std(values))))
        logger.info("M=%d: epsilon %.4e +/- %.1e", shots, points[-1].epsilon,
                    points[-1].epsilon_std)
    return points


def scheme_comparison(train: ObservableSet, test: ObservableSet, dec: DecoherenceModel | None,
                      modes: ModeSet, tones: list[ToneSpec], laser: LaserProfile,
                      options: FitOptions | None = None) -> dict[Scheme, FitResult]:
    """Theory couplings, fitted amplitudes and fitted couplings on one train/test split"""
    theory = coupling_matrix(modes, tones, laser)
    results = {
        Scheme.theory: evaluate_model(train, dec, theory, test),
        Scheme.omega: fit_omega(train, dec, modes, tones, laser.per_tone(len(tones)), options,
                                test, phases=laser.phases),
        Scheme.full: fit_full(train, dec, theory, options, test),
    }
    for scheme, result in results.items():
        logger.info("%s: train rss %.4e, test rss %.4e", scheme.value, result.train_rss,
                    result.test_rss)
    return results


def omega_ratio(result: FitResult, laser: LaserProfile) -> np.ndarray:
    """|fitted Omega| / calibrated Omega per tone and ion; NaN where nothing was calibrated"""
    if result.amplitudes is None:
        raise InputValidationError(f"A {result.scheme.value} result carries no amplitudes")
    calibrated = laser.per_tone(result.amplitudes.shape[0])
    ratio = np.full(calibrated.shape, np.nan)
    np.divide(np.abs(result.amplitudes), calibrated, out=ratio, where=calibrated > 0.0)
    return ratio
