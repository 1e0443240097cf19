"""Learning-quality metrics: energy precision, sample-size laws and k-body validation.

The relative energy difference compares couplings only and is not gauge
invariant, so fits being compared must share their gauge (common start).
"""
import logging

import numpy as np
from scipy import stats

from isinglearn.core.estimation import estimate_kbody
from isinglearn.core.hamiltonian import energies
from isinglearn.core.observables import kbody_correlation
from isinglearn.errors import DimensionMismatchError, InputValidationError
from isinglearn.models.estimates import FilterReport, LeakageEstimate
from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags
from isinglearn.models.records import Dataset
from isinglearn.models.reports import ExponentFit, KBodyValidation, PrecisionReport, ScalingFit

logger = logging.getLogger(__name__)

MAX_VALIDATED_BODY = 8


def random_configurations(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform +/-1 spin configurations, one per row"""
    return 1.0 - 2.0 * rng.integers(0, 2, size=(count, n))


def relative_energy_difference(j1: IsingModel, j2: IsingModel, spins: np.ndarray
                               ) -> float | None:
    """<|E1 - E2|> / sqrt(dE1 dE2) on one configuration sample; None when a spread is 0"""
    e1 = energies(j1.couplings, spins)
    e2 = energies(j2.couplings, spins)
    spread = float(np.std(e1) * np.std(e2))
    if spread <= 0.0:
        return None
    return float(np.mean(np.abs(e1 - e2)) / np.sqrt(spread))


def epsilon(j1: IsingModel, j2: IsingModel, n_configs: int = 1000,
            rng: np.random.Generator | None = None, repeats: int = 5) -> PrecisionReport:
    """Relative energy difference averaged over ``repeats`` configuration samples.

    Fields are ignored. Numerator and both spreads use the same sample, so
    the result is symmetric in (j1, j2) for a given stream.
    """
    if j1.n != j2.n:
        raise DimensionMismatchError(f"Models have {j1.n} and {j2.n} ions")
    if n_configs < 2 or repeats < 1:
        raise InputValidationError("Need at least 2 configurations and 1 repeat")
    rng = rng if rng is not None else np.random.default_rng()
    values = []
    for _ in range(repeats):
        value = relative_energy_difference(j1, j2, random_configurations(j1.n, n_configs, rng))
        if value is None:
            logger.warning("energy spread vanished; epsilon is undefined")
            return PrecisionReport(epsilon=np.nan, std=0.0, n_configs=n_configs,
                                   repeats=repeats, degenerate=True)
        values.append(value)
    return PrecisionReport(epsilon=float(np.mean(values)), std=float(np.std(values)),
                           n_configs=n_configs, repeats=repeats)


def _points(points: list[tuple[float, float]]) -> tuple[np.ndarray, np.ndarray]:
    array = np.asarray(points, dtype=float)
    if array.ndim != 2 or array.shape[1] != 2:
        raise InputValidationError("Points must be (M, value) pairs")
    samples, values = array[:, 0], array[:, 1]
    if np.unique(samples).size < 3:
        raise InputValidationError("Need at least 3 distinct sample sizes")
    if np.any(samples <= 0.0):
        raise InputValidationError("Sample sizes must be positive")
    return samples, values


def rss_scaling_fit(points: list[tuple[float, float]]) -> ScalingFit:
    """Fit RSS = a / M + b; b is reported as fitted, possibly negative"""
    samples, values = _points(points)
    fit = stats.linregress(1.0 / samples, values)
    return ScalingFit(
        a=float(fit.slope),
        b=float(fit.intercept),
        r2=float(fit.rvalue ** 2),
        a_se=float(fit.stderr),
        b_se=float(fit.intercept_stderr),
    )


def precision_scaling(points: list[tuple[float, float]]) -> ExponentFit:
    """Fit epsilon = c M^-alpha by a straight line in log-log axes"""
    samples, values = _points(points)
    if np.any(values <= 0.0):
        raise InputValidationError("epsilon values must be positive")
    fit = stats.linregress(np.log(samples), np.log(values))
    return ExponentFit(alpha=float(-fit.slope), alpha_se=float(fit.stderr),
                       prefactor=float(np.exp(fit.intercept)))


def validate_kbody(model: IsingModel, dec: DecoherenceModel | None, dataset: Dataset,
                   index_sets: list[list[int]], threshold: float = 4.0, fraction: float = 0.9,
                   report: FilterReport | None = None, leakage: LeakageEstimate | None = None
                   ) -> list[KBodyValidation]:
    """Compare predicted and shot-estimated k-body correlators per index set"""
    if model.n != dataset.n:
        raise DimensionMismatchError(f"Model has {model.n} ions, dataset has {dataset.n}")
    if not 0.0 < fraction <= 1.0 or threshold <= 0.0:
        raise InputValidationError("Need threshold > 0 and fraction in (0, 1]")
    flags = SequenceFlags(echo=dataset.echo, include_decoherence=dec is not None)
    results = []
    for indices in index_sets:
        if len(indices) > MAX_VALIDATED_BODY:
            raise InputValidationError(f"Validation limited to k <= {MAX_VALIDATED_BODY}")
        estimated, se = estimate_kbody(dataset, indices, report, leakage)
        predicted = np.array([kbody_correlation(model, dec, float(t), indices, flags)
                              for t in dataset.times])
        z = (estimated - predicted) / se
        within = float(np.mean(np.abs(z) < threshold))
        results.append(KBodyValidation(
            indices=list(indices),
            times=dataset.times,
            predicted=predicted,
            estimated=estimated,
            se=se,
            z=z,
            max_z=float(np.max(np.abs(z))),
            within=within,
            passed=within >= fraction,
        ))
        logger.info("k=%d set %s: max |z| %.2f, %.0f%% within %.1f sigma", len(indices),
                    indices, results[-1].max_z, 100 * within, threshold)
    return results
