"""From shot records to corrected observable estimates.

Bits read 1 for bright, so z = 1 - 2 * bit is the measured spin. Trials in the
pi-before-measure group see every non-leaked spin inverted while leaked ions
still read dark; combining the two groups with the parity (-1)^k of a k-body
product cancels the leakage offset to first order, and dividing by the
survival product prod(1 - eps_i) removes the remaining attenuation.
"""
import logging

import numpy as np

from isinglearn.errors import EstimationError, IndexOutOfRangeError, InputValidationError
from isinglearn.models.estimates import FilterReport, LeakageEstimate, ObservableSet
from isinglearn.models.records import Dataset, Group

logger = logging.getLogger(__name__)

WINDOW = 100
DARK_LIMIT = 5
BRIGHT_RUN = 5
DARK_STREAK = 3


def _run_bounds(mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start and exclusive stop of every run of True values"""
    edges = np.diff(np.concatenate(([0], mask.astype(np.int8), [0])))
    return np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)


def _long_runs(mask: np.ndarray, length: int) -> np.ndarray:
    """Mark the entries belonging to runs of at least ``length`` True values"""
    marked = np.zeros(mask.shape[0], dtype=bool)
    for start, stop in zip(*_run_bounds(mask), strict=True):
        if stop - start >= length:
            marked[start:stop] = True
    return marked


def config_filter(dataset: Dataset) -> FilterReport:
    """Detect crystal configuration changes from the cooling-stage brightness checks.

    Per time point, trials are cut into consecutive windows of 100. If an ion
    is dark more than 5 times in a window, only runs of at least 5 trials in
    which every such ion is bright are kept. Otherwise trials inside a run of
    3 or more consecutive dark checks of any ion are discarded.
    """
    discarded: list[np.ndarray] = []
    window_discards = streak_discards = flagged = 0
    for ti in range(dataset.times.size):
        trials = dataset.indices_at(ti)
        dark = dataset.cooling[trials] == 0
        streak = np.zeros(trials.size, dtype=bool)
        for ion in np.flatnonzero(dark.any(axis=0)):
            streak |= _long_runs(dark[:, ion], DARK_STREAK)

        drop = np.zeros(trials.size, dtype=bool)
        for start in range(0, trials.size, WINDOW):
            window = slice(start, min(trials.size, start + WINDOW))
            problem = dark[window].sum(axis=0) > DARK_LIMIT
            if problem.any():
                flagged += 1
                clear = ~dark[window][:, problem].any(axis=1)
                drop[window] = ~_long_runs(clear, BRIGHT_RUN)
                window_discards += int(drop[window].sum())
            else:
                drop[window] = streak[window]
                streak_discards += int(streak[window].sum())
        discarded.append(trials[drop])

    dropped = np.sort(np.concatenate(discarded)) if discarded else np.empty(0, np.int64)
    kept = np.setdiff1d(np.arange(len(dataset)), dropped)
    report = FilterReport(
        total=len(dataset),
        kept_trials=kept.tolist(),
        discarded_trials=dropped.tolist(),
        window_discards=window_discards,
        streak_discards=streak_discards,
        flagged_windows=flagged,
    )
    logger.info("config filter discarded %d of %d trials (%.1f%%), %d flagged windows",
                len(report.discarded_trials), report.total, 100 * report.discard_fraction,
                flagged)
    return report


def apply_filter(dataset: Dataset, report: FilterReport) -> Dataset:
    """Dataset restricted to the kept trials"""
    if report.total != len(dataset):
        raise InputValidationError(
            f"Filter report covers {report.total} trials, dataset has {len(dataset)}"
        )
    return dataset.subset(report.kept_trials)


def _kept(dataset: Dataset, report: FilterReport | None) -> np.ndarray:
    mask = np.ones(len(dataset), dtype=bool)
    if report is not None:
        if report.total != len(dataset):
            raise InputValidationError(
                f"Filter report covers {report.total} trials, dataset has {len(dataset)}"
            )
        mask[report.discarded_trials] = False
    return mask


def _spins(bits: np.ndarray) -> np.ndarray:
    return 1.0 - 2.0 * bits.astype(float)


def _variance_of_mean(mean: np.ndarray, count: int) -> np.ndarray:
    """Binomial variance of a mean of +/-1 outcomes, floored at 1/count so se > 0"""
    return np.maximum(1.0 - mean ** 2, 1.0 / count) / count


def _groups_at(dataset: Dataset, rows: np.ndarray, ti: int) -> tuple[np.ndarray, np.ndarray]:
    plain = rows[dataset.group[rows] == Group.plain]
    flipped = rows[dataset.group[rows] == Group.pi_before_measure]
    if plain.size == 0 or flipped.size == 0:
        raise EstimationError(f"Time index {ti} lacks trials of one of the two groups")
    return plain, flipped


def _rows_at(dataset: Dataset, kept: np.ndarray, ti: int) -> np.ndarray:
    rows = np.flatnonzero(kept & (dataset.time_index == ti))
    if rows.size == 0:
        raise EstimationError(f"No kept trials at time index {ti} (t = {dataset.times[ti]})")
    return rows


def estimate_leakage(dataset: Dataset, report: FilterReport | None = None) -> LeakageEstimate:
    """Per-ion leakage from the average of the two group means, plus a rate fit through 0"""
    if not dataset.groups:
        raise EstimationError("Leakage estimation needs the plain and pi-before-measure groups")
    kept = _kept(dataset, report)
    steps, n = dataset.times.size, dataset.n
    epsilon, epsilon_se = np.empty((steps, n)), np.empty((steps, n))
    for ti in range(steps):
        plain, flipped = _groups_at(dataset, _rows_at(dataset, kept, ti), ti)
        mean_plain = _spins(dataset.bits[plain]).mean(axis=0)
        mean_flipped = _spins(dataset.bits[flipped]).mean(axis=0)
        epsilon[ti] = 0.5 * (mean_plain + mean_flipped)
        epsilon_se[ti] = 0.5 * np.sqrt(_variance_of_mean(mean_plain, plain.size)
                                       + _variance_of_mean(mean_flipped, flipped.size))

    times = dataset.times
    weight = float(times @ times)
    if weight > 0.0:
        rate = times @ epsilon / weight
        rate_se = np.sqrt((times ** 2) @ epsilon_se ** 2) / weight
    else:
        rate, rate_se = np.zeros(n), np.zeros(n)
    clamped = rate < 0.0
    if clamped.any():
        logger.warning("negative leakage rate clamped to 0 for ions %s",
                       np.flatnonzero(clamped).tolist())
        rate = np.where(clamped, 0.0, rate)
    return LeakageEstimate(
        times=times,
        epsilon=epsilon,
        epsilon_se=epsilon_se,
        rate=rate,
        rate_se=rate_se,
        clamped=clamped.tolist(),
    )


def _combine(plain: np.ndarray, flipped: np.ndarray, parity: float
             ) -> tuple[np.ndarray, np.ndarray]:
    """(E_plain + parity * E_pi) / 2 of per-group means, with its standard error"""
    mean_plain, mean_flipped = plain.mean(axis=0), flipped.mean(axis=0)
    value = 0.5 * (mean_plain + parity * mean_flipped)
    se = 0.5 * np.sqrt(_variance_of_mean(mean_plain, plain.shape[0])
                       + _variance_of_mean(mean_flipped, flipped.shape[0]))
    return value, se


def _single(products: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = products.mean(axis=0)
    return mean, np.sqrt(_variance_of_mean(mean, products.shape[0]))


def _pair_means(z: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    return (z.T @ z / z.shape[0])[rows, cols]


def estimate_observables(dataset: Dataset, report: FilterReport | None = None,
                         leakage: LeakageEstimate | None = None) -> ObservableSet:
    """Magnetizations and pair correlations per time from the kept trials.

    Estimates are not clipped to [-1, 1]. Without ``leakage`` the group
    combination is still applied but the survival division is skipped.
    """
    if leakage is not None and leakage.n != dataset.n:
        raise InputValidationError(
            f"Leakage estimate covers {leakage.n} ions, dataset has {dataset.n}"
        )
    kept = _kept(dataset, report)
    steps, n = dataset.times.size, dataset.n
    rows, cols = np.triu_indices(n, 1)
    mag, mag_se = np.empty((steps, n)), np.empty((steps, n))
    corr, corr_se = np.empty((steps, rows.size)), np.empty((steps, rows.size))
    counts = np.empty(steps, dtype=np.int64)
    for ti in range(steps):
        at_time = _rows_at(dataset, kept, ti)
        counts[ti] = at_time.size
        if dataset.groups:
            plain, flipped = _groups_at(dataset, at_time, ti)
            z_plain, z_flipped = _spins(dataset.bits[plain]), _spins(dataset.bits[flipped])
            mag[ti], mag_se[ti] = _combine(z_plain, z_flipped, -1.0)
            pair_plain = _pair_means(z_plain, rows, cols)
            pair_flipped = _pair_means(z_flipped, rows, cols)
            corr[ti] = 0.5 * (pair_plain + pair_flipped)
            corr_se[ti] = 0.5 * np.sqrt(_variance_of_mean(pair_plain, plain.size)
                                        + _variance_of_mean(pair_flipped, flipped.size))
        else:
            z = _spins(dataset.bits[at_time])
            mag[ti], mag_se[ti] = _single(z)
            corr[ti] = _pair_means(z, rows, cols)
            corr_se[ti] = np.sqrt(_variance_of_mean(corr[ti], at_time.size))
        if leakage is not None:
            survival = 1.0 - leakage.at(float(dataset.times[ti]))
            mag[ti] /= survival
            mag_se[ti] /= survival
            pair_survival = survival[rows] * survival[cols]
            corr[ti] /= pair_survival
            corr_se[ti] /= pair_survival

    observed = ObservableSet(
        times=dataset.times,
        mag=mag,
        mag_se=mag_se,
        corr=corr,
        corr_se=corr_se,
        counts=counts,
        echo=dataset.echo,
    )
    outliers = observed.out_of_band()
    if outliers:
        logger.warning("%d estimates lie outside |v| <= 1 + 3 se", outliers)
    return observed


def estimate_kbody(dataset: Dataset, indices: list[int], report: FilterReport | None = None,
                   leakage: LeakageEstimate | None = None) -> tuple[np.ndarray, np.ndarray]:
    """Per-time estimate and standard error of <sigma_x^{i_1} ... sigma_x^{i_k}>"""
    selected = np.asarray(indices, dtype=np.int64)
    if selected.size == 0 or np.unique(selected).size != selected.size:
        raise InputValidationError(f"Need distinct ion indices, got {indices}")
    if selected.min() < 0 or selected.max() >= dataset.n:
        raise IndexOutOfRangeError(f"Ion indices {indices} outside [0, {dataset.n})")
    kept = _kept(dataset, report)
    parity = -1.0 if selected.size % 2 else 1.0
    values, errors = np.empty(dataset.times.size), np.empty(dataset.times.size)
    for ti in range(dataset.times.size):
        at_time = _rows_at(dataset, kept, ti)
        if dataset.groups:
            plain, flipped = _groups_at(dataset, at_time, ti)
            products_plain = np.prod(_spins(dataset.bits[np.ix_(plain, selected)]), axis=1)
            products_flipped = np.prod(_spins(dataset.bits[np.ix_(flipped, selected)]), axis=1)
            value, se = _combine(products_plain, products_flipped, parity)
        else:
            value, se = _single(np.prod(_spins(dataset.bits[np.ix_(at_time, selected)]), axis=1))
        if leakage is not None:
            survival = float(np.prod(1.0 - leakage.at(float(dataset.times[ti]))[selected]))
            value, se = value / survival, se / survival
        values[ti], errors[ti] = value, se
    return values, errors


def split(dataset: Dataset, fraction: float, rng: np.random.Generator
          ) -> tuple[Dataset, Dataset]:
    """Random train/test split stratified by time point and trial group"""
    if not 0.0 < fraction < 1.0:
        raise InputValidationError(f"Split fraction must lie in (0, 1), got {fraction}")
    strata = (Group.plain, Group.pi_before_measure) if dataset.groups else (Group.plain,)
    train, test = [], []
    for ti in range(dataset.times.size):
        for group in strata:
            members = np.flatnonzero((dataset.time_index == ti) & (dataset.group == group))
            cut = int(round(fraction * members.size))
            if cut == 0 or cut == members.size:
                raise InputValidationError(
                    f"Time index {ti}, group {group.name}: {members.size} records cannot be split"
                )
            shuffled = rng.permutation(members)
            train.append(shuffled[:cut])
            test.append(shuffled[cut:])
    return (dataset.subset(np.sort(np.concatenate(train))),
            dataset.subset(np.sort(np.concatenate(test))))
