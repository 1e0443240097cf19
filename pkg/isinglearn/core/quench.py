"""Synthetic quench experiments: exact x-basis sampling plus injected error channels.

States are indexed so that bit i of the index is the z-spin of ion i
(0 -> s = +1, 1 -> s = -1). After the diagonal evolution the x-basis
amplitudes are the Walsh-Hadamard transform of the phase vector, and an
outcome bit 0 means +x, which the readout reports as dark.
"""
import logging
from collections.abc import Iterator
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from isinglearn.core.hamiltonian import energies
from isinglearn.core.observables import batch_observables
from isinglearn.errors import IndexOutOfRangeError, InputValidationError
from isinglearn.models.estimates import ObservableSet
from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags
from isinglearn.models.records import Dataset, ErrorChannels, Group, QuenchSchedule, ShotRecord

logger = logging.getLogger(__name__)

MAX_EXACT_IONS = 24
CHUNK_STATES = 2 ** 16
BATCH_AMPLITUDES = 2 ** 22


def _spin_chunks(n: int) -> Iterator[tuple[slice, np.ndarray]]:
    size = 2 ** n
    for start in range(0, size, CHUNK_STATES):
        stop = min(size, start + CHUNK_STATES)
        codes = np.arange(start, stop, dtype=np.int64)[:, None]
        yield slice(start, stop), 1.0 - 2.0 * ((codes >> np.arange(n)) & 1)


def state_energies(model: IsingModel, include_fields: bool) -> np.ndarray:
    """E(s) for every basis state, in index order"""
    if model.n > MAX_EXACT_IONS:
        raise InputValidationError(
            f"Exact sampling is limited to n <= {MAX_EXACT_IONS}, got {model.n}"
        )
    values = np.empty(2 ** model.n)
    fields = model.fields if include_fields else None
    for block, spins in _spin_chunks(model.n):
        values[block] = energies(model.couplings, spins, fields)
    return values


def field_energies(fields: np.ndarray, n: int) -> np.ndarray:
    """sum_i h_i s_i for a batch of field vectors (B, n), over every basis state"""
    values = np.empty((fields.shape[0], 2 ** n))
    for block, spins in _spin_chunks(n):
        values[:, block] = fields @ spins.T
    return values


def fwht(values: np.ndarray) -> np.ndarray:
    """Unnormalized Walsh-Hadamard transform along the last axis"""
    out = np.array(values, copy=True)
    lead, size = out.shape[:-1], out.shape[-1]
    if size & (size - 1):
        raise InputValidationError(f"Transform length must be a power of two, got {size}")
    half = 1
    while half < size:
        out = out.reshape(*lead, size // (2 * half), 2, half)
        upper, lower = out[..., 0, :], out[..., 1, :]
        out = np.stack((upper + lower, upper - lower), axis=-2)
        half *= 2
    return out.reshape(*lead, size)


def outcome_probabilities(energy: np.ndarray, t: float) -> np.ndarray:
    """x-basis outcome distribution of |+...+> after exp(-iHt), along the last axis"""
    size = energy.shape[-1]
    amplitudes = fwht(np.exp(-1j * energy * t)) / size
    probs = np.abs(amplitudes) ** 2
    return probs / probs.sum(axis=-1, keepdims=True)


def noise_fields(dec: DecoherenceModel, shots: int, rng: np.random.Generator) -> np.ndarray:
    """Residual fields (g_cor * lambda + g_ind * xi) / sqrt(2), one row per shot"""
    shared = rng.standard_normal((shots, 1))
    independent = rng.standard_normal((shots, dec.n))
    return (dec.gamma_cor[None] * shared + dec.gamma_ind[None] * independent) / np.sqrt(2.0)


def decode(codes: np.ndarray, n: int) -> np.ndarray:
    """Basis-state indices to bit rows, ion i taken from bit i"""
    return ((codes[:, None] >> np.arange(n)) & 1).astype(np.uint8)


def _sample_codes(static: np.ndarray, n: int, dec: DecoherenceModel | None, t: float,
                  flags: SequenceFlags, rng: np.random.Generator, count: int) -> np.ndarray:
    noisy = (flags.include_decoherence and dec is not None
             and bool(np.any(dec.gamma_cor) or np.any(dec.gamma_ind)))
    if not noisy:
        probs = outcome_probabilities(static, t)
        return rng.choice(probs.size, size=count, p=probs)

    codes = np.empty(count, dtype=np.int64)
    batch = max(1, BATCH_AMPLITUDES >> n)
    for start in range(0, count, batch):
        stop = min(count, start + batch)
        fields = noise_fields(dec, stop - start, rng)
        probs = outcome_probabilities(static[None] + field_energies(fields, n), t)
        cdf = np.cumsum(probs, axis=-1)
        draws = rng.random(stop - start)[:, None] * cdf[:, -1:]
        codes[start:stop] = np.minimum(np.sum(cdf < draws, axis=-1), static.size - 1)
    return codes


def _check_inputs(model: IsingModel, dec: DecoherenceModel | None, t: float) -> None:
    if not np.isfinite(t) or t < 0.0:
        raise InputValidationError(f"Evolution time must be finite and non-negative, got {t}")
    if dec is not None and dec.n != model.n:
        raise InputValidationError(f"Decoherence model covers {dec.n} ions, model has {model.n}")


def exact_sample(model: IsingModel, dec: DecoherenceModel | None, t: float,
                 flags: SequenceFlags, rng: np.random.Generator,
                 shots: int | None = None) -> np.ndarray:
    """Sample measured bits after the Ramsey quench.

    Returns one bit vector, or a (shots, n) matrix when ``shots`` is given.
    With decoherence on every shot draws its own residual fields, which
    survive the echo; static fields only enter when the echo is off.
    """
    _check_inputs(model, dec, t)
    static = state_energies(model, include_fields=not flags.echo)
    count = 1 if shots is None else shots
    bits = decode(_sample_codes(static, model.n, dec, t, flags, rng, count), model.n)
    return bits[0] if shots is None else bits


def corrupt_bits(bits: np.ndarray, channels: ErrorChannels, t: float, groups: np.ndarray,
                 rng: np.random.Generator) -> np.ndarray:
    """Leakage, the pi-before-measure inversion and SPAM flips on a (shots, n) batch"""
    out = np.array(bits, dtype=np.uint8, copy=True)
    shots, n = out.shape
    leak = channels.leakage_probability(t, n)
    leaked = rng.random((shots, n)) < leak[None] if np.any(leak) else np.zeros_like(out, bool)
    out[np.asarray(groups) == Group.pi_before_measure] ^= 1
    if channels.spam_flip > 0.0:
        out ^= (rng.random((shots, n)) < channels.spam_flip).astype(np.uint8)
    # leaked ions are shelved dark whatever the group or SPAM
    out[leaked] = 0
    return out


def apply_errors(bits: np.ndarray, channels: ErrorChannels, t: float, group: Group,
                 rng: np.random.Generator, time_index: int = 0) -> ShotRecord:
    """Corrupt one ideal shot into the record the readout would produce"""
    bits = np.asarray(bits, dtype=np.uint8)
    corrupted = corrupt_bits(bits[None], channels, t, np.array([group]), rng)[0]
    return ShotRecord(
        time_index=time_index,
        group=group,
        bits=corrupted,
        cooling_bright=np.ones_like(corrupted),
    )


def generate_dataset(model: IsingModel, channels: ErrorChannels, schedule: QuenchSchedule,
                     seed: int, threads: int = 1, groups: bool = True) -> Dataset:
    """Simulate every trial of the schedule.

    Each time point draws from its own stream seeded by (seed, time index),
    so the output does not depend on ``threads``. Trials alternate between
    the plain and pi-before-measure groups. Config-change ranges are global
    record indices in time-major order.
    """
    n, shots = model.n, schedule.shots_per_time
    dec = channels.decoherence
    for change in channels.config_change:
        if any(not 0 <= ion < n for ion in change.ions):
            raise IndexOutOfRangeError(f"Config change ions {change.ions} outside [0, {n})")
    flags = SequenceFlags(echo=schedule.echo, include_decoherence=dec is not None)
    _check_inputs(model, dec, 0.0)
    static = state_energies(model, include_fields=not schedule.echo)
    group_codes = (np.arange(shots) % 2 if groups else np.zeros(shots)).astype(np.int64)

    def simulate(ti: int) -> tuple[np.ndarray, np.ndarray]:
        t = float(schedule.times[ti])
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(ti,)))
        ideal = decode(_sample_codes(static, n, dec, t, flags, rng, shots), n)
        bits = corrupt_bits(ideal, channels, t, group_codes, rng)
        cooling = np.ones_like(bits)
        trials = ti * shots + np.arange(shots)
        for change in channels.config_change:
            rows = np.flatnonzero((trials >= change.start) & (trials <= change.stop))
            if rows.size:
                cells = np.ix_(rows, change.ions)
                cooling[cells] = 0
                bits[cells] = rng.integers(0, 2, size=(rows.size, len(change.ions)))
        return bits, cooling

    steps = range(schedule.times.size)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            blocks = list(pool.map(simulate, steps))
    else:
        blocks = [simulate(ti) for ti in steps]

    dataset = Dataset(
        n=n,
        times=schedule.times,
        echo=schedule.echo,
        groups=groups,
        time_index=np.repeat(np.arange(schedule.times.size), shots),
        group=np.tile(group_codes, schedule.times.size),
        bits=np.vstack([bits for bits, _ in blocks]),
        cooling=np.vstack([cooling for _, cooling in blocks]),
    )
    logger.info("generated %d records: n=%d, T=%d, M=%d", len(dataset), n,
                schedule.times.size, shots)
    return dataset


def moment_noise_dataset(model: IsingModel, dec: DecoherenceModel | None,
                         schedule: QuenchSchedule, rng: np.random.Generator) -> ObservableSet:
    """Analytic observables plus independent Gaussian shot noise of variance (1 - v^2) / M.

    Cross-observable covariance is ignored, so this surrogate works at any n.
    """
    flags = SequenceFlags(echo=schedule.echo, include_decoherence=dec is not None)
    predicted = batch_observables(model, dec, schedule.times, flags)
    shots = schedule.shots_per_time
    mag_se = np.sqrt(np.clip(1.0 - predicted.mag ** 2, 0.0, None) / shots)
    corr_se = np.sqrt(np.clip(1.0 - predicted.corr ** 2, 0.0, None) / shots)
    return ObservableSet(
        times=schedule.times,
        mag=predicted.mag + rng.standard_normal(mag_se.shape) * mag_se,
        mag_se=mag_se,
        corr=predicted.corr + rng.standard_normal(corr_se.shape) * corr_se,
        corr_se=corr_se,
        counts=np.full(schedule.times.size, shots),
        echo=schedule.echo,
    )
