import numpy as np
import pytest
from pydantic import ValidationError
from scipy.linalg import hadamard

from ..core.observables import batch_observables
from ..core.quench import (
    apply_errors,
    decode,
    exact_sample,
    fwht,
    generate_dataset,
    moment_noise_dataset,
)
from ..errors import IndexOutOfRangeError, InputValidationError
from ..models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags
from ..models.records import (
    MAX_LEAK_PROBABILITY,
    ConfigChange,
    ErrorChannels,
    Group,
    QuenchSchedule,
)
from .oracles import random_model, state_vector, x_basis_distribution


def test_fwht_matches_hadamard_matrix(rng: np.random.Generator) -> None:
    values = rng.standard_normal((3, 16))
    assert np.allclose(fwht(values), values @ hadamard(16).T, rtol=0.0, atol=1e-12), \
        "fast transform equals the Sylvester matrix product"
    with pytest.raises(InputValidationError):
        fwht(np.ones(12))


def test_decode_takes_ion_i_from_bit_i() -> None:
    bits = decode(np.array([0, 1, 6]), 3)
    assert bits.tolist() == [[0, 0, 0], [1, 0, 0], [0, 1, 1]], "bit i of the code is ion i"


def test_no_couplings_reads_all_dark(rng: np.random.Generator) -> None:
    model = IsingModel(couplings=np.zeros((5, 5)))
    bits = exact_sample(model, None, 3.0, SequenceFlags(), rng, shots=200)
    assert bits.shape == (200, 5), "one row per shot"
    assert not bits.any(), "|+...+> is an eigenstate, every ion reads dark"
    single = exact_sample(model, None, 3.0, SequenceFlags(), rng)
    assert single.shape == (5,), "without shots a single bit vector is returned"


def test_sampled_distribution_matches_state_vector(rng: np.random.Generator) -> None:
    model = random_model(rng, 4, scale=0.5)
    shots, t = 200_000, 1.7
    bits = exact_sample(model, None, t, SequenceFlags(), rng, shots=shots)
    codes = bits.astype(np.int64) @ (1 << np.arange(4))
    empirical = np.bincount(codes, minlength=16) / shots
    expected = x_basis_distribution(state_vector(model, t))
    assert 0.5 * np.abs(empirical - expected).sum() < 0.01, "total variation below 0.01"


def test_fields_only_act_without_echo(rng: np.random.Generator) -> None:
    model = IsingModel(couplings=np.zeros((2, 2)), fields=[np.pi / 4, 0.0])
    # cos(2 h t) = 0 at t = 1: ion 0 is bright half of the time
    echoed = exact_sample(model, None, 1.0, SequenceFlags(echo=True), rng, shots=4000)
    assert not echoed.any(), "the echo cancels the fields"
    plain = exact_sample(model, None, 1.0, SequenceFlags(echo=False), rng, shots=4000)
    assert 0.45 < plain[:, 0].mean() < 0.55, "ion 0 precesses to the equator"
    assert not plain[:, 1].any(), "ion 1 has no field"


def test_decoherence_envelopes_from_residual_fields(rng: np.random.Generator) -> None:
    model = IsingModel(couplings=[[0.0, 0.2], [0.2, 0.0]])
    dec = DecoherenceModel.uniform(2, 0.05, 0.1)
    shots, t = 20_000, 2.0
    bits = exact_sample(model, dec, t, SequenceFlags(), rng, shots=shots)
    spins = 1.0 - 2.0 * bits
    predicted = batch_observables(model, dec, np.array([t]), SequenceFlags())
    for i in range(2):
        v = predicted.mag[0, i]
        se = np.sqrt((1.0 - v ** 2) / shots)
        assert abs(spins[:, i].mean() - v) < 4.0 * se, f"magnetization envelope of ion {i}"
    v = predicted.corr[0, 0]
    se = np.sqrt((1.0 - v ** 2) / shots)
    assert abs((spins[:, 0] * spins[:, 1]).mean() - v) < 4.0 * se, "correlation envelope"


def test_dataset_is_independent_of_thread_count(rng: np.random.Generator) -> None:
    model = random_model(rng, 4)
    schedule = QuenchSchedule.uniform(3.0, 4, 50)
    channels = ErrorChannels(spam_flip=0.01, leakage_rate=0.02)
    one = generate_dataset(model, channels, schedule, seed=7, threads=1)
    many = generate_dataset(model, channels, schedule, seed=7, threads=3)
    assert np.array_equal(one.bits, many.bits), "per-time streams make threads irrelevant"
    other = generate_dataset(model, channels, schedule, seed=8)
    assert not np.array_equal(one.bits, other.bits), "a different seed changes the shots"


def test_groups_alternate_at_time_zero(rng: np.random.Generator) -> None:
    model = random_model(rng, 3)
    schedule = QuenchSchedule(times=[0.0], shots_per_time=10)
    dataset = generate_dataset(model, ErrorChannels(), schedule, seed=1)
    assert dataset.group.tolist() == [0, 1] * 5, "trials alternate plain and pi"
    assert not dataset.bits[dataset.group == Group.plain].any(), "plain trials read dark"
    assert dataset.bits[dataset.group == Group.pi_before_measure].all(), \
        "the extra pi pulse turns every ion bright"
    single = generate_dataset(model, ErrorChannels(), schedule, seed=1, groups=False)
    assert not single.group.any() and not single.groups, "groups can be turned off"


def test_leaked_ions_read_dark(rng: np.random.Generator) -> None:
    model = random_model(rng, 3)
    channels = ErrorChannels(leakage_rate=1.0)
    assert np.all(channels.leakage_probability(1.0, 3) == MAX_LEAK_PROBABILITY), \
        "leak probability stays below one"
    assert np.all(channels.leakage_probability(0.5, 3) == 0.5), "rate * t below the ceiling"
    schedule = QuenchSchedule(times=[1.0], shots_per_time=2000)
    dataset = generate_dataset(model, channels, schedule, seed=3)
    flipped = dataset.bits[dataset.group == Group.pi_before_measure]
    assert dataset.bits.mean() < 0.005, "nearly every ion is shelved dark"
    assert flipped.mean() < 0.005, "leakage wins over the pi pulse"
    record = apply_errors(np.ones(3, dtype=np.uint8), ErrorChannels(), 1.0,
                          Group.pi_before_measure, rng)
    assert not record.bits.any(), "without leakage the pi pulse inverts every bit"
    assert record.group is Group.pi_before_measure


def test_config_change_marks_cooling_dark(rng: np.random.Generator) -> None:
    model = random_model(rng, 3)
    schedule = QuenchSchedule(times=[0.0, 1.0], shots_per_time=5)
    change = ConfigChange(start=3, stop=6, ions=[1])
    dataset = generate_dataset(model, ErrorChannels(config_change=[change]), schedule, seed=2)
    dark = np.zeros((10, 3), dtype=np.uint8)
    dark[3:7, 1] = 1
    assert np.array_equal(dataset.cooling, 1 - dark), "trials 3..6 see ion 1 dark at cooling"
    bad = ErrorChannels(config_change=[ConfigChange(start=0, stop=1, ions=[3])])
    with pytest.raises(IndexOutOfRangeError):
        generate_dataset(model, bad, schedule, seed=2)


def test_moment_noise_surrogate(rng: np.random.Generator) -> None:
    model = random_model(rng, 12)
    schedule = QuenchSchedule.uniform(2.0, 5, 400)
    observed = moment_noise_dataset(model, None, schedule, rng)
    assert observed.mag.shape == (5, 12) and observed.corr.shape == (5, 66), \
        "one row per time, packed pairs"
    assert np.all(observed.counts == 400), "counts carry the shot number"
    assert np.allclose(observed.mag_se[0], 0.0), "no noise where the value is exactly 1"
    predicted = batch_observables(model, None, schedule.times, SequenceFlags())
    expected = np.sqrt((1.0 - predicted.corr ** 2) / 400)
    assert np.allclose(observed.corr_se, expected), "se = sqrt((1 - v^2) / M)"


def test_schedule_and_input_validation(rng: np.random.Generator) -> None:
    with pytest.raises(ValidationError):
        QuenchSchedule(times=[1.0, 0.5], shots_per_time=10)
    with pytest.raises(ValidationError):
        QuenchSchedule(times=[0.0], shots_per_time=0)
    with pytest.raises(ValidationError):
        ErrorChannels(spam_flip=1.0)
    model = random_model(rng, 3)
    with pytest.raises(InputValidationError):
        exact_sample(model, None, -0.1, SequenceFlags(), rng)
    with pytest.raises(InputValidationError):
        exact_sample(model, DecoherenceModel.zeros(4), 1.0, SequenceFlags(), rng)
    with pytest.raises(InputValidationError):
        exact_sample(IsingModel(couplings=np.zeros((25, 25))), None, 1.0, SequenceFlags(), rng)
