import itertools

import numpy as np
import pytest

from ..core import hamiltonian
from ..core.observables import (
    batch_observables,
    early_time_connected,
    kbody_correlation,
    leave_one_out,
    magnetization,
    observable_terms,
    pair_correlation,
    phase_misalignment_correlation,
    phase_misalignment_matrix,
    sign_assignments,
)
from ..errors import DimensionMismatchError, IndexOutOfRangeError, InputValidationError
from ..models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags
from .oracles import random_model, state_vector, x_expectation

TIMES = (0.0, 0.4, 1.3, 2.9)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
@pytest.mark.parametrize("echo", [True, False])
def test_closed_forms_match_state_vector(rng: np.random.Generator, n: int, echo: bool) -> None:
    model = random_model(rng, n, fields=0.4)
    flags = SequenceFlags(echo=echo)
    for t in TIMES:
        psi = state_vector(model, t, echo=echo)
        for i in range(n):
            assert magnetization(model, None, t, i, flags) == pytest.approx(
                x_expectation(psi, [i]), abs=1e-10), f"magnetization of ion {i} at t={t}"
        for i, j in itertools.combinations(range(n), 2):
            assert pair_correlation(model, None, t, i, j, flags) == pytest.approx(
                x_expectation(psi, [i, j]), abs=1e-10), f"correlation ({i}, {j}) at t={t}"
        for k in range(3, min(n, 5) + 1):
            for indices in itertools.combinations(range(n), k):
                assert kbody_correlation(model, None, t, list(indices), flags) == pytest.approx(
                    x_expectation(psi, list(indices)), abs=1e-10), f"{k}-body {indices} at t={t}"


@pytest.mark.parametrize("n", [8, 9, 10])
def test_batch_matches_state_vector_on_larger_crystals(rng: np.random.Generator, n: int) -> None:
    model = random_model(rng, n, fields=0.4)
    flags = SequenceFlags(echo=False)
    times = np.array([0.7, 2.1])
    predicted = batch_observables(model, None, times, flags)
    rows, cols = np.triu_indices(n, 1)
    for ti, t in enumerate(times):
        psi = state_vector(model, t, echo=False)
        mags = [x_expectation(psi, [i]) for i in range(n)]
        corrs = [x_expectation(psi, [int(i), int(j)]) for i, j in zip(rows, cols, strict=True)]
        assert np.allclose(predicted.mag[ti], mags, rtol=0.0, atol=1e-10), \
            f"magnetizations of {n} ions at t={t}"
        assert np.allclose(predicted.corr[ti], corrs, rtol=0.0, atol=1e-10), \
            f"correlations of {n} ions at t={t}"
        indices = [0, 2, 3, 5, n - 1]
        assert kbody_correlation(model, None, t, indices, flags) == pytest.approx(
            x_expectation(psi, indices), abs=1e-10), f"5-body {indices} at t={t}"


def test_batch_matches_single_evaluations(rng: np.random.Generator) -> None:
    model = random_model(rng, 6, fields=0.3)
    dec = DecoherenceModel(gamma_cor=rng.uniform(0, 0.1, 6), gamma_ind=rng.uniform(0, 0.2, 6))
    times = np.array(TIMES)
    for echo in (True, False):
        flags = SequenceFlags(echo=echo)
        predicted = batch_observables(model, dec, times, flags)
        rows, cols = np.triu_indices(6, 1)
        for ti, t in enumerate(times):
            mags = [magnetization(model, dec, t, i, flags) for i in range(6)]
            corrs = [pair_correlation(model, dec, t, i, j, flags)
                     for i, j in zip(rows, cols, strict=True)]
            assert np.allclose(predicted.mag[ti], mags, rtol=0.0, atol=1e-12), \
                "batch magnetizations agree with the scalar form"
            assert np.allclose(predicted.corr[ti], corrs, rtol=0.0, atol=1e-12), \
                "batch correlations agree with the scalar form, packed i<j"


def test_kbody_reduces_to_one_and_two_body(rng: np.random.Generator) -> None:
    model = random_model(rng, 5)
    dec = DecoherenceModel.uniform(5, 0.05, 0.1)
    flags = SequenceFlags()
    for t in TIMES:
        assert kbody_correlation(model, dec, t, [2], flags) == pytest.approx(
            magnetization(model, dec, t, 2, flags), abs=1e-12), "k=1 is the magnetization"
        assert kbody_correlation(model, dec, t, [1, 3], flags) == pytest.approx(
            pair_correlation(model, dec, t, 1, 3, flags), abs=1e-12), "k=2 is the correlation"


def test_observables_are_gauge_invariant(rng: np.random.Generator) -> None:
    model = random_model(rng, 5)
    flipped = hamiltonian.gauge_flip(model, 3)
    times = np.array(TIMES)
    a = batch_observables(model, None, times, SequenceFlags())
    b = batch_observables(flipped, None, times, SequenceFlags())
    assert np.allclose(a.mag, b.mag, rtol=0.0, atol=1e-12), "magnetizations ignore the gauge"
    assert np.allclose(a.corr, b.corr, rtol=0.0, atol=1e-12), "correlations ignore the gauge"


def test_gauge_flip_with_correlated_dephasing(rng: np.random.Generator) -> None:
    model = random_model(rng, 5)
    flipped = hamiltonian.gauge_flip(model, 2)
    gamma_cor, gamma_ind = rng.uniform(0.05, 0.2, 5), rng.uniform(0.0, 0.1, 5)
    signed = gamma_cor.copy()
    signed[2] = -signed[2]
    times = np.array(TIMES)
    flags = SequenceFlags()
    base = observable_terms(model.couplings, model.fields, gamma_cor, gamma_ind, times, flags)
    paired = observable_terms(flipped.couplings, flipped.fields, signed, gamma_ind, times, flags)
    assert np.allclose(paired.mag, base.mag, rtol=0.0, atol=1e-12), \
        "magnetizations see gamma_cor squared only"
    assert np.allclose(paired.corr, base.corr, rtol=0.0, atol=1e-12), \
        "flipping ion 2 together with its correlated rate is a symmetry"

    dec = DecoherenceModel(gamma_cor=gamma_cor, gamma_ind=gamma_ind)
    plain = batch_observables(flipped, dec, times, flags)
    assert np.allclose(plain.mag, base.mag, rtol=0.0, atol=1e-12)
    assert np.max(np.abs(plain.corr - base.corr)) > 1e-4, \
        "a coupling gauge flip alone changes correlations once gamma_cor is nonzero"


def test_zero_couplings_and_time_zero() -> None:
    model = IsingModel(couplings=np.zeros((3, 3)))
    predicted = batch_observables(model, None, np.array([0.0, 5.0]), SequenceFlags())
    assert np.array_equal(predicted.mag, np.ones((2, 3))), "no coupling means no precession"
    assert np.array_equal(predicted.corr, np.ones((2, 3))), "and no correlation decay"


def test_decoherence_envelope_of_two_ions() -> None:
    model = IsingModel(couplings=np.zeros((2, 2)))
    dec = DecoherenceModel(gamma_cor=[0.1, 0.2], gamma_ind=[0.3, 0.4])
    flags = SequenceFlags()
    t = 1.5
    assert magnetization(model, dec, t, 0, flags) == pytest.approx(
        np.exp(-(0.3 ** 2 + 0.1 ** 2) * t ** 2)), "single-ion Gaussian envelope"
    expected = 0.5 * (np.exp(-(0.09 + 0.16 + 0.3 ** 2) * t ** 2)
                      + np.exp(-(0.09 + 0.16 + 0.1 ** 2) * t ** 2))
    assert pair_correlation(model, dec, t, 0, 1, flags) == pytest.approx(expected), \
        "correlated dephasing enters through gamma_i +/- gamma_j"
    off = SequenceFlags(include_decoherence=False)
    assert magnetization(model, dec, t, 0, off) == 1.0, "envelopes can be switched off"


def test_early_time_connected_correlator() -> None:
    j, t = 0.2, 0.05
    model = IsingModel(couplings=[[0.0, j], [j, 0.0]])
    flags = SequenceFlags()
    connected = (pair_correlation(model, None, t, 0, 1, flags)
                 - magnetization(model, None, t, 0, flags)
                 * magnetization(model, None, t, 1, flags))
    assert connected == pytest.approx(np.sin(2 * j * t) ** 2, rel=1e-12), \
        "two ions: <XX> - <X><X> = sin^2 2Jt"
    assert early_time_connected(j, t) == pytest.approx(connected, rel=1e-3), \
        "4 J^2 t^2 at small t"


def test_phase_misalignment() -> None:
    phi = np.array([0.0, np.pi / 3, np.pi])
    assert phase_misalignment_correlation(phi, 0, 1) == pytest.approx(0.25), "cos(pi/3) / 2"
    matrix = phase_misalignment_matrix(phi)
    assert matrix[0, 2] == pytest.approx(-0.5), "opposite phases anticorrelate"
    assert np.allclose(np.diag(matrix), 0.5), "aligned with itself"
    with pytest.raises(IndexOutOfRangeError):
        phase_misalignment_correlation(phi, 0, 3)


def test_invalid_inputs_raise(rng: np.random.Generator) -> None:
    model = random_model(rng, 3)
    flags = SequenceFlags()
    with pytest.raises(InputValidationError):
        magnetization(model, None, -1.0, 0, flags)
    with pytest.raises(IndexOutOfRangeError):
        magnetization(model, None, 1.0, 3, flags)
    with pytest.raises(InputValidationError):
        pair_correlation(model, None, 1.0, 1, 1, flags)
    with pytest.raises(InputValidationError):
        kbody_correlation(model, None, 1.0, [0, 0], flags)
    with pytest.raises(InputValidationError):
        kbody_correlation(model, None, 1.0, [], flags)
    with pytest.raises(DimensionMismatchError):
        magnetization(model, DecoherenceModel.zeros(4), 1.0, 0, flags)


def test_sign_assignments_fix_the_first_spin() -> None:
    signs = sign_assignments(3)
    assert signs.shape == (4, 3), "half of the 2^k assignments"
    assert np.all(signs[:, 0] == 1.0), "first spin fixed to +1"
    assert len({tuple(row) for row in signs}) == 4, "assignments are distinct"


def test_leave_one_out_products(rng: np.random.Generator) -> None:
    factors = rng.uniform(-1.0, 1.0, size=(3, 5, 2))
    result = leave_one_out(factors, axis=1)
    for k in range(5):
        naive = np.prod(np.delete(factors, k, axis=1), axis=1)
        assert np.allclose(result[:, k], naive, rtol=0.0, atol=1e-14), \
            f"product without factor {k}"
