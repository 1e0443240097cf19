import numpy as np
import pytest
from pydantic import ValidationError

from ..core import hamiltonian
from ..errors import DimensionMismatchError, IndexOutOfRangeError
from ..models.hamiltonian import DecoherenceModel, IsingModel, IsingModelFile, SpinConfiguration
from .oracles import random_model


def test_from_upper_packs_row_major() -> None:
    model = IsingModel.from_upper(3, np.array([0.1, 0.2, 0.3]))
    assert model.couplings[0, 1] == 0.1, "J_01 is the first packed entry"
    assert model.couplings[0, 2] == 0.2, "J_02 is the second packed entry"
    assert model.couplings[2, 1] == 0.3, "J_12 is the third packed entry, mirrored"
    assert np.array_equal(model.upper, [0.1, 0.2, 0.3]), "upper must invert from_upper"
    assert np.array_equal(model.fields, np.zeros(3)), "fields default to zero"


def test_model_rejects_bad_couplings() -> None:
    with pytest.raises(ValidationError):
        IsingModel(couplings=[[0.0, 0.1], [0.2, 0.0]])
    with pytest.raises(ValidationError):
        IsingModel(couplings=[[0.5, 0.1], [0.1, 0.0]])
    with pytest.raises(ValidationError):
        IsingModel(couplings=[[0.0, np.inf], [np.inf, 0.0]])
    with pytest.raises(ValidationError):
        IsingModel(couplings=[[0.0, 0.1], [0.1, 0.0]], fields=[0.0, 0.0, 0.0])


def test_model_is_immutable() -> None:
    model = IsingModel(couplings=[[0.0, 0.1], [0.1, 0.0]])
    with pytest.raises(ValueError):
        model.couplings[0, 1] = 1.0


def test_model_file_keeps_units() -> None:
    model = IsingModel.from_upper(3, np.array([0.1, -0.2, 0.3]), np.array([0.0, 0.1, 0.2]))
    stored = IsingModelFile.model_validate_json(model.to_file().model_dump_json())
    assert stored.units == "rad_per_ms", "model files are always in rad/ms"
    restored = stored.to_model()
    assert np.array_equal(restored.couplings, model.couplings), "couplings survive the file"
    assert np.array_equal(restored.fields, model.fields), "fields survive the file"


def test_energy_of_two_spins() -> None:
    model = IsingModel(couplings=[[0.0, 0.5], [0.5, 0.0]], fields=[0.1, -0.2])
    config = SpinConfiguration(s=[1, -1])
    assert hamiltonian.energy(model, config) == pytest.approx(-0.5 + 0.1 + 0.2), \
        "E = J s1 s2 + h.s"
    with pytest.raises(DimensionMismatchError):
        hamiltonian.energy(model, SpinConfiguration(s=[1, 1, 1]))
    with pytest.raises(ValidationError):
        SpinConfiguration(s=[1, 0])


def test_batch_energies_match_single_energies(rng: np.random.Generator) -> None:
    model = random_model(rng, 6, fields=0.2)
    spins = 1.0 - 2.0 * rng.integers(0, 2, size=(20, 6))
    batch = hamiltonian.energies(model.couplings, spins, model.fields)
    single = [hamiltonian.energy(model, SpinConfiguration(s=s)) for s in spins]
    assert np.allclose(batch, single, rtol=0.0, atol=1e-12), "batch and scalar energies agree"


def test_energy_symmetries(rng: np.random.Generator) -> None:
    model = random_model(rng, 5)
    with_fields = random_model(rng, 5, fields=0.3)
    for _ in range(10):
        s = 1.0 - 2.0 * rng.integers(0, 2, size=5)
        config, reversed_config = SpinConfiguration(s=s), SpinConfiguration(s=-s)
        value = hamiltonian.energy(model, config)
        assert hamiltonian.energy(model, reversed_config) == pytest.approx(value, abs=1e-12), \
            "without fields a global spin flip keeps the energy"
        expected = hamiltonian.energy(with_fields, config) - 2.0 * with_fields.fields @ s
        assert hamiltonian.energy(with_fields, reversed_config) == pytest.approx(
            expected, abs=1e-12), "only the field term changes sign"
        for i in range(5):
            flipped = s.copy()
            flipped[i] = -flipped[i]
            gauged = hamiltonian.energy(hamiltonian.gauge_flip(model, i), config)
            assert gauged == pytest.approx(
                hamiltonian.energy(model, SpinConfiguration(s=flipped)), abs=1e-12), \
                f"a gauge flip of ion {i} acts like flipping spin {i}"


def test_gauge_flip_is_an_involution(rng: np.random.Generator) -> None:
    model = random_model(rng, 5)
    flipped = hamiltonian.gauge_flip(model, 2)
    assert np.array_equal(flipped.couplings[2, [0, 1, 3, 4]], -model.couplings[2, [0, 1, 3, 4]]), \
        "every coupling of the flipped ion changes sign"
    assert np.array_equal(flipped.couplings[0, 1], model.couplings[0, 1]), \
        "couplings between other ions are untouched"
    assert np.array_equal(hamiltonian.gauge_flip(flipped, 2).couplings, model.couplings), \
        "flipping twice restores the model"
    with pytest.raises(IndexOutOfRangeError):
        hamiltonian.gauge_flip(model, 5)


def test_gauge_distance_ignores_sign_flips(rng: np.random.Generator) -> None:
    model = random_model(rng, 7)
    copy = hamiltonian.apply_gauge(model, np.array([1, -1, 1, 1, -1, -1, 1]))
    assert hamiltonian.gauge_distance(model, copy, exhaustive=True) < 1e-12, \
        "a gauge copy is at distance 0"
    assert np.linalg.norm(model.couplings - copy.couplings) > 0.1, \
        "the plain distance sees the flips"


def test_greedy_gauge_recovers_two_flips(rng: np.random.Generator) -> None:
    upper = rng.uniform(0.8, 1.0, size=15) * rng.choice((-1.0, 1.0), size=15)
    model = IsingModel.from_upper(6, upper)
    copy = hamiltonian.gauge_flip(hamiltonian.gauge_flip(model, 1), 4)
    signs = hamiltonian.best_gauge(model, copy)
    assert np.all(signs * signs[0] == [1, -1, 1, 1, -1, 1]), "greedy search finds both flips"
    assert hamiltonian.gauge_distance(model, copy) < 1e-12, "greedy distance reaches 0"


def test_exhaustive_gauge_never_worse_than_greedy(rng: np.random.Generator) -> None:
    for _ in range(5):
        m1, m2 = random_model(rng, 6), random_model(rng, 6)
        greedy = hamiltonian.gauge_distance(m1, m2)
        exhaustive = hamiltonian.gauge_distance(m1, m2, exhaustive=True)
        assert exhaustive <= greedy + 1e-12, "exhaustive search is optimal"
    with pytest.raises(DimensionMismatchError):
        hamiltonian.gauge_distance(random_model(rng, 3), random_model(rng, 4))


def test_decoherence_model_rejects_negative_rates() -> None:
    with pytest.raises(ValidationError):
        DecoherenceModel(gamma_cor=[0.1, -0.1], gamma_ind=[0.1, 0.1])
    with pytest.raises(ValidationError):
        DecoherenceModel(gamma_cor=[0.1], gamma_ind=[0.1, 0.1])
    uniform = DecoherenceModel.uniform(3, 0.05, 0.1)
    assert uniform.n == 3 and np.all(uniform.gamma_ind == 0.1), "uniform fills every ion"
