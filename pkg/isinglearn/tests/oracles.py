"""Brute-force references the analytic engines are checked against"""
import itertools

import numpy as np
from scipy.linalg import hadamard

from ..models.hamiltonian import IsingModel


def random_model(rng: np.random.Generator, n: int, scale: float = 0.3,
                 fields: float = 0.0) -> IsingModel:
    """Random symmetric couplings in [-scale, scale] and fields in [0, fields]"""
    upper = rng.uniform(-scale, scale, size=n * (n - 1) // 2)
    return IsingModel.from_upper(n, upper, rng.uniform(0.0, fields, size=n))


def state_vector(model: IsingModel, t: float, echo: bool = True) -> np.ndarray:
    """|+...+> evolved for time t, basis index bit i = ion i, bit 1 = spin down"""
    psi = np.empty(2 ** model.n, dtype=complex)
    for index, bits in enumerate(itertools.product((0, 1), repeat=model.n)):
        s = 1.0 - 2.0 * np.array(bits[::-1], dtype=float)
        energy = sum(model.couplings[i, j] * s[i] * s[j]
                     for i in range(model.n) for j in range(i + 1, model.n))
        if not echo:
            energy += float(model.fields @ s)
        psi[index] = np.exp(-1j * energy * t)
    return psi / np.sqrt(psi.size)


def x_expectation(psi: np.ndarray, indices: list[int]) -> float:
    """<prod_{i in indices} sigma_x^i> = sum_s conj(psi[s]) psi[s ^ mask]"""
    mask = sum(1 << i for i in indices)
    flipped = psi[np.arange(psi.size) ^ mask]
    return float(np.real(np.vdot(psi, flipped)))


def x_basis_distribution(psi: np.ndarray) -> np.ndarray:
    """Probabilities of the x-basis outcomes, outcome bit 1 = -x"""
    amplitudes = hadamard(psi.size) @ psi / np.sqrt(psi.size)
    return np.abs(amplitudes) ** 2
