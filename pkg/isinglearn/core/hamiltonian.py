"""Energy evaluation and the per-ion sign-flip gauge of the Ising model.

Flipping the sign of every coupling attached to one ion leaves all echoed
observables unchanged, so fitted models are only defined up to this Z2^N
action. ``gauge_distance`` compares two models modulo the gauge.
"""
import itertools
import logging

import numpy as np

from isinglearn.errors import DimensionMismatchError, IndexOutOfRangeError
from isinglearn.models.hamiltonian import IsingModel, SpinConfiguration

logger = logging.getLogger(__name__)

EXHAUSTIVE_LIMIT = 16


def energy(model: IsingModel, config: SpinConfiguration) -> float:
    """E(s) = sum_{i<j} J_ij s_i s_j + sum_i h_i s_i"""
    if config.n != model.n:
        raise DimensionMismatchError(
            f"Configuration has {config.n} spins, model has {model.n} ions"
        )
    s = config.s
    return float(0.5 * s @ model.couplings @ s + model.fields @ s)


def energies(couplings: np.ndarray, spins: np.ndarray, fields: np.ndarray | None = None
             ) -> np.ndarray:
    """Energies of a batch of configurations, one per row of ``spins``"""
    values = 0.5 * np.einsum("ci,ij,cj->c", spins, couplings, spins)
    if fields is not None:
        values = values + spins @ fields
    return values


def gauge_flip(model: IsingModel, i: int) -> IsingModel:
    """Flip the sign of every coupling J_ij, j != i; fields are untouched"""
    if not 0 <= i < model.n:
        raise IndexOutOfRangeError(f"Ion index {i} outside [0, {model.n})")
    signs = np.ones(model.n)
    signs[i] = -1.0
    return model.with_couplings(signs[:, None] * model.couplings * signs[None, :])


def apply_gauge(model: IsingModel, signs: np.ndarray) -> IsingModel:
    """Apply J -> D J D for a diagonal sign matrix D"""
    signs = np.asarray(signs, dtype=float)
    if signs.shape != (model.n,):
        raise DimensionMismatchError(f"Sign vector must have length {model.n}")
    return model.with_couplings(signs[:, None] * model.couplings * signs[None, :])


def _distance(j1: np.ndarray, j2: np.ndarray, signs: np.ndarray) -> float:
    return float(np.linalg.norm(j1 - signs[:, None] * j2 * signs[None, :]))


def best_gauge(m1: IsingModel, m2: IsingModel, exhaustive: bool = False) -> np.ndarray:
    """Sign vector d minimizing ||J1 - D J2 D||_F over the explored assignments.

    The greedy search starts from all +1 and flips the single sign with the
    largest decrease until none decreases the distance. It is a heuristic;
    ``exhaustive=True`` enumerates all 2^(n-1) assignments (n <= 16).
    """
    if m1.n != m2.n:
        raise DimensionMismatchError(f"Models have {m1.n} and {m2.n} ions")
    n = m1.n
    # ||J1 - D J2 D||^2 = const - 2 d^T C d with C = J1 * J2 elementwise
    overlap = m1.couplings * m2.couplings
    if exhaustive:
        if n > EXHAUSTIVE_LIMIT:
            raise DimensionMismatchError(
                f"Exhaustive gauge search limited to n <= {EXHAUSTIVE_LIMIT}"
            )
        best, best_score = np.ones(n), -np.inf
        for tail in itertools.product((1.0, -1.0), repeat=n - 1):
            signs = np.array((1.0, *tail))
            score = signs @ overlap @ signs
            if score > best_score:
                best, best_score = signs, score
        return best

    signs = np.ones(n)
    field = overlap @ signs
    while True:
        # flipping d_i changes d^T C d by -4 d_i (C d)_i
        gains = -4.0 * signs * field
        i = int(np.argmax(gains))
        if gains[i] <= 1e-15 * max(float(np.abs(overlap).sum()), 1e-300):
            break
        signs[i] = -signs[i]
        field += 2.0 * signs[i] * overlap[:, i]
    return signs


def gauge_distance(m1: IsingModel, m2: IsingModel, exhaustive: bool = False) -> float:
    """Frobenius distance between couplings, minimized over per-ion sign flips"""
    signs = best_gauge(m1, m2, exhaustive=exhaustive)
    distance = _distance(m1.couplings, m2.couplings, signs)
    logger.debug("gauge distance %.3e with %d flipped ions", distance, int(np.sum(signs < 0)))
    return distance
