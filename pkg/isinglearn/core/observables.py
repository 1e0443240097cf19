"""Closed-form x-basis observables after Ising evolution from |+...+>.

All coefficients are in rad/ms and times in ms, so the phase accumulated by a
coupling J over time t is 2Jt. With the echo on the longitudinal fields drop
out; with decoherence on, each observable picks up a Gaussian envelope.
When the echo is off and decoherence is on, the field factors and the
envelopes multiply (the dephasing formulas are otherwise stated for h = 0).

Batch evaluation costs O(n^2) per time for the magnetizations and O(n^3) per
time for the pair correlations (one masked product over k per pair).
"""
from collections.abc import Iterator
from dataclasses import dataclass

import numpy as np

from isinglearn.errors import DimensionMismatchError, IndexOutOfRangeError, InputValidationError
from isinglearn.models.estimates import PredictedObservables
from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags

MAX_BODY = 16


def _check_time(t: float) -> None:
    if not np.isfinite(t) or t < 0.0:
        raise InputValidationError(f"Evolution time must be finite and non-negative, got {t}")


def _check_index(i: int, n: int) -> None:
    if not 0 <= i < n:
        raise IndexOutOfRangeError(f"Ion index {i} outside [0, {n})")


def _rates(dec: DecoherenceModel | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    if dec is None:
        return np.zeros(n), np.zeros(n)
    if dec.n != n:
        raise DimensionMismatchError(f"Decoherence model covers {dec.n} ions, model has {n}")
    return dec.gamma_cor, dec.gamma_ind


def magnetization(model: IsingModel, dec: DecoherenceModel | None, t: float, i: int,
                  flags: SequenceFlags) -> float:
    """<sigma_x^i>(t) = [cos 2h_i t] exp(-(g_ind^2 + g_cor^2) t^2) prod_k cos 2J_ki t"""
    _check_time(t)
    _check_index(i, model.n)
    gamma_cor, gamma_ind = _rates(dec, model.n)
    # J_ii = 0 contributes a factor of one
    value = float(np.prod(np.cos(2.0 * model.couplings[:, i] * t)))
    if not flags.echo:
        value *= np.cos(2.0 * model.fields[i] * t)
    if flags.include_decoherence:
        value *= np.exp(-(gamma_ind[i] ** 2 + gamma_cor[i] ** 2) * t ** 2)
    return float(value)


def pair_correlation(model: IsingModel, dec: DecoherenceModel | None, t: float, i: int, j: int,
                     flags: SequenceFlags) -> float:
    """<sigma_x^i sigma_x^j>(t) as the average of the J_ki +/- J_kj branches"""
    _check_time(t)
    _check_index(i, model.n)
    _check_index(j, model.n)
    if i == j:
        raise InputValidationError("Pair correlation needs two distinct ions")
    gamma_cor, gamma_ind = _rates(dec, model.n)
    others = np.ones(model.n, dtype=bool)
    others[[i, j]] = False
    col_i, col_j = model.couplings[others, i], model.couplings[others, j]
    plus = np.prod(np.cos(2.0 * (col_i + col_j) * t))
    minus = np.prod(np.cos(2.0 * (col_i - col_j) * t))
    if not flags.echo:
        plus *= np.cos(2.0 * (model.fields[i] + model.fields[j]) * t)
        minus *= np.cos(2.0 * (model.fields[i] - model.fields[j]) * t)
    if flags.include_decoherence:
        base = gamma_ind[i] ** 2 + gamma_ind[j] ** 2
        plus *= np.exp(-(base + (gamma_cor[i] + gamma_cor[j]) ** 2) * t ** 2)
        minus *= np.exp(-(base + (gamma_cor[i] - gamma_cor[j]) ** 2) * t ** 2)
    return float(0.5 * (plus + minus))


def sign_assignments(k: int) -> np.ndarray:
    """All +/-1 assignments of k spins with the first spin fixed to +1"""
    codes = np.arange(2 ** (k - 1))[:, None]
    bits = (codes >> np.arange(k - 1)[None, :]) & 1
    return np.hstack([np.ones((codes.shape[0], 1)), 1.0 - 2.0 * bits])


def kbody_correlation(model: IsingModel, dec: DecoherenceModel | None, t: float,
                      indices: list[int], flags: SequenceFlags) -> float:
    """<sigma_x^{i_1} ... sigma_x^{i_k}>(t) by summing over the 2^k selected-spin signs.

    Every factor is even under s -> -s, so only the half with s_1 = +1 is
    summed. Cost is O(2^k n).
    """
    _check_time(t)
    k = len(indices)
    if k < 1:
        raise InputValidationError("k-body correlation needs at least one ion")
    if k > MAX_BODY:
        raise InputValidationError(f"k-body correlation limited to k <= {MAX_BODY}")
    if len(set(indices)) != k:
        raise InputValidationError(f"Duplicate ion indices in {indices}")
    for i in indices:
        _check_index(i, model.n)
    gamma_cor, gamma_ind = _rates(dec, model.n)
    selected = np.asarray(indices)
    others = np.ones(model.n, dtype=bool)
    others[selected] = False
    signs = sign_assignments(k)
    phases = model.couplings[np.ix_(others, selected)] @ signs.T
    terms = np.prod(np.cos(2.0 * phases * t), axis=0)
    if not flags.echo:
        terms = terms * np.cos(2.0 * (signs @ model.fields[selected]) * t)
    if flags.include_decoherence:
        exponent = np.sum(gamma_ind[selected] ** 2) + (signs @ gamma_cor[selected]) ** 2
        terms = terms * np.exp(-exponent * t ** 2)
    return float(np.mean(terms))


def early_time_connected(coupling: float, t: float) -> float:
    """Small-t approximation 4 J_ij^2 t^2 of the connected pair correlator"""
    return 4.0 * coupling ** 2 * t ** 2


def phase_misalignment_correlation(phi: np.ndarray, i: int, j: int) -> float:
    """Connected sigma_z correlation 1/2 cos(phi_i - phi_j) averaged over a global phase"""
    phi = np.asarray(phi, dtype=float)
    _check_index(i, phi.shape[0])
    _check_index(j, phi.shape[0])
    return float(0.5 * np.cos(phi[i] - phi[j]))


def phase_misalignment_matrix(phi: np.ndarray) -> np.ndarray:
    """Matrix of 1/2 cos(phi_i - phi_j) for every pair"""
    phi = np.asarray(phi, dtype=float)
    return 0.5 * np.cos(phi[:, None] - phi[None, :])


@dataclass(frozen=True)
class PairBlock:
    """Phase arguments 2t(J_ki +/- J_kj) for the pairs (i, j > i), masked at k in {i, j}"""
    i: int
    js: np.ndarray
    plus: np.ndarray
    minus: np.ndarray
    keep: np.ndarray


def pair_blocks(couplings: np.ndarray, times: np.ndarray) -> Iterator[PairBlock]:
    """Yield, for each i, the (T, n, n-i-1) phase arrays of all pairs (i, j > i)"""
    n = couplings.shape[0]
    scale = 2.0 * times[:, None, None]
    for i in range(n - 1):
        js = np.arange(i + 1, n)
        col_i = couplings[:, i][:, None]
        col_j = couplings[:, js]
        keep = np.ones((n, js.size), dtype=bool)
        keep[i, :] = False
        keep[js, np.arange(js.size)] = False
        yield PairBlock(
            i=i,
            js=js,
            plus=scale * (col_i + col_j)[None],
            minus=scale * (col_i - col_j)[None],
            keep=keep,
        )


def masked_cos(phases: np.ndarray, keep: np.ndarray) -> np.ndarray:
    """cos of the phases, replaced by one where ``keep`` is False"""
    return np.where(keep[None], np.cos(phases), 1.0)


def leave_one_out(factors: np.ndarray, axis: int) -> np.ndarray:
    """Product of all factors but one along ``axis``, by prefix and suffix products"""
    f = np.moveaxis(factors, axis, 0)
    prefix = np.ones_like(f)
    suffix = np.ones_like(f)
    if f.shape[0] > 1:
        prefix[1:] = np.cumprod(f[:-1], axis=0)
        suffix[:-1] = np.cumprod(f[::-1], axis=0)[::-1][1:]
    return np.moveaxis(prefix * suffix, 0, axis)


@dataclass(frozen=True)
class ObservableTerms:
    """Factorized observables: products over spectator ions, envelopes and field factors"""
    mag_product: np.ndarray
    plus_product: np.ndarray
    minus_product: np.ndarray
    mag_envelope: np.ndarray
    plus_envelope: np.ndarray
    minus_envelope: np.ndarray
    mag_field: np.ndarray
    plus_field: np.ndarray
    minus_field: np.ndarray

    @property
    def mag(self) -> np.ndarray:
        return self.mag_field * self.mag_envelope * self.mag_product

    @property
    def corr(self) -> np.ndarray:
        return 0.5 * (self.plus_field * self.plus_envelope * self.plus_product
                      + self.minus_field * self.minus_envelope * self.minus_product)


def coupling_products(couplings: np.ndarray, times: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Spectator cos products: (T, n) for magnetizations, (T, P) for each pair branch"""
    n = couplings.shape[0]
    mag = np.prod(np.cos(2.0 * times[:, None, None] * couplings[None]), axis=1)
    plus = np.empty((times.size, n * (n - 1) // 2))
    minus = np.empty_like(plus)
    start = 0
    for block in pair_blocks(couplings, times):
        stop = start + block.js.size
        plus[:, start:stop] = np.prod(masked_cos(block.plus, block.keep), axis=1)
        minus[:, start:stop] = np.prod(masked_cos(block.minus, block.keep), axis=1)
        start = stop
    return mag, plus, minus


def envelopes(gamma_cor: np.ndarray, gamma_ind: np.ndarray, times: np.ndarray
              ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian dephasing envelopes for magnetizations and both pair branches"""
    n = gamma_cor.shape[0]
    rows, cols = np.triu_indices(n, 1)
    t2 = times[:, None] ** 2
    mag = np.exp(-(gamma_ind ** 2 + gamma_cor ** 2)[None] * t2)
    base = gamma_ind[rows] ** 2 + gamma_ind[cols] ** 2
    plus = np.exp(-(base + (gamma_cor[rows] + gamma_cor[cols]) ** 2)[None] * t2)
    minus = np.exp(-(base + (gamma_cor[rows] - gamma_cor[cols]) ** 2)[None] * t2)
    return mag, plus, minus


def field_factors(fields: np.ndarray, times: np.ndarray
                  ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """cos 2h t factors present when the echo is off"""
    n = fields.shape[0]
    rows, cols = np.triu_indices(n, 1)
    scale = 2.0 * times[:, None]
    mag = np.cos(scale * fields[None])
    plus = np.cos(scale * (fields[rows] + fields[cols])[None])
    minus = np.cos(scale * (fields[rows] - fields[cols])[None])
    return mag, plus, minus


def observable_terms(couplings: np.ndarray, fields: np.ndarray, gamma_cor: np.ndarray,
                     gamma_ind: np.ndarray, times: np.ndarray, flags: SequenceFlags
                     ) -> ObservableTerms:
    """Evaluate every factor of every magnetization and pair correlation"""
    n = couplings.shape[0]
    pairs = n * (n - 1) // 2
    mag_p, plus_p, minus_p = coupling_products(couplings, times)
    if flags.include_decoherence:
        mag_e, plus_e, minus_e = envelopes(gamma_cor, gamma_ind, times)
    else:
        mag_e, plus_e, minus_e = (np.ones((times.size, n)), np.ones((times.size, pairs)),
                                  np.ones((times.size, pairs)))
    if flags.echo:
        mag_f, plus_f, minus_f = (np.ones((times.size, n)), np.ones((times.size, pairs)),
                                  np.ones((times.size, pairs)))
    else:
        mag_f, plus_f, minus_f = field_factors(fields, times)
    return ObservableTerms(mag_p, plus_p, minus_p, mag_e, plus_e, minus_e, mag_f, plus_f, minus_f)


def batch_observables(model: IsingModel, dec: DecoherenceModel | None, times: np.ndarray,
                      flags: SequenceFlags) -> PredictedObservables:
    """All magnetizations and pair correlations at every time"""
    times = np.asarray(times, dtype=float)
    for t in times:
        _check_time(float(t))
    gamma_cor, gamma_ind = _rates(dec, model.n)
    terms = observable_terms(model.couplings, model.fields, gamma_cor, gamma_ind, times, flags)
    return PredictedObservables(times=times, mag=terms.mag, corr=terms.corr, echo=flags.echo)
