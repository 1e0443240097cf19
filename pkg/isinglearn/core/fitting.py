"""Least-squares fits of couplings, laser amplitudes, dephasing rates and fields.

Residual vectors follow ``ObservableSet.flat``: per time, the n
magnetizations then the pairs in ``numpy.triu_indices(n, 1)`` order.
Coupling parameters use the same packed upper-triangle order.
"""
import logging
from collections.abc import Callable

import numpy as np
from scipy import sparse

from isinglearn.core.lm import LMResult, levenberg_marquardt
from isinglearn.core.observables import (
    batch_observables,
    envelopes,
    field_factors,
    leave_one_out,
    masked_cos,
    observable_terms,
    pair_blocks,
)
from isinglearn.core.phonon import couplings_from_amplitudes, tone_kernels
from isinglearn.errors import DimensionMismatchError, InputValidationError
from isinglearn.models.crystal import ModeSet, ToneSpec
from isinglearn.models.estimates import ObservableSet, PredictedObservables
from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel, SequenceFlags
from isinglearn.models.results import FitOptions, FitResult, LearningPoint, Scheme

logger = logging.getLogger(__name__)

SE_FLOOR = 1e-4
FIELD_GRID = 400
DECAY_FLOOR = 0.05


def pair_index(n: int, a: np.ndarray | int, b: np.ndarray | int) -> np.ndarray:
    """Position of the pair {a, b} in the packed upper triangle"""
    low, high = np.minimum(a, b), np.maximum(a, b)
    return low * (2 * n - low - 1) // 2 + high - low - 1


def _check_same_shape(predicted: PredictedObservables | ObservableSet,
                      observed: ObservableSet) -> None:
    if predicted.mag.shape != observed.mag.shape or predicted.corr.shape != observed.corr.shape:
        raise DimensionMismatchError(
            f"Predicted {predicted.mag.shape} / {predicted.corr.shape} against observed "
            f"{observed.mag.shape} / {observed.corr.shape}"
        )


def rss(predicted: PredictedObservables | ObservableSet, observed: ObservableSet) -> float:
    """Unweighted sum of squared residuals over every magnetization and correlation"""
    _check_same_shape(predicted, observed)
    residual = predicted.flat() - observed.flat()
    return float(residual @ residual)


def canonical_sign(x: np.ndarray) -> np.ndarray:
    """Global sign flip that makes the largest-magnitude entry non-negative"""
    if x.size == 0:
        return x.copy()
    return -x if x[np.argmax(np.abs(x))] < 0.0 else x.copy()


def _rates(dec: DecoherenceModel | None, n: int) -> tuple[np.ndarray, np.ndarray]:
    if dec is None:
        return np.zeros(n), np.zeros(n)
    if dec.n != n:
        raise DimensionMismatchError(f"Decoherence model covers {dec.n} ions, data has {n}")
    return dec.gamma_cor, dec.gamma_ind


def jacobian_full(model: IsingModel, dec: DecoherenceModel | None, times: np.ndarray,
                  flags: SequenceFlags) -> sparse.csr_matrix:
    """Sparse derivative of every observable with respect to every packed J_ij.

    d m_i / d J_ki = -2t sin(2 J_ki t) times the product over the other
    spectators; a pair (i, j) depends on J_ki and J_kj through both branches
    and not at all on J_ij.
    """
    times = np.asarray(times, dtype=float)
    n, steps = model.n, times.size
    pairs = n * (n - 1) // 2
    width = n + pairs
    gamma_cor, gamma_ind = _rates(dec, n)
    terms = observable_terms(model.couplings, model.fields, gamma_cor, gamma_ind, times, flags)
    scale = 2.0 * times[:, None, None]
    row_base = (np.arange(steps) * width)[:, None]
    rows, cols, values = [], [], []

    phases = scale * model.couplings[None]
    d_mag = ((terms.mag_field * terms.mag_envelope)[:, None, :] * (-scale * np.sin(phases))
             * leave_one_out(np.cos(phases), axis=1))
    spectator, ion = np.nonzero(~np.eye(n, dtype=bool))
    rows.append(np.broadcast_to(row_base + ion[None], (steps, ion.size)))
    cols.append(np.broadcast_to(pair_index(n, spectator, ion)[None], (steps, ion.size)))
    values.append(d_mag[:, spectator, ion])

    start = 0
    for block in pair_blocks(model.couplings, times):
        packed = start + np.arange(block.js.size)
        start += block.js.size
        weight_plus = 0.5 * (terms.plus_field * terms.plus_envelope)[:, packed]
        weight_minus = 0.5 * (terms.minus_field * terms.minus_envelope)[:, packed]
        d_plus = (weight_plus[:, None, :] * (-scale * np.sin(block.plus))
                  * leave_one_out(masked_cos(block.plus, block.keep), axis=1))
        d_minus = (weight_minus[:, None, :] * (-scale * np.sin(block.minus))
                   * leave_one_out(masked_cos(block.minus, block.keep), axis=1))
        spectator, column = np.nonzero(block.keep)
        pair_rows = np.broadcast_to(row_base + n + packed[column][None], (steps, column.size))
        for partner, sign in ((block.i, 1.0), (block.js[column], -1.0)):
            rows.append(pair_rows)
            cols.append(np.broadcast_to(pair_index(n, spectator, partner)[None],
                                        (steps, column.size)))
            values.append(d_plus[:, spectator, column] + sign * d_minus[:, spectator, column])

    matrix = sparse.coo_matrix(
        (np.concatenate([v.ravel() for v in values]),
         (np.concatenate([r.ravel() for r in rows]), np.concatenate([c.ravel() for c in cols]))),
        shape=(steps * width, pairs),
    )
    return matrix.tocsr()


def _flags(observed: ObservableSet, dec: DecoherenceModel | None) -> SequenceFlags:
    return SequenceFlags(echo=observed.echo, include_decoherence=dec is not None)


def _weights(observed: ObservableSet, options: FitOptions) -> np.ndarray | None:
    if not options.weighted:
        return None
    return 1.0 / np.maximum(observed.flat_se(), SE_FLOOR)


class _LearningCurve:
    """Records unweighted train and test RSS at every accepted point.

    The LM cost is weighted when the fit is; the curve never is.
    """

    def __init__(self, predict: Callable, train: ObservableSet, test: ObservableSet | None
                 ) -> None:
        self.predict = predict
        self.train = train
        self.test = test
        self.points: list[LearningPoint] = []

    def train_rss(self, x: np.ndarray) -> float:
        return rss(self.predict(x), self.train)

    def __call__(self, x: np.ndarray, cost: float) -> None:
        test_rss = None if self.test is None else rss(self.predict(x), self.test)
        self.points.append(LearningPoint(train_rss=self.train_rss(x), test_rss=test_rss,
                                         objective=cost))


def _least_squares(target: np.ndarray, predict_flat: Callable, jacobian: Callable,
                   x0: np.ndarray, weights: np.ndarray | None, options: FitOptions,
                   curve: _LearningCurve) -> LMResult:
    def residual(x: np.ndarray) -> np.ndarray:
        r = predict_flat(x) - target
        return r if weights is None else r * weights

    def weighted_jacobian(x: np.ndarray) -> "np.ndarray | sparse.spmatrix":
        jac = jacobian(x)
        if weights is None:
            return jac
        return sparse.diags(weights) @ jac if sparse.issparse(jac) else weights[:, None] * jac

    return levenberg_marquardt(residual, weighted_jacobian, x0, options, callback=curve)


def _result(scheme: Scheme, lm: LMResult, curve: _LearningCurve, x: np.ndarray | None = None,
            **fitted: object) -> FitResult:
    """``x`` overrides lm.x when the returned parameters were canonicalized"""
    final = lm.x if x is None else x
    test_rss = None if curve.test is None else rss(curve.predict(final), curve.test)
    return FitResult(
        scheme=scheme,
        train_rss=curve.train_rss(final),
        test_rss=test_rss,
        iterations=lm.iterations,
        converged=lm.converged,
        message=lm.message,
        learning_curve=curve.points,
        param_se=lm.standard_errors(),
        **fitted,
    )


def fit_full(observed: ObservableSet, dec: DecoherenceModel | None, init: IsingModel,
             options: FitOptions | None = None, test: ObservableSet | None = None) -> FitResult:
    """Fit all n(n-1)/2 couplings with the dephasing rates and fields held fixed"""
    options = options or FitOptions()
    if init.n != observed.n:
        raise DimensionMismatchError(f"Initial model has {init.n} ions, data has {observed.n}")
    flags = _flags(observed, dec)
    times = observed.times

    def model_at(x: np.ndarray) -> IsingModel:
        return IsingModel.from_upper(init.n, x, init.fields)

    def predict(x: np.ndarray) -> PredictedObservables:
        return batch_observables(model_at(x), dec, times, flags)

    curve = _LearningCurve(predict, observed, test)
    lm = _least_squares(observed.flat(), lambda x: predict(x).flat(),
                        lambda x: jacobian_full(model_at(x), dec, times, flags),
                        init.upper, _weights(observed, options), options, curve)
    return _result(Scheme.full, lm, curve, model=model_at(lm.x))


def evaluate_model(observed: ObservableSet, dec: DecoherenceModel | None, model: IsingModel,
                   test: ObservableSet | None = None, scheme: Scheme = Scheme.theory
                   ) -> FitResult:
    """RSS of a fixed model, without fitting"""
    flags = _flags(observed, dec)
    train = rss(batch_observables(model, dec, observed.times, flags), observed)
    test_rss = None
    if test is not None:
        test_rss = rss(batch_observables(model, dec, test.times, _flags(test, dec)), test)
    return FitResult(scheme=scheme, model=model, train_rss=train, test_rss=test_rss,
                     message="evaluated without fitting",
                     learning_curve=[LearningPoint(train_rss=train, test_rss=test_rss)])


def amplitude_chain(kernels: np.ndarray, amplitudes: np.ndarray) -> sparse.csr_matrix:
    """d J_ab / d Omega^t_c as a (pairs, tones * n) matrix"""
    tones, n, _ = kernels.shape
    rows, cols = np.triu_indices(n, 1)
    packed = np.arange(rows.size)
    entries_r, entries_c, values = [], [], []
    for t in range(tones):
        kernel = kernels[t, rows, cols]
        entries_r += [packed, packed]
        entries_c += [t * n + rows, t * n + cols]
        values += [amplitudes[t, cols] * kernel, amplitudes[t, rows] * kernel]
    return sparse.coo_matrix(
        (np.concatenate(values), (np.concatenate(entries_r), np.concatenate(entries_c))),
        shape=(rows.size, tones * n),
    ).tocsr()


def fit_omega(observed: ObservableSet, dec: DecoherenceModel | None, modes: ModeSet,
              tones: list[ToneSpec], init_amplitudes: np.ndarray,
              options: FitOptions | None = None, test: ObservableSet | None = None,
              phases: np.ndarray | None = None, fields: np.ndarray | None = None) -> FitResult:
    """Fit n amplitudes per tone with the phonon modes and detunings fixed.

    Couplings are rebuilt from the candidate amplitudes at every step and the
    Jacobian follows by the chain rule through J = sum_t Omega^t Omega^t G^t.
    """
    options = options or FitOptions()
    n = observed.n
    if modes.n != n:
        raise DimensionMismatchError(f"Modes cover {modes.n} ions, data has {n}")
    kernels = tone_kernels(modes, tones)
    if phases is not None:
        phases = np.asarray(phases, dtype=float)
        kernels = kernels * np.cos(phases[:, None] - phases[None, :])[None]
    start = np.asarray(init_amplitudes, dtype=float)
    if start.ndim == 1:
        start = np.tile(start, (len(tones), 1))
    if start.shape != (len(tones), n):
        raise DimensionMismatchError(f"Initial amplitudes must have shape ({len(tones)}, {n})")
    fields = np.zeros(n) if fields is None else np.asarray(fields, dtype=float)
    flags = _flags(observed, dec)
    times = observed.times

    def model_at(x: np.ndarray) -> IsingModel:
        amplitudes = x.reshape(len(tones), n)
        return IsingModel(couplings=couplings_from_amplitudes(kernels, amplitudes),
                          fields=fields)

    def predict(x: np.ndarray) -> PredictedObservables:
        return batch_observables(model_at(x), dec, times, flags)

    def jacobian(x: np.ndarray) -> sparse.csr_matrix:
        chain = amplitude_chain(kernels, x.reshape(len(tones), n))
        return jacobian_full(model_at(x), dec, times, flags) @ chain

    curve = _LearningCurve(predict, observed, test)
    lm = _least_squares(observed.flat(), lambda x: predict(x).flat(), jacobian, start.ravel(),
                        _weights(observed, options), options, curve)
    return _result(Scheme.omega, lm, curve, model=model_at(lm.x),
                   amplitudes=lm.x.reshape(len(tones), n))


def _decay_start(observed: ObservableSet) -> np.ndarray:
    """Per-ion g from a log-linear fit of -log m = g^2 t^2"""
    t2 = observed.times ** 2
    decay = -np.log(np.clip(observed.mag, DECAY_FLOOR, 1.0))
    weight = float(t2 @ t2)
    if weight == 0.0:
        return np.zeros(observed.n)
    return np.sqrt(np.maximum((t2 @ decay) / weight, 0.0))


def fit_decoherence(observed: ObservableSet, options: FitOptions | None = None) -> FitResult:
    """Fit gamma_ind and gamma_cor per ion on far-detuned data where J = 0.

    Magnetizations fix gamma_ind^2 + gamma_cor^2; the pair envelopes split the
    two through (gamma_cor,i +/- gamma_cor,j)^2. Only the overall sign of the
    correlated rates is free: it is fixed so the largest one is positive, and
    entries still negative after that are clipped to zero with a warning.
    """
    options = options or FitOptions()
    if observed.times.size < 3:
        raise InputValidationError("Decoherence fit needs at least 3 time points")
    n, steps = observed.n, observed.times.size
    rows, cols = np.triu_indices(n, 1)
    t2 = (observed.times ** 2)[:, None]

    def split_rates(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return x[:n], x[n:]

    def predict(x: np.ndarray) -> PredictedObservables:
        independent, correlated = split_rates(x)
        mag, plus, minus = envelopes(correlated, independent, observed.times)
        return PredictedObservables(times=observed.times, mag=mag, corr=0.5 * (plus + minus))

    def jacobian(x: np.ndarray) -> np.ndarray:
        a, b = split_rates(x)
        mag, plus, minus = envelopes(b, a, observed.times)
        jac = np.zeros((steps, n + rows.size, 2 * n))
        ions, packed = np.arange(n), n + np.arange(rows.size)
        jac[:, ions, ions] = -2.0 * a[None] * t2 * mag
        jac[:, ions, n + ions] = -2.0 * b[None] * t2 * mag
        both = plus + minus
        jac[:, packed, rows] = -a[rows][None] * t2 * both
        jac[:, packed, cols] = -a[cols][None] * t2 * both
        summed, diff = (b[rows] + b[cols])[None], (b[rows] - b[cols])[None]
        jac[:, packed, n + rows] = -t2 * (summed * plus + diff * minus)
        jac[:, packed, n + cols] = -t2 * (summed * plus - diff * minus)
        return jac.reshape(steps * (n + rows.size), 2 * n)

    g = _decay_start(observed)
    start = np.concatenate([g, g]) / np.sqrt(2.0)
    curve = _LearningCurve(predict, observed, None)
    lm = _least_squares(observed.flat(), lambda x: predict(x).flat(), jacobian, start,
                        _weights(observed, options), options, curve)
    independent, correlated = split_rates(lm.x)
    independent, correlated = np.abs(independent), canonical_sign(correlated)
    if np.any(correlated < 0.0):
        logger.warning("correlated rates of mixed sign %s; negative entries clipped to 0",
                       np.round(correlated, 4).tolist())
        correlated = np.maximum(correlated, 0.0)
    fitted = DecoherenceModel(gamma_cor=correlated, gamma_ind=independent)
    return _result(Scheme.decoherence, lm, curve, x=np.concatenate([independent, correlated]),
                   decoherence=fitted)


def fit_fields(observed: ObservableSet, model: IsingModel, dec: DecoherenceModel | None = None,
               options: FitOptions | None = None, test: ObservableSet | None = None
               ) -> FitResult:
    """Fit |h_i| on echo-off data with the couplings fixed.

    Each ion starts from a grid scan of its magnetization over [0, pi / (2 dt)],
    the range the time step resolves. Magnitudes are returned with the
    convention h_i >= 0.
    """
    options = options or FitOptions()
    if observed.echo:
        raise InputValidationError("Field fitting needs data taken without the spin echo")
    if model.n != observed.n:
        raise DimensionMismatchError(f"Model has {model.n} ions, data has {observed.n}")
    n, times = model.n, observed.times
    steps = times.size
    rows, cols = np.triu_indices(n, 1)
    flags = SequenceFlags(echo=False, include_decoherence=dec is not None)
    gamma_cor, gamma_ind = _rates(dec, n)
    base = observable_terms(model.couplings, np.zeros(n), gamma_cor, gamma_ind, times, flags)
    mag_base = base.mag_envelope * base.mag_product
    plus_base = base.plus_envelope * base.plus_product
    minus_base = base.minus_envelope * base.minus_product

    def predict(h: np.ndarray) -> PredictedObservables:
        mag_f, plus_f, minus_f = field_factors(h, times)
        return PredictedObservables(times=times, mag=mag_f * mag_base,
                                    corr=0.5 * (plus_f * plus_base + minus_f * minus_base),
                                    echo=False)

    def jacobian(h: np.ndarray) -> np.ndarray:
        scale = 2.0 * times[:, None]
        jac = np.zeros((steps, n + rows.size, n))
        ions, packed = np.arange(n), n + np.arange(rows.size)
        jac[:, ions, ions] = -scale * np.sin(scale * h[None]) * mag_base
        d_plus = -scale * np.sin(scale * (h[rows] + h[cols])[None]) * plus_base
        d_minus = -scale * np.sin(scale * (h[rows] - h[cols])[None]) * minus_base
        jac[:, packed, rows] = 0.5 * (d_plus + d_minus)
        jac[:, packed, cols] = 0.5 * (d_plus - d_minus)
        return jac.reshape(steps * (n + rows.size), n)

    positive = np.diff(times)
    step = positive[positive > 0].min() if np.any(positive > 0) else 1.0
    grid = np.linspace(0.0, np.pi / (2.0 * step), FIELD_GRID)
    # (grid, time, ion) scan of the magnetizations alone
    scan = np.cos(2.0 * grid[:, None, None] * times[None, :, None]) * mag_base[None]
    start = grid[np.argmin(np.sum((scan - observed.mag[None]) ** 2, axis=1), axis=0)]

    curve = _LearningCurve(predict, observed, test)
    lm = _least_squares(observed.flat(), lambda h: predict(h).flat(), jacobian, start,
                        _weights(observed, options), options, curve)
    magnitudes = np.abs(lm.x)
    return _result(Scheme.fields, lm, curve, fields=magnitudes,
                   model=model.with_fields(magnitudes))
