"""Levenberg-Marquardt driver shared by the observable fits and the trap-potential stages"""
import logging
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, sparse

from isinglearn.errors import FitFailureError
from isinglearn.models.results import FitOptions

logger = logging.getLogger(__name__)

ResidualFn = Callable[[np.ndarray], np.ndarray]
JacobianFn = Callable[[np.ndarray], "np.ndarray | sparse.spmatrix"]
Callback = Callable[[np.ndarray, float], None]

EXACT_RSS = 1e-28
MAX_DAMPING = 1e16
MIN_DAMPING = 1e-15
DIAGONAL_FLOOR = 1e-12


@dataclass
class LMResult:
    """Outcome of a damped Gauss-Newton run"""
    x: np.ndarray
    rss: float
    iterations: int
    converged: bool
    message: str
    trace: list[float] = field(default_factory=list)
    normal: np.ndarray | None = None
    residual_count: int = 0

    def standard_errors(self) -> np.ndarray:
        """sqrt(diag(s^2 (J^T J)^+)) with s^2 = RSS / (m - p); NaN without spare residuals"""
        dof = self.residual_count - self.x.size
        if self.normal is None or dof <= 0:
            return np.full(self.x.size, np.nan)
        covariance = np.linalg.pinv(self.normal) * (self.rss / dof)
        return np.sqrt(np.abs(np.diag(covariance)))


def _normal_equations(jac: "np.ndarray | sparse.spmatrix", residual: np.ndarray
                      ) -> tuple[np.ndarray, np.ndarray]:
    if sparse.issparse(jac):
        jtj = (jac.T @ jac).toarray()
    else:
        jtj = jac.T @ jac
    grad = np.asarray(jac.T @ residual).ravel()
    if not (np.all(np.isfinite(jtj)) and np.all(np.isfinite(grad))):
        raise FitFailureError("Jacobian contains non-finite entries")
    return np.asarray(jtj), grad


def _project(x: np.ndarray, bounds: tuple[np.ndarray, np.ndarray] | None) -> np.ndarray:
    if bounds is None:
        return x
    return np.clip(x, bounds[0], bounds[1])


def _cost(residual: np.ndarray) -> float:
    if not np.all(np.isfinite(residual)):
        return np.inf
    return float(residual @ residual)


def levenberg_marquardt(residual_fn: ResidualFn, jacobian_fn: JacobianFn, x0: np.ndarray,
                        options: FitOptions,
                        bounds: tuple[np.ndarray, np.ndarray] | None = None,
                        callback: Callback | None = None) -> LMResult:
    """Minimize ||r(x)||^2 with Marquardt-scaled damping.

    Each trial step solves (J^T J + lambda diag(J^T J)) dx = -J^T r. Steps that
    do not increase the RSS are accepted and divide lambda by
    ``damping_down``; others multiply it by ``damping_up``. Bounds are applied
    by projecting the trial point. ``callback`` sees the initial point and
    every accepted point.
    """
    x = _project(np.array(x0, dtype=float), bounds)
    residual = residual_fn(x)
    cost = _cost(residual)
    if not np.isfinite(cost):
        raise FitFailureError("Residuals are not finite at the starting point")
    trace = [cost]
    if callback is not None:
        callback(x, cost)

    damping = options.damping
    iterations = 0
    converged, message = False, "iteration limit reached"
    jtj = grad = scale = None
    stale = True
    while iterations < options.max_iters:
        if cost <= EXACT_RSS:
            converged, message = True, "residuals vanish"
            break
        if stale:
            jtj, grad = _normal_equations(jacobian_fn(x), residual)
            diagonal = np.diag(jtj)
            if diagonal.max(initial=0.0) <= 0.0:
                message = "zero Jacobian: no descent direction"
                break
            scale = np.maximum(diagonal, DIAGONAL_FLOOR * diagonal.max())
            stale = False

        iterations += 1
        try:
            factor = linalg.cho_factor(jtj + damping * np.diag(scale))
            step = -linalg.cho_solve(factor, grad)
        except linalg.LinAlgError:
            logger.warning("damped normal equations singular at damping %.1e, increasing", damping)
            damping *= options.damping_up
            if damping > MAX_DAMPING:
                message = "damped normal equations stay singular"
                break
            continue

        candidate = _project(x + step, bounds)
        trial = residual_fn(candidate)
        trial_cost = _cost(trial)
        if trial_cost <= cost:
            change = (cost - trial_cost) / cost
            x, residual, cost = candidate, trial, trial_cost
            trace.append(cost)
            damping = max(damping / options.damping_down, MIN_DAMPING)
            stale = True
            if callback is not None:
                callback(x, cost)
            logger.debug("iteration %d: rss %.6e, damping %.1e", iterations, cost, damping)
            if change < options.tol:
                converged, message = True, "relative RSS change below tolerance"
                break
        else:
            damping *= options.damping_up
            if damping > MAX_DAMPING:
                converged, message = True, "no decrease at maximal damping"
                break

    if stale and message != "zero Jacobian: no descent direction":
        jtj, _ = _normal_equations(jacobian_fn(x), residual)
    logger.info("least squares stopped after %d iterations: %s (rss %.6e)",
                iterations, message, cost)
    return LMResult(
        x=x,
        rss=cost,
        iterations=iterations,
        converged=converged,
        message=message,
        trace=trace,
        normal=jtj,
        residual_count=residual.size,
    )


def finite_difference_jacobian(residual_fn: ResidualFn, x: np.ndarray, step: float = 1e-6,
                               central: bool = True) -> np.ndarray:
    """Dense Jacobian of ``residual_fn`` by finite differences with relative steps"""
    x = np.asarray(x, dtype=float)
    base = None if central else residual_fn(x)
    columns = []
    for k in range(x.size):
        offset = np.zeros_like(x)
        offset[k] = step * max(1.0, abs(x[k]))
        if central:
            columns.append((residual_fn(x + offset) - residual_fn(x - offset)) / (2 * offset[k]))
        else:
            columns.append((residual_fn(x + offset) - base) / offset[k])
    return np.column_stack(columns)
