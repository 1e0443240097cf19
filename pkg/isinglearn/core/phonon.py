"""Crystal mechanics and the phonon-mediated couplings.

Positions are (n, 2) arrays of in-plane (x, z) coordinates in scaled units
(see ``isinglearn.models.crystal``); optimizer vectors stack all x then all
z. Every potential term is even in y or vanishes at y = 0, so the
equilibrium lies in the plane and the transverse block of the Hessian
decouples from the in-plane one.
"""
import logging

import numpy as np
from scipy import constants, optimize

from isinglearn.core.lm import finite_difference_jacobian, levenberg_marquardt
from isinglearn.errors import (
    DimensionMismatchError,
    EquilibriumError,
    IndexOutOfRangeError,
    InputValidationError,
    NumericalError,
    ResonanceError,
    UnstableCrystalError,
)
from isinglearn.models.crystal import (
    QUARTIC_TERMS,
    STIFFNESS_TERMS,
    GaussianProfile,
    LaserProfile,
    ModeSet,
    PotentialMeasurement,
    StagedFit,
    StageReport,
    ToneSpec,
    TrapPotential,
)
from isinglearn.models.hamiltonian import IsingModel
from isinglearn.models.results import FitOptions

logger = logging.getLogger(__name__)

DEFAULT_MASS_AMU = 171.0
GRADIENT_TOL = 1e-10
EQUILIBRIUM_CHECK = 1e-6
COLLISION_DISTANCE = 1e-3
RESONANCE_GAP = 1e-12
MAX_POLISH = 50
FWHM_FACTOR = 4.0 * np.log(2.0)

STAGES = (
    ("initial quadratics", STIFFNESS_TERMS, ("positions", "frequencies")),
    ("cubics within xz plane", (*STIFFNESS_TERMS, "x3", "x2z", "xz2", "z3"), ("positions",)),
    ("refine quadratics", STIFFNESS_TERMS, ("positions", "frequencies")),
    ("symmetric quartics", (*STIFFNESS_TERMS, *QUARTIC_TERMS), ("positions", "frequencies")),
    ("cubics along y", ("xy2", "zy2"), ("patterns",)),
)


def length_scale(omega_ref: float, mass_amu: float = DEFAULT_MASS_AMU) -> float:
    """Scaled length unit in microns for a reference frequency in rad/ms"""
    omega = omega_ref * 1e3
    mass = mass_amu * constants.atomic_mass
    cube = constants.e ** 2 / (4.0 * np.pi * constants.epsilon_0 * mass * omega ** 2)
    return float(np.cbrt(cube) * 1e6)


def positions_to_scaled(positions_um: np.ndarray, omega_ref: float,
                        mass_amu: float = DEFAULT_MASS_AMU) -> np.ndarray:
    return np.asarray(positions_um, dtype=float) / length_scale(omega_ref, mass_amu)


def positions_to_microns(positions: np.ndarray, omega_ref: float,
                         mass_amu: float = DEFAULT_MASS_AMU) -> np.ndarray:
    return np.asarray(positions, dtype=float) * length_scale(omega_ref, mass_amu)


def _separations(x: np.ndarray, z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    dx = x[:, None] - x[None, :]
    dz = z[:, None] - z[None, :]
    r = np.hypot(dx, dz)
    np.fill_diagonal(r, np.inf)
    return dx, dz, r


def _split(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    n = v.size // 2
    return v[:n], v[n:]


def _trap_energy(potential: TrapPotential, x: np.ndarray, z: np.ndarray) -> np.ndarray:
    kx, _, kz = potential.stiffness
    c, q = potential.cubic, potential.quartic
    return (0.5 * kx * x ** 2 + 0.5 * kz * z ** 2
            + c["x3"] * x ** 3 + c["x2z"] * x ** 2 * z + c["xz2"] * x * z ** 2 + c["z3"] * z ** 3
            + q["x2z2"] * x ** 2 * z ** 2 + q["z4"] * z ** 4)


def _trap_curvature(potential: TrapPotential, x: np.ndarray, z: np.ndarray
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Second derivatives xx, xz, zz and yy of the trap term at y = 0"""
    kx, ky, kz = potential.stiffness
    c, q = potential.cubic, potential.quartic
    xx = kx + 6 * c["x3"] * x + 2 * c["x2z"] * z + 2 * q["x2z2"] * z ** 2
    xz = 2 * c["x2z"] * x + 2 * c["xz2"] * z + 4 * q["x2z2"] * x * z
    zz = kz + 2 * c["xz2"] * x + 6 * c["z3"] * z + 2 * q["x2z2"] * x ** 2 + 12 * q["z4"] * z ** 2
    yy = (ky + 2 * c["xy2"] * x + 2 * c["zy2"] * z
          + 2 * q["y2z2"] * z ** 2 + 2 * q["y2x2"] * x ** 2)
    return xx, xz, zz, yy


def _energy(v: np.ndarray, potential: TrapPotential) -> float:
    x, z = _split(v)
    _, _, r = _separations(x, z)
    return float(_trap_energy(potential, x, z).sum() + 0.5 * np.sum(1.0 / r))


def _gradient(v: np.ndarray, potential: TrapPotential) -> np.ndarray:
    x, z = _split(v)
    kx, _, kz = potential.stiffness
    c, q = potential.cubic, potential.quartic
    dx, dz, r = _separations(x, z)
    inv3 = r ** -3
    gx = (kx * x + 3 * c["x3"] * x ** 2 + 2 * c["x2z"] * x * z + c["xz2"] * z ** 2
          + 2 * q["x2z2"] * x * z ** 2 - np.sum(dx * inv3, axis=1))
    gz = (kz * z + c["x2z"] * x ** 2 + 2 * c["xz2"] * x * z + 3 * c["z3"] * z ** 2
          + 2 * q["x2z2"] * x ** 2 * z + 4 * q["z4"] * z ** 3 - np.sum(dz * inv3, axis=1))
    return np.concatenate([gx, gz])


def _hessian(v: np.ndarray, potential: TrapPotential) -> np.ndarray:
    x, z = _split(v)
    dx, dz, r = _separations(x, z)
    inv3, inv5 = r ** -3, r ** -5
    blocks = []
    for coupling, trap in zip((inv3 - 3 * dx ** 2 * inv5, -3 * dx * dz * inv5,
                               inv3 - 3 * dz ** 2 * inv5),
                              _trap_curvature(potential, x, z)[:3], strict=True):
        block = coupling.copy()
        np.fill_diagonal(block, trap - coupling.sum(axis=1))
        blocks.append(block)
    xx, xz, zz = blocks
    return np.block([[xx, xz], [xz, zz]])


def potential_energy(potential: TrapPotential, positions: np.ndarray) -> float:
    """Total trap plus Coulomb energy of an in-plane configuration"""
    positions = np.asarray(positions, dtype=float)
    return _energy(positions.T.ravel(), potential)


def potential_gradient(potential: TrapPotential, positions: np.ndarray) -> np.ndarray:
    """Gradient as an (n, 2) array of (d/dx, d/dz)"""
    positions = np.asarray(positions, dtype=float)
    return _gradient(positions.T.ravel(), potential).reshape(2, -1).T


def _min_separation(positions: np.ndarray) -> float:
    if positions.shape[0] < 2:
        return np.inf
    _, _, r = _separations(positions[:, 0], positions[:, 1])
    return float(r.min())


def equilibrium(potential: TrapPotential, n: int, init_positions: np.ndarray) -> np.ndarray:
    """Equilibrium (x, z) positions reached from the supplied starting configuration.

    A trust-region Newton search is polished with plain Newton steps until
    the gradient norm drops below 1e-10.
    """
    init = np.asarray(init_positions, dtype=float)
    if n < 1 or init.shape != (n, 2):
        raise DimensionMismatchError(f"Initial positions must have shape ({n}, 2)")
    if _min_separation(init) <= 0.0:
        raise InputValidationError("Initial positions must be distinct")

    result = optimize.minimize(_energy, init.T.ravel(), args=(potential,), jac=_gradient,
                               hess=_hessian, method="trust-exact",
                               options={"gtol": GRADIENT_TOL, "maxiter": 1000})
    v = result.x
    norm = float(np.linalg.norm(_gradient(v, potential)))
    for _ in range(MAX_POLISH):
        if norm < GRADIENT_TOL:
            break
        try:
            candidate = v - np.linalg.solve(_hessian(v, potential), _gradient(v, potential))
        except np.linalg.LinAlgError:
            break
        candidate_norm = float(np.linalg.norm(_gradient(candidate, potential)))
        if not candidate_norm < norm:
            break
        v, norm = candidate, candidate_norm
    if norm >= GRADIENT_TOL:
        raise EquilibriumError(f"Equilibrium search stalled at gradient norm {norm:.2e}")

    positions = v.reshape(2, n).T
    if _min_separation(positions) < COLLISION_DISTANCE:
        raise EquilibriumError("Ions collided during the equilibrium search")
    return positions


def transverse_hessian(potential: TrapPotential, positions: np.ndarray) -> np.ndarray:
    """d^2 U / dy_i dy_j at y = 0"""
    positions = np.asarray(positions, dtype=float)
    x, z = positions[:, 0], positions[:, 1]
    _, _, r = _separations(x, z)
    inv3 = r ** -3
    hessian = inv3.copy()
    np.fill_diagonal(hessian, _trap_curvature(potential, x, z)[3] - inv3.sum(axis=1))
    return hessian


def transverse_modes(potential: TrapPotential, positions: np.ndarray) -> ModeSet:
    """Drumhead modes at an equilibrium, highest frequency first"""
    positions = np.asarray(positions, dtype=float)
    residual = float(np.linalg.norm(potential_gradient(potential, positions)))
    if residual > EQUILIBRIUM_CHECK:
        raise InputValidationError(
            f"Positions are not an equilibrium (gradient norm {residual:.2e})"
        )
    values, vectors = np.linalg.eigh(transverse_hessian(potential, positions))
    if values.min() <= 0.0:
        raise UnstableCrystalError(
            f"Transverse mode with non-positive curvature {values.min():.3e}"
        )
    order = np.argsort(values)[::-1]
    values, vectors = values[order], vectors[:, order]
    # sign convention: largest entry of each mode is positive
    pivots = vectors[np.argmax(np.abs(vectors), axis=0), np.arange(vectors.shape[1])]
    vectors = vectors * np.where(pivots < 0.0, -1.0, 1.0)[None, :]
    return ModeSet(frequencies=potential.omega_ref * np.sqrt(values), vectors=vectors)


def sideband_pattern(modes: ModeSet, k: int) -> np.ndarray:
    """Sideband excitation weights b_ik^2 of mode k, normalized to sum to one"""
    if not 0 <= k < modes.n:
        raise IndexOutOfRangeError(f"Mode index {k} outside [0, {modes.n})")
    weights = modes.vectors[:, k] ** 2
    return weights / weights.sum()


def tone_kernels(modes: ModeSet, tones: list[ToneSpec]) -> np.ndarray:
    """G^t_ij = sum_k eta_k^2 b_ik b_jk / (8 (mu_t - w_k)) per tone, zero diagonal"""
    kernels = np.empty((len(tones), modes.n, modes.n))
    for index, tone in enumerate(tones):
        gap = tone.detuning - modes.frequencies
        resonant = np.abs(gap) <= RESONANCE_GAP * max(1.0, abs(tone.detuning))
        if resonant.any():
            raise ResonanceError(
                f"Tone at {tone.detuning} rad/ms sits on mode {int(np.argmax(resonant))}"
            )
        weights = tone.lamb_dicke(modes.frequencies) ** 2 / (8.0 * gap)
        kernel = (modes.vectors * weights[None, :]) @ modes.vectors.T
        np.fill_diagonal(kernel, 0.0)
        kernels[index] = 0.5 * (kernel + kernel.T)
    return kernels


def couplings_from_amplitudes(kernels: np.ndarray, amplitudes: np.ndarray) -> np.ndarray:
    """J_ij = sum_t Omega^t_i Omega^t_j G^t_ij"""
    return np.einsum("ti,tij,tj->ij", amplitudes, kernels, amplitudes)


def apply_wavefront(couplings: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """J_ij cos(phi_i - phi_j) for a laser wavefront tilted against the crystal"""
    couplings = np.asarray(couplings, dtype=float)
    phases = np.asarray(phases, dtype=float)
    if phases.shape != (couplings.shape[0],):
        raise DimensionMismatchError(f"Need {couplings.shape[0]} phases, got {phases.shape}")
    return couplings * np.cos(phases[:, None] - phases[None, :])


def coupling_matrix(modes: ModeSet, tones: list[ToneSpec], laser: LaserProfile) -> IsingModel:
    """Ising couplings mediated by the transverse modes, summed over tones"""
    if laser.n != modes.n:
        raise DimensionMismatchError(f"Laser covers {laser.n} ions, modes cover {modes.n}")
    try:
        amplitudes = laser.per_tone(len(tones))
    except ValueError as error:
        raise DimensionMismatchError(str(error)) from error
    couplings = couplings_from_amplitudes(tone_kernels(modes, tones), amplitudes)
    if laser.phases is not None:
        couplings = apply_wavefront(couplings, laser.phases)
    return IsingModel(couplings=couplings)


def gaussian_amplitudes(profile: GaussianProfile, positions_um: np.ndarray) -> np.ndarray:
    """Omega_i of a Gaussian beam at the given (x, z) positions in microns"""
    positions_um = np.asarray(positions_um, dtype=float)
    return _gaussian(positions_um.T, profile.peak, profile.center_x, profile.center_z,
                     profile.fwhm_x, profile.fwhm_z)


def _gaussian(xz: np.ndarray, peak: float, center_x: float, center_z: float, fwhm_x: float,
              fwhm_z: float) -> np.ndarray:
    x, z = xz
    return peak * np.exp(-FWHM_FACTOR * (((x - center_x) / fwhm_x) ** 2
                                         + ((z - center_z) / fwhm_z) ** 2))


def fit_gaussian_profile(positions_um: np.ndarray, amplitudes: np.ndarray,
                         initial: GaussianProfile | None = None) -> GaussianProfile:
    """Least-squares Gaussian profile through calibrated per-ion amplitudes"""
    positions_um = np.asarray(positions_um, dtype=float)
    amplitudes = np.asarray(amplitudes, dtype=float)
    if positions_um.shape != (amplitudes.size, 2):
        raise DimensionMismatchError("Need one (x, z) position per amplitude")
    if initial is None:
        weights = amplitudes / amplitudes.sum()
        spread = np.ptp(positions_um, axis=0) + 1.0
        initial = GaussianProfile(peak=float(amplitudes.max()),
                                  center_x=float(weights @ positions_um[:, 0]),
                                  center_z=float(weights @ positions_um[:, 1]),
                                  fwhm_x=float(spread[0]), fwhm_z=float(spread[1]))
    p0 = [initial.peak, initial.center_x, initial.center_z, initial.fwhm_x, initial.fwhm_z]
    try:
        params, _ = optimize.curve_fit(_gaussian, positions_um.T, amplitudes, p0=p0,
                                       maxfev=20000)
    except RuntimeError as error:
        raise NumericalError(f"Gaussian profile fit failed: {error}") from error
    peak, center_x, center_z, fwhm_x, fwhm_z = params
    return GaussianProfile(peak=abs(peak), center_x=center_x, center_z=center_z,
                           fwhm_x=abs(fwhm_x), fwhm_z=abs(fwhm_z))


def check_bounded(potential: TrapPotential, positions: np.ndarray, margin: float = 0.5,
                  grid: int = 41) -> None:
    """Require a locally convex trap over a box around the crystal"""
    positions = np.asarray(positions, dtype=float)
    low, high = positions.min(axis=0), positions.max(axis=0)
    pad = margin * np.maximum(high - low, 1.0)
    x, z = np.meshgrid(np.linspace(low[0] - pad[0], high[0] + pad[0], grid),
                       np.linspace(low[1] - pad[1], high[1] + pad[1], grid))
    xx, xz, zz, yy = _trap_curvature(potential, x.ravel(), z.ravel())
    if np.any(xx <= 0.0) or np.any(xx * zz - xz ** 2 <= 0.0) or np.any(yy <= 0.0):
        raise UnstableCrystalError("Trap potential is not confining over the crystal extent")


def _objective_size(measurement: PotentialMeasurement, objectives: tuple[str, ...]) -> int:
    size = 0
    if "positions" in objectives:
        size += 2 * measurement.n
    if "frequencies" in objectives:
        size += len(measurement.mode_indices)
    if "patterns" in objectives:
        size += len(measurement.pattern_modes) * measurement.n
    return size


def stage_residuals(potential: TrapPotential, measurement: PotentialMeasurement,
                    objectives: tuple[str, ...]) -> np.ndarray:
    """Scaled residuals of the forward model against the calibration data"""
    positions = equilibrium(potential, measurement.n, measurement.positions)
    parts = []
    if "positions" in objectives:
        offset = (positions - measurement.positions).ravel()
        parts.append(offset * measurement.length_scale_um / measurement.position_scale_um)
    if "frequencies" in objectives or "patterns" in objectives:
        modes = transverse_modes(potential, positions)
        if "frequencies" in objectives:
            predicted = modes.frequencies[measurement.mode_indices]
            parts.append((predicted - measurement.frequencies) / measurement.frequency_scale)
        if "patterns" in objectives:
            parts.extend(sideband_pattern(modes, k) - row
                         for k, row in zip(measurement.pattern_modes, measurement.patterns,
                                           strict=True))
    return np.concatenate(parts)


def _fit_stage(potential: TrapPotential, name: str, terms: tuple[str, ...],
               objectives: tuple[str, ...], measurement: PotentialMeasurement,
               options: FitOptions) -> tuple[TrapPotential, StageReport]:
    size = _objective_size(measurement, objectives)

    def residual(x: np.ndarray) -> np.ndarray:
        try:
            return stage_residuals(potential.with_terms(dict(zip(terms, x, strict=True))),
                                   measurement, objectives)
        except NumericalError:
            return np.full(size, np.inf)

    def jacobian(x: np.ndarray) -> np.ndarray:
        return finite_difference_jacobian(residual, x)

    lower = np.array([1e-9 if t in STIFFNESS_TERMS else -np.inf for t in terms])
    upper = np.full(len(terms), np.inf)
    x0 = np.array([potential.term(t) for t in terms])
    result = levenberg_marquardt(residual, jacobian, x0, options, bounds=(lower, upper))
    fitted = potential.with_terms(dict(zip(terms, result.x, strict=True)))
    logger.info("stage '%s': rss %.3e after %d iterations", name, result.rss, result.iterations)
    return fitted, StageReport(name=name, terms=list(terms), rss=result.rss,
                               iterations=result.iterations, converged=result.converged)


def fit_potential_staged(measurement: PotentialMeasurement, initial: TrapPotential,
                         passes: int = 1, options: FitOptions | None = None) -> StagedFit:
    """Fit the trap potential in five stages, each over its own terms and objectives.

    w_y stays at its value in ``initial``. Later passes restart the sequence
    from the previous result. Without mode patterns the last stage is
    skipped and xy2, zy2 are set to 0 with a flag.
    """
    if passes < 1:
        raise InputValidationError("At least one pass is required")
    options = options or FitOptions(tol=1e-12, max_iters=200)
    potential = initial
    reports: list[StageReport] = []
    flagged = not measurement.pattern_modes
    for _ in range(passes):
        for name, terms, objectives in STAGES:
            if "patterns" in objectives and flagged:
                potential = potential.with_terms({t: 0.0 for t in terms})
                reports.append(StageReport(name=name, terms=list(terms), rss=0.0,
                                           skipped=True))
                logger.warning("stage '%s' skipped: no mode patterns supplied", name)
                continue
            potential, report = _fit_stage(potential, name, terms, objectives, measurement,
                                           options)
            reports.append(report)
    check_bounded(potential, equilibrium(potential, measurement.n, measurement.positions))
    return StagedFit(potential=potential, stages=reports, y_cubics_flagged=flagged)
