import numpy as np
import pytest
from scipy import optimize

from ..core.phonon import (
    apply_wavefront,
    check_bounded,
    coupling_matrix,
    equilibrium,
    fit_gaussian_profile,
    fit_potential_staged,
    gaussian_amplitudes,
    length_scale,
    potential_energy,
    potential_gradient,
    sideband_pattern,
    tone_kernels,
    transverse_hessian,
    transverse_modes,
)
from ..errors import (
    DimensionMismatchError,
    IndexOutOfRangeError,
    InputValidationError,
    ResonanceError,
    UnstableCrystalError,
)
from ..models.crystal import (
    GaussianProfile,
    LaserProfile,
    PotentialMeasurement,
    ToneSpec,
    TrapPotential,
)

OMEGA_REF = 2 * np.pi * 0.3


def _trap(wx: float, wy: float, wz: float, **terms: float) -> TrapPotential:
    cubic = {k: v for k, v in terms.items() if k in ("x3", "x2z", "xz2", "z3", "xy2", "zy2")}
    quartic = {k: v for k, v in terms.items() if k not in cubic}
    return TrapPotential(omega_ref=OMEGA_REF, harmonic=(wx * OMEGA_REF, wy * OMEGA_REF,
                                                        wz * OMEGA_REF),
                         cubic=cubic, quartic=quartic)


def _start(n: int, zigzag: float = 0.0) -> np.ndarray:
    z = np.linspace(-0.4 * n, 0.4 * n, n)
    x = zigzag * (-1.0) ** np.arange(n)
    return np.column_stack([x, z])


def _energy_3d(potential: TrapPotential, positions: np.ndarray, y: np.ndarray) -> float:
    """Trap plus Coulomb energy with transverse displacements y"""
    x, z = positions[:, 0], positions[:, 1]
    kx, ky, kz = potential.stiffness
    c, q = potential.cubic, potential.quartic
    trap = (0.5 * kx * x ** 2 + 0.5 * ky * y ** 2 + 0.5 * kz * z ** 2
            + c["x3"] * x ** 3 + c["x2z"] * x ** 2 * z + c["xz2"] * x * z ** 2 + c["z3"] * z ** 3
            + c["xy2"] * x * y ** 2 + c["zy2"] * z * y ** 2
            + q["y2z2"] * y ** 2 * z ** 2 + q["y2x2"] * y ** 2 * x ** 2
            + q["x2z2"] * x ** 2 * z ** 2 + q["z4"] * z ** 4)
    coulomb = 0.0
    for i in range(x.size):
        for j in range(i + 1, x.size):
            coulomb += 1.0 / np.sqrt((x[i] - x[j]) ** 2 + (y[i] - y[j]) ** 2
                                     + (z[i] - z[j]) ** 2)
    return float(trap.sum() + coulomb)


def test_length_scale_of_ytterbium() -> None:
    assert length_scale(2 * np.pi * 1000.0) == pytest.approx(2.74, rel=0.01), \
        "about 2.7 um at 1 MHz for 171Yb+"


def test_two_ion_crystal() -> None:
    potential = _trap(3.0, 20.0, 1.0)
    positions = equilibrium(potential, 2, np.array([[0.0, -0.5], [0.0, 0.5]]))
    half = 0.25 ** (1.0 / 3.0)
    assert np.allclose(positions, [[0.0, -half], [0.0, half]], atol=1e-9), \
        "z = +/- (1/4)^(1/3) along the weak axis"
    modes = transverse_modes(potential, positions)
    wy, wz = 20.0 * OMEGA_REF, OMEGA_REF
    assert np.allclose(modes.frequencies, [wy, np.sqrt(wy ** 2 - wz ** 2)], rtol=1e-9), \
        "center of mass at w_y, tilt at sqrt(w_y^2 - w_z^2)"
    assert np.allclose(np.abs(modes.vectors), np.sqrt(0.5)), "both ions share both modes"


def test_equilibrium_matches_a_generic_minimizer() -> None:
    potential = _trap(3.0, 20.0, 1.0, x2z=0.01, z4=1e-4)
    init = _start(6) + np.array([0.01, 0.0])
    positions = equilibrium(potential, 6, init)
    assert np.linalg.norm(potential_gradient(potential, positions)) < 1e-9, "force free"

    def energy(v: np.ndarray) -> float:
        return potential_energy(potential, v.reshape(2, 6).T)

    def gradient(v: np.ndarray) -> np.ndarray:
        return potential_gradient(potential, v.reshape(2, 6).T).T.ravel()

    reference = optimize.minimize(energy, init.T.ravel(), jac=gradient, method="BFGS",
                                  options={"gtol": 1e-10, "maxiter": 10_000})
    assert np.allclose(positions, reference.x.reshape(2, 6).T, atol=1e-6), \
        "same minimum as BFGS from the same start"


def test_gradient_matches_finite_differences() -> None:
    potential = _trap(1.3, 8.0, 1.0, x3=0.01, xz2=-0.02, x2z2=0.001)
    positions = _start(5, zigzag=0.3)
    step = 1e-6
    numeric = np.zeros_like(positions)
    for index in np.ndindex(positions.shape):
        offset = np.zeros_like(positions)
        offset[index] = step
        numeric[index] = (potential_energy(potential, positions + offset)
                          - potential_energy(potential, positions - offset)) / (2 * step)
    assert np.allclose(potential_gradient(potential, positions), numeric, atol=1e-6), \
        "analytic in-plane gradient"


def test_transverse_hessian_matches_finite_differences() -> None:
    potential = _trap(1.3, 8.0, 1.0, xy2=0.02, zy2=-0.01, y2z2=0.001, y2x2=0.002)
    positions = equilibrium(potential, 5, _start(5, zigzag=0.3))
    n, step = 5, 1e-3
    numeric = np.zeros((n, n))
    for i in range(n):
        for j in range(n):
            total = 0.0
            for si, sj, sign in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
                y = np.zeros(n)
                y[i] += si * step
                y[j] += sj * step
                total += sign * _energy_3d(potential, positions, y)
            numeric[i, j] = total / (4 * step ** 2)
    analytic = transverse_hessian(potential, positions)
    assert np.allclose(analytic, numeric, rtol=1e-5, atol=1e-5), \
        "d^2 U / dy_i dy_j from the three-dimensional energy"


def test_mode_validation() -> None:
    potential = _trap(3.0, 20.0, 1.0)
    with pytest.raises(InputValidationError):
        transverse_modes(potential, _start(3))
    with pytest.raises(InputValidationError):
        equilibrium(potential, 2, np.zeros((2, 2)))
    with pytest.raises(DimensionMismatchError):
        equilibrium(potential, 3, np.zeros((2, 2)))
    soft = _trap(3.0, 0.5, 1.0)
    positions = equilibrium(soft, 2, np.array([[0.0, -0.5], [0.0, 0.5]]))
    with pytest.raises(UnstableCrystalError):
        transverse_modes(soft, positions)


def test_sideband_pattern_is_normalized() -> None:
    potential = _trap(3.0, 20.0, 1.0)
    modes = transverse_modes(potential, equilibrium(potential, 4, _start(4)))
    pattern = sideband_pattern(modes, 0)
    assert pattern.sum() == pytest.approx(1.0), "weights sum to one"
    assert np.allclose(pattern, 0.25), "center-of-mass mode drives every ion equally"
    with pytest.raises(IndexOutOfRangeError):
        sideband_pattern(modes, 4)


def test_tone_kernels_match_mode_sum() -> None:
    potential = _trap(3.0, 20.0, 1.0)
    modes = transverse_modes(potential, equilibrium(potential, 4, _start(4)))
    tone = ToneSpec(detuning=modes.frequencies[0] + 2 * np.pi * 0.05, eta_ref=0.08,
                    omega_ref=modes.frequencies[0])
    kernel = tone_kernels(modes, [tone])[0]
    eta = 0.08 * np.sqrt(modes.frequencies[0] / modes.frequencies)
    for i in range(4):
        for j in range(4):
            expected = 0.0 if i == j else sum(
                eta[k] ** 2 * modes.vectors[i, k] * modes.vectors[j, k]
                / (8 * (tone.detuning - modes.frequencies[k])) for k in range(4))
            assert kernel[i, j] == pytest.approx(expected, rel=1e-12, abs=1e-15), \
                f"kernel entry ({i}, {j})"

    laser = LaserProfile(amplitudes=np.full(4, 10.0))
    model = coupling_matrix(modes, [tone], laser)
    assert np.allclose(model.couplings, 100.0 * kernel), "J = Omega_i Omega_j G_ij"
    resonant = ToneSpec(detuning=modes.frequencies[2], eta_ref=0.08,
                        omega_ref=modes.frequencies[0])
    with pytest.raises(ResonanceError):
        tone_kernels(modes, [resonant])
    with pytest.raises(DimensionMismatchError):
        coupling_matrix(modes, [tone], LaserProfile(amplitudes=np.ones(3)))


def test_tones_and_wavefront_combine() -> None:
    potential = _trap(3.0, 20.0, 1.0)
    modes = transverse_modes(potential, equilibrium(potential, 3, _start(3)))
    tones = [ToneSpec(detuning=modes.frequencies[0] + shift, omega_ref=modes.frequencies[0])
             for shift in (0.3, 0.6)]
    amplitudes = np.array([[5.0, 6.0, 7.0], [1.0, 2.0, 3.0]])
    kernels = tone_kernels(modes, tones)
    combined = coupling_matrix(modes, tones, LaserProfile(amplitudes=amplitudes))
    expected = sum(np.outer(a, a) * g for a, g in zip(amplitudes, kernels, strict=True))
    assert np.allclose(combined.couplings, expected), "tones add up"

    phases = np.array([0.0, np.pi / 2, 0.0])
    tilted = coupling_matrix(modes, tones, LaserProfile(amplitudes=amplitudes, phases=phases))
    assert np.allclose(tilted.couplings, apply_wavefront(expected, phases)), \
        "wavefront phases scale J_ij by cos(phi_i - phi_j)"
    assert abs(tilted.couplings[0, 1]) < 1e-12, "a quarter-wave offset cancels the coupling"
    assert tilted.couplings[0, 2] == pytest.approx(expected[0, 2]), "equal phases keep it"
    with pytest.raises(DimensionMismatchError):
        apply_wavefront(expected, np.zeros(2))


def test_gaussian_profile_round_trip(rng: np.random.Generator) -> None:
    profile = GaussianProfile(peak=12.0, center_x=1.5, center_z=-2.0, fwhm_x=20.0, fwhm_z=60.0)
    at_half = gaussian_amplitudes(profile, np.array([[1.5, -2.0], [11.5, -2.0], [1.5, 28.0]]))
    assert np.allclose(at_half, [12.0, 6.0, 6.0]), "peak at the center, half at fwhm / 2"
    positions = np.column_stack([rng.uniform(-8, 8, 12), np.linspace(-40, 40, 12)])
    fitted = fit_gaussian_profile(positions, gaussian_amplitudes(profile, positions))
    assert fitted.peak == pytest.approx(12.0, rel=1e-6)
    assert fitted.center_z == pytest.approx(-2.0, abs=1e-5)
    assert fitted.fwhm_z == pytest.approx(60.0, rel=1e-6)


def test_unbounded_potential_is_rejected() -> None:
    potential = _trap(3.0, 20.0, 1.0, z4=-0.5)
    with pytest.raises(UnstableCrystalError):
        check_bounded(potential, _start(4))
    check_bounded(_trap(3.0, 20.0, 1.0), _start(4))


def _measurement(truth: TrapPotential, n: int, zigzag: float) -> PotentialMeasurement:
    positions = equilibrium(truth, n, _start(n, zigzag))
    modes = transverse_modes(truth, positions)
    indices = list(range(n))
    return PotentialMeasurement(positions=positions, mode_indices=indices,
                                frequencies=modes.frequencies[indices],
                                length_scale_um=length_scale(OMEGA_REF))


def test_staged_fit_recovers_stiffness() -> None:
    truth = _trap(1.3, 8.0, 1.0)
    measurement = _measurement(truth, 6, zigzag=0.3)
    initial = _trap(1.3 * 1.02, 8.0, 0.98)
    fit = fit_potential_staged(measurement, initial)
    assert [s.name for s in fit.stages][0] == "initial quadratics"
    assert len(fit.stages) == 5, "five stages per pass"
    assert fit.stages[-1].skipped and fit.y_cubics_flagged, "no patterns, no y cubics"
    assert fit.potential.harmonic[0] == pytest.approx(1.3 * OMEGA_REF, rel=1e-3)
    assert fit.potential.harmonic[2] == pytest.approx(OMEGA_REF, rel=1e-3)
    assert fit.potential.harmonic[1] == 8.0 * OMEGA_REF, "w_y is never fitted"
    with pytest.raises(InputValidationError):
        fit_potential_staged(measurement, initial, passes=0)


@pytest.mark.slow
def test_staged_fit_of_a_large_crystal_with_anharmonic_terms() -> None:
    truth = _trap(3.0, 20.0, 1.0, x2z=1e-3, z4=1e-4)
    measurement = _measurement(truth, 30, zigzag=0.2)
    fit = fit_potential_staged(measurement, _trap(3.0 * 1.01, 20.0, 0.99), passes=3)
    assert len(fit.stages) == 15, "three passes of five stages"
    assert fit.stages[-2].rss < 1e-3, "the quartic stage reproduces the calibration"
