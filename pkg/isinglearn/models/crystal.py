"""Module for the trap potential, phonon modes, laser tones and calibration data.

Mechanics is dimensionless: lengths in units of
l = (q^2 / 4 pi eps0 m omega_ref^2)^(1/3), energies in m omega_ref^2 l^2, so a
harmonic axis with frequency w has stiffness k = (w / omega_ref)^2 and the
Coulomb energy of a pair is 1 / r. The crystal lies in the x-z plane and y is
the transverse (drumhead) axis.
"""
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from isinglearn.models.types import FloatArray

CUBIC_TERMS = ("x3", "x2z", "xz2", "z3", "xy2", "zy2")
QUARTIC_TERMS = ("y2z2", "y2x2", "x2z2", "z4")
STIFFNESS_TERMS = ("kx", "kz")


def _complete(values: dict[str, float], names: tuple[str, ...]) -> dict[str, float]:
    unknown = set(values) - set(names)
    if unknown:
        raise ValueError(f"Unknown terms {sorted(unknown)}; allowed: {', '.join(names)}")
    if not all(np.isfinite(v) for v in values.values()):
        raise ValueError("Potential coefficients must be finite")
    return {name: float(values.get(name, 0.0)) for name in names}


class TrapPotential(BaseModel):
    """Polynomial trap potential up to quartic order, in scaled units"""
    model_config = ConfigDict(frozen=True)

    omega_ref: float = Field(
        description="Frequency setting the length and energy scales, rad/ms",
        examples=[2 * np.pi * 0.3],
        gt=0.0,
    )
    harmonic: tuple[float, float, float] = Field(
        description="Harmonic frequencies (w_x, w_y, w_z), rad/ms",
        examples=[(2 * np.pi * 0.9, 2 * np.pi * 3.0, 2 * np.pi * 0.3)],
    )
    cubic: dict[str, float] = Field(
        description="Coefficients of x3, x2z, xz2, z3, xy2, zy2",
        default_factory=dict,
    )
    quartic: dict[str, float] = Field(
        description="Coefficients of y2z2, y2x2, x2z2, z4",
        default_factory=dict,
    )

    @field_validator("harmonic")
    @classmethod
    def validate_harmonic(cls, v: tuple[float, float, float]) -> tuple[float, float, float]:
        """Harmonic frequencies must be positive"""
        if not all(np.isfinite(w) and w > 0.0 for w in v):
            raise ValueError("Harmonic frequencies must be finite and positive")
        return v

    @field_validator("cubic")
    @classmethod
    def validate_cubic(cls, v: dict[str, float]) -> dict[str, float]:
        """Only the supported cubic terms"""
        return _complete(v, CUBIC_TERMS)

    @field_validator("quartic")
    @classmethod
    def validate_quartic(cls, v: dict[str, float]) -> dict[str, float]:
        """Only the supported quartic terms"""
        return _complete(v, QUARTIC_TERMS)

    @property
    def stiffness(self) -> np.ndarray:
        """(k_x, k_y, k_z) in scaled units"""
        return (np.asarray(self.harmonic) / self.omega_ref) ** 2

    def term(self, name: str) -> float:
        """Any coefficient by name, including the in-plane stiffnesses kx and kz"""
        if name == "kx":
            return float(self.stiffness[0])
        if name == "kz":
            return float(self.stiffness[2])
        if name in self.cubic:
            return self.cubic[name]
        return self.quartic[name]

    def with_terms(self, values: dict[str, float]) -> "TrapPotential":
        """Copy with some coefficients replaced; stiffnesses must stay positive"""
        wx, wy, wz = self.harmonic
        if "kx" in values:
            wx = self.omega_ref * float(np.sqrt(values["kx"]))
        if "kz" in values:
            wz = self.omega_ref * float(np.sqrt(values["kz"]))
        cubic = {**self.cubic, **{k: v for k, v in values.items() if k in CUBIC_TERMS}}
        quartic = {**self.quartic, **{k: v for k, v in values.items() if k in QUARTIC_TERMS}}
        return TrapPotential(omega_ref=self.omega_ref, harmonic=(wx, wy, wz), cubic=cubic,
                             quartic=quartic)


class ModeSet(BaseModel):
    """Transverse normal modes: frequencies sorted descending, vectors as columns"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    frequencies: FloatArray = Field(description="Mode frequencies w_k, rad/ms")
    vectors: FloatArray = Field(description="Mode matrix b_ik, column k is mode k")

    @model_validator(mode="after")
    def validate_modes(self) -> Self:
        """Positive descending frequencies and orthonormal mode vectors"""
        n = self.frequencies.shape[0]
        if self.frequencies.ndim != 1 or self.vectors.shape != (n, n):
            raise ValueError("Need n frequencies and an n x n mode matrix")
        if np.any(self.frequencies <= 0.0) or np.any(np.diff(self.frequencies) > 0.0):
            raise ValueError("Frequencies must be positive and sorted in descending order")
        if not np.allclose(self.vectors.T @ self.vectors, np.eye(n), rtol=0.0, atol=1e-10):
            raise ValueError("Mode vectors must be orthonormal")
        return self

    @property
    def n(self) -> int:
        return self.frequencies.shape[0]


class ToneSpec(BaseModel):
    """One laser tone driving the transverse modes"""
    model_config = ConfigDict(frozen=True)

    detuning: float = Field(
        description="Beat-note frequency mu, rad/ms",
        examples=[2 * np.pi * 3.05],
    )
    eta_ref: float = Field(
        description="Lamb-Dicke parameter at omega_ref",
        examples=[0.1],
        default=0.1,
        gt=0.0,
    )
    omega_ref: float = Field(
        description="Reference frequency of eta_ref, rad/ms",
        examples=[2 * np.pi * 3.0],
        gt=0.0,
    )

    def lamb_dicke(self, frequencies: np.ndarray) -> np.ndarray:
        """eta_k = eta_ref * sqrt(omega_ref / w_k)"""
        return self.eta_ref * np.sqrt(self.omega_ref / np.asarray(frequencies))


class GaussianProfile(BaseModel):
    """Gaussian beam profile in the crystal plane"""
    model_config = ConfigDict(frozen=True)

    peak: float = Field(description="Amplitude at the center, rad/ms", gt=0.0)
    center_x: float = Field(description="Beam center along x, um", default=0.0)
    center_z: float = Field(description="Beam center along z, um", default=0.0)
    fwhm_x: float = Field(description="Full width at half maximum along x, um", gt=0.0)
    fwhm_z: float = Field(description="Full width at half maximum along z, um", gt=0.0)


class LaserProfile(BaseModel):
    """Per-ion light-shift amplitudes, shared or one row per tone, with optional phases"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    amplitudes: FloatArray = Field(description="Omega_i (n,) or (tones, n), rad/ms")
    phases: FloatArray | None = Field(description="Wavefront phase per ion, rad", default=None)
    gaussian: GaussianProfile | None = Field(description="Profile the amplitudes came from",
                                             default=None)

    @model_validator(mode="after")
    def validate_profile(self) -> Self:
        """Non-negative calibrated amplitudes and a phase per ion"""
        if self.amplitudes.ndim not in (1, 2):
            raise ValueError("Amplitudes must be a vector or a (tones, n) matrix")
        if not np.all(np.isfinite(self.amplitudes)) or np.any(self.amplitudes < 0.0):
            raise ValueError("Calibrated amplitudes must be finite and non-negative")
        if self.phases is not None and self.phases.shape != (self.n,):
            raise ValueError(f"Need one phase per ion ({self.n})")
        return self

    @property
    def n(self) -> int:
        return self.amplitudes.shape[-1]

    def per_tone(self, tones: int) -> np.ndarray:
        """Amplitude matrix with one row per tone"""
        if self.amplitudes.ndim == 1:
            return np.tile(self.amplitudes, (tones, 1))
        if self.amplitudes.shape[0] != tones:
            raise ValueError(f"Amplitudes given for {self.amplitudes.shape[0]} tones, not {tones}")
        return np.asarray(self.amplitudes)


class PotentialMeasurement(BaseModel):
    """Calibration data for the staged trap-potential fit"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    positions: FloatArray = Field(description="Measured (x, z) per ion, scaled units")
    mode_indices: list[int] = Field(
        description="Which modes (descending order) have measured frequencies",
        examples=[[0, 1, 2, 29]],
    )
    frequencies: FloatArray = Field(description="Measured frequencies, rad/ms")
    pattern_modes: list[int] = Field(description="Modes with measured b_ik^2",
                                     default_factory=list)
    patterns: FloatArray = Field(description="Normalized b_ik^2 rows", default=np.zeros((0, 0)),
                                 validate_default=True)
    length_scale_um: float = Field(description="Microns per scaled length unit", gt=0.0)
    position_scale_um: float = Field(description="Position residual unit, um", default=1.0,
                                     gt=0.0)
    frequency_scale: float = Field(
        description="Frequency residual unit, rad/ms (1 kHz)",
        default=2 * np.pi,
        gt=0.0,
    )

    @model_validator(mode="after")
    def validate_measurement(self) -> Self:
        """Consistent shapes and mode indices"""
        n = self.positions.shape[0]
        if self.positions.ndim != 2 or self.positions.shape[1] != 2:
            raise ValueError("Positions must be an (n, 2) array of (x, z)")
        if len(self.mode_indices) < 2 or self.frequencies.shape != (len(self.mode_indices),):
            raise ValueError("Need at least two measured frequencies, one per mode index")
        for indices in (self.mode_indices, self.pattern_modes):
            if len(set(indices)) != len(indices) or any(not 0 <= k < n for k in indices):
                raise ValueError(f"Mode indices must be distinct and within [0, {n})")
        if self.pattern_modes and self.patterns.shape != (len(self.pattern_modes), n):
            raise ValueError("Need one pattern row of length n per pattern mode")
        return self

    @property
    def n(self) -> int:
        return self.positions.shape[0]


class StageReport(BaseModel):
    """Outcome of one stage of the potential fit"""
    name: str = Field(description="Stage name", examples=["initial quadratics"])
    terms: list[str] = Field(description="Coefficients adjusted in this stage")
    rss: float = Field(description="Final stage RSS in residual units", ge=0.0)
    iterations: int = Field(description="LM iterations", default=0)
    converged: bool = Field(description="Whether LM met a stopping rule", default=True)
    skipped: bool = Field(description="No data for the stage objective", default=False)


class StagedFit(BaseModel):
    """Fitted potential with the per-stage residual report"""
    potential: TrapPotential
    stages: list[StageReport]
    y_cubics_flagged: bool = Field(
        description="xy2 and zy2 returned as 0 because no mode patterns were supplied",
        default=False,
    )


class DriveFile(BaseModel):
    """On-disk laser drive: the tones and the calibrated per-ion profile"""
    tones: list[ToneSpec] = Field(description="Laser tones, summed into the couplings")
    laser: LaserProfile = Field(description="Calibrated amplitudes and optional phases")

    @model_validator(mode="after")
    def validate_drive(self) -> Self:
        """At least one tone, and amplitude rows matching the tones"""
        if not self.tones:
            raise ValueError("Drive needs at least one tone")
        self.laser.per_tone(len(self.tones))
        return self
