"""Module for the Hamiltonian models"""
from typing import Any, Literal

from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from isinglearn.models.types import FloatArray

UNITS = "rad_per_ms"


class IsingModel(BaseModel):
    """Long-range Ising model: couplings J_ij and longitudinal fields h_i in rad/ms"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(description="Number of ions", examples=[12], ge=1)
    couplings: FloatArray = Field(
        description="Symmetric coupling matrix J_ij with zero diagonal, rad/ms",
        examples=[[[0.0, 0.1], [0.1, 0.0]]],
    )
    fields: FloatArray = Field(
        description="Longitudinal fields h_i, rad/ms",
        examples=[[0.0, 0.0]],
    )

    @model_validator(mode="before")
    @classmethod
    def fill_defaults(cls, v: dict[str, Any]) -> dict[str, Any]:
        """Infer n and zero fields from the coupling matrix when omitted"""
        if not isinstance(v, dict):
            return v
        v = dict(v)
        couplings = np.asarray(v.get("couplings"), dtype=float)
        if "n" not in v and couplings.ndim == 2:
            v["n"] = couplings.shape[0]
        if v.get("fields") is None and "n" in v:
            v["fields"] = np.zeros(v["n"])
        return v

    @field_validator("couplings")
    @classmethod
    def validate_couplings(cls, v: np.ndarray) -> np.ndarray:
        """Couplings must be a finite symmetric matrix with zero diagonal"""
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError("Couplings must be a square matrix")
        if not np.all(np.isfinite(v)):
            raise ValueError("Couplings must be finite")
        if np.any(np.diag(v) != 0.0):
            raise ValueError("Couplings must have a zero diagonal")
        if not np.array_equal(v, v.T):
            scale = max(float(np.max(np.abs(v))), 1.0)
            if not np.allclose(v, v.T, rtol=0.0, atol=1e-12 * scale):
                raise ValueError("Couplings must be symmetric")
            v = 0.5 * (v + v.T)
            v.setflags(write=False)
        return v

    @field_validator("fields")
    @classmethod
    def validate_fields(cls, v: np.ndarray) -> np.ndarray:
        """Fields must be a finite vector"""
        if v.ndim != 1:
            raise ValueError("Fields must be a vector")
        if not np.all(np.isfinite(v)):
            raise ValueError("Fields must be finite")
        return v

    @model_validator(mode="after")
    def validate_shapes(self) -> Self:
        """Couplings and fields must match the ion count"""
        if self.couplings.shape != (self.n, self.n):
            raise ValueError(f"Couplings must have shape ({self.n}, {self.n})")
        if self.fields.shape != (self.n,):
            raise ValueError(f"Fields must have length {self.n}")
        return self

    @classmethod
    def from_upper(cls, n: int, j_upper: np.ndarray, fields: np.ndarray | None = None) -> Self:
        """Build a model from the row-major packed upper triangle"""
        j_upper = np.asarray(j_upper, dtype=float)
        if j_upper.shape != (n * (n - 1) // 2,):
            raise ValueError(f"Packed couplings must have length {n * (n - 1) // 2}")
        couplings = np.zeros((n, n))
        rows, cols = np.triu_indices(n, 1)
        couplings[rows, cols] = j_upper
        couplings[cols, rows] = j_upper
        return cls(n=n, couplings=couplings, fields=fields)

    @property
    def upper(self) -> np.ndarray:
        """Row-major packed upper triangle of the couplings"""
        return self.couplings[np.triu_indices(self.n, 1)]

    def with_couplings(self, couplings: np.ndarray) -> "IsingModel":
        """Copy of this model with new couplings and the same fields"""
        return IsingModel(n=self.n, couplings=couplings, fields=self.fields)

    def with_fields(self, fields: np.ndarray) -> "IsingModel":
        """Copy of this model with new fields and the same couplings"""
        return IsingModel(n=self.n, couplings=self.couplings, fields=fields)

    def to_file(self) -> "IsingModelFile":
        """File representation with packed couplings"""
        return IsingModelFile(n=self.n, j_upper=self.upper.tolist(), h=self.fields.tolist())


class IsingModelFile(BaseModel):
    """On-disk model: packed upper-triangle couplings"""
    n: int = Field(description="Number of ions", examples=[3], ge=1)
    j_upper: list[float] = Field(
        description="Row-major upper triangle of J, length n(n-1)/2",
        examples=[[0.1, 0.05, 0.1]],
    )
    h: list[float] = Field(description="Longitudinal fields", examples=[[0.0, 0.0, 0.0]])
    units: Literal["rad_per_ms"] = Field(
        description="Units of every coefficient",
        default=UNITS,
        validate_default=True,
    )

    def to_model(self) -> IsingModel:
        """Unpack into the in-memory model"""
        return IsingModel.from_upper(self.n, np.asarray(self.j_upper), np.asarray(self.h))


class SpinConfiguration(BaseModel):
    """Spin configuration s_i in {-1, +1}"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    s: FloatArray = Field(description="Spins, each -1 or +1", examples=[[1, -1, 1]])

    @field_validator("s")
    @classmethod
    def validate_spins(cls, v: np.ndarray) -> np.ndarray:
        """Every entry must be -1 or +1"""
        if v.ndim != 1:
            raise ValueError("Spin configuration must be a vector")
        if not np.all(np.abs(v) == 1.0):
            raise ValueError("Spins must be -1 or +1")
        return v

    @property
    def n(self) -> int:
        """Number of spins"""
        return self.s.shape[0]


class DecoherenceModel(BaseModel):
    """Per-ion correlated and independent Gaussian dephasing rates, rad/ms"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    gamma_cor: FloatArray = Field(
        description="Correlated dephasing rates gamma_cor,i",
        examples=[[0.05, 0.05]],
    )
    gamma_ind: FloatArray = Field(
        description="Independent dephasing rates gamma_ind,i",
        examples=[[0.1, 0.1]],
    )

    @field_validator("gamma_cor", "gamma_ind")
    @classmethod
    def validate_rates(cls, v: np.ndarray) -> np.ndarray:
        """Rates must be finite and non-negative"""
        if v.ndim != 1:
            raise ValueError("Rates must be a vector")
        if not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValueError("Rates must be finite and non-negative")
        return v

    @model_validator(mode="after")
    def validate_lengths(self) -> Self:
        """Both rate vectors cover the same ions"""
        if self.gamma_cor.shape != self.gamma_ind.shape:
            raise ValueError("gamma_cor and gamma_ind must have the same length")
        return self

    @classmethod
    def zeros(cls, n: int) -> Self:
        """No decoherence on n ions"""
        return cls(gamma_cor=np.zeros(n), gamma_ind=np.zeros(n))

    @classmethod
    def uniform(cls, n: int, gamma_cor: float, gamma_ind: float) -> Self:
        """Same rates on every ion"""
        return cls(gamma_cor=np.full(n, gamma_cor), gamma_ind=np.full(n, gamma_ind))

    @property
    def n(self) -> int:
        """Number of ions"""
        return self.gamma_cor.shape[0]


class SequenceFlags(BaseModel):
    """Which pieces of the Ramsey sequence are active"""
    model_config = ConfigDict(frozen=True)

    echo: bool = Field(
        description="Mid-sequence pi pulse cancelling the longitudinal fields",
        default=True,
    )
    include_decoherence: bool = Field(
        description="Apply the Gaussian dephasing envelopes",
        default=True,
    )
