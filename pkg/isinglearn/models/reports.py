"""Module for learning-quality reports"""
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from isinglearn.models.types import FloatArray


class PrecisionReport(BaseModel):
    """Relative energy difference between two coupling sets"""
    epsilon: float = Field(description="Mean over repeats of the relative energy difference",
                           examples=[0.031])
    std: float = Field(description="Population std of epsilon over repeats", default=0.0, ge=0.0)
    n_configs: int = Field(description="Spin configurations per repeat", examples=[1000], ge=1)
    repeats: int = Field(description="Independent configuration samples", examples=[5], ge=1)
    degenerate: bool = Field(description="An energy spread vanished", default=False)

    @model_validator(mode="after")
    def validate_epsilon(self) -> Self:
        """epsilon is finite and non-negative unless flagged degenerate"""
        if not self.degenerate and not (np.isfinite(self.epsilon) and self.epsilon >= 0.0):
            raise ValueError("epsilon must be finite and non-negative")
        return self


class ScalingFit(BaseModel):
    """y = a / M + b fitted by linear least squares in 1/M"""
    a: float = Field(description="Coefficient of 1/M", examples=[3.0])
    b: float = Field(description="Sample-size independent floor", examples=[0.2])
    r2: float = Field(description="Coefficient of determination", examples=[0.99])
    a_se: float = Field(description="Standard error of a", default=0.0)
    b_se: float = Field(description="Standard error of b", default=0.0)


class ExponentFit(BaseModel):
    """epsilon = c * M^(-alpha) fitted on log-log axes"""
    alpha: float = Field(description="Decay exponent", examples=[0.5])
    alpha_se: float = Field(description="Standard error of alpha", default=0.0)
    prefactor: float = Field(description="c", examples=[2.0])


class KBodyValidation(BaseModel):
    """Predicted against estimated k-body correlation curve for one index set"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    indices: list[int] = Field(description="Ion indices of the correlator", examples=[[0, 3, 7]])
    times: FloatArray = Field(description="Evolution times, ms")
    predicted: FloatArray = Field(description="Model prediction per time")
    estimated: FloatArray = Field(description="Estimate from shots per time")
    se: FloatArray = Field(description="Standard error of the estimate per time")
    z: FloatArray = Field(description="(estimated - predicted) / se per time")
    max_z: float = Field(description="Largest |z|", ge=0.0)
    within: float = Field(description="Fraction of times with |z| under the threshold",
                          ge=0.0, le=1.0)
    passed: bool = Field(description="within meets the required fraction")


class SweepPoint(BaseModel):
    """Fit quality at one sample size"""
    samples: int = Field(description="Trials per time point", examples=[1000], ge=1)
    train_rss: float = Field(description="Minimized training RSS", ge=0.0)
    test_rss: float | None = Field(description="RSS on held-out estimates", default=None)
    epsilon: float | None = Field(description="Mean relative energy difference", default=None)
    epsilon_std: float | None = Field(description="Std of epsilon over repeats", default=None)
