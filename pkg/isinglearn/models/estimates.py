"""Module for observable estimates and data-quality reports"""
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from isinglearn.models.records import MAX_LEAK_PROBABILITY
from isinglearn.models.types import FloatArray, IntArray


def _ion_count(pairs_and_ions: tuple[int, int]) -> int:
    n, pairs = pairs_and_ions
    if pairs != n * (n - 1) // 2:
        raise ValueError(f"Pair storage must cover exactly i<j: expected {n * (n - 1) // 2}")
    return n


class PredictedObservables(BaseModel):
    """Noise-free magnetizations (T, n) and pair correlations (T, n(n-1)/2)"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: FloatArray = Field(description="Evolution times, ms", examples=[[0.0, 0.75]])
    mag: FloatArray = Field(description="Magnetizations per time and ion")
    corr: FloatArray = Field(description="Pair correlations per time, packed i<j")
    echo: bool = Field(description="Whether the spin echo was applied", default=True)

    @model_validator(mode="after")
    def validate_shapes(self) -> Self:
        """Arrays must share the time axis and cover the i<j pairs"""
        if self.mag.ndim != 2 or self.corr.ndim != 2:
            raise ValueError("mag and corr must be (time, observable) matrices")
        if self.mag.shape[0] != self.times.shape[0] or self.corr.shape[0] != self.times.shape[0]:
            raise ValueError("mag and corr must have one row per time")
        _ion_count((self.mag.shape[1], self.corr.shape[1]))
        return self

    @property
    def n(self) -> int:
        return self.mag.shape[1]

    def flat(self) -> np.ndarray:
        """Residual-ordered vector: per time, n magnetizations then the pairs"""
        return np.hstack([self.mag, self.corr]).ravel()


class ObservableSet(BaseModel):
    """Estimated magnetizations and pair correlations with standard errors"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: FloatArray = Field(description="Evolution times, ms", examples=[[0.0, 0.75]])
    mag: FloatArray = Field(description="Magnetization estimates (T, n)")
    mag_se: FloatArray = Field(description="Standard errors of the magnetizations (T, n)")
    corr: FloatArray = Field(description="Pair correlation estimates (T, n(n-1)/2), packed i<j")
    corr_se: FloatArray = Field(description="Standard errors of the correlations")
    counts: IntArray = Field(description="Samples behind each time point", examples=[[500, 500]])
    echo: bool = Field(description="Whether the spin echo was applied", default=True)

    @model_validator(mode="after")
    def validate_shapes(self) -> Self:
        """Shapes agree, counts are positive and errors non-negative"""
        steps = self.times.shape[0]
        if self.mag.ndim != 2 or self.mag.shape[0] != steps:
            raise ValueError("mag must be a (time, ion) matrix")
        if self.corr.ndim != 2 or self.corr.shape[0] != steps:
            raise ValueError("corr must be a (time, pair) matrix")
        _ion_count((self.mag.shape[1], self.corr.shape[1]))
        if self.mag_se.shape != self.mag.shape or self.corr_se.shape != self.corr.shape:
            raise ValueError("Standard errors must match their estimates")
        if self.counts.shape != (steps,) or np.any(self.counts < 1):
            raise ValueError("Every time point needs at least one sample")
        if np.any(self.mag_se < 0.0) or np.any(self.corr_se < 0.0):
            raise ValueError("Standard errors must be non-negative")
        return self

    @property
    def n(self) -> int:
        return self.mag.shape[1]

    def flat(self) -> np.ndarray:
        """Residual-ordered values: per time, n magnetizations then the pairs"""
        return np.hstack([self.mag, self.corr]).ravel()

    def flat_se(self) -> np.ndarray:
        """Standard errors in the same order as ``flat``"""
        return np.hstack([self.mag_se, self.corr_se]).ravel()

    def out_of_band(self, sigmas: float = 3.0) -> int:
        """Number of estimates with |value| beyond 1 + sigmas * se"""
        values, errors = self.flat(), self.flat_se()
        return int(np.sum(np.abs(values) > 1.0 + sigmas * errors))


class FilterReport(BaseModel):
    """Outcome of the crystal-configuration filter"""
    total: int = Field(description="Number of trials inspected", examples=[1300], ge=0)
    kept_trials: list[int] = Field(description="Indices of kept trials")
    discarded_trials: list[int] = Field(description="Indices of discarded trials")
    window_discards: int = Field(
        description="Trials discarded by the dark-more-than-5-in-100 rule",
        default=0,
    )
    streak_discards: int = Field(
        description="Trials discarded by the 3-consecutive-dark rule",
        default=0,
    )
    flagged_windows: int = Field(description="Windows with a problematic ion", default=0)

    @model_validator(mode="after")
    def validate_partition(self) -> Self:
        """Kept and discarded trials partition all trials"""
        kept, discarded = set(self.kept_trials), set(self.discarded_trials)
        if kept & discarded:
            raise ValueError("A trial cannot be both kept and discarded")
        if kept | discarded != set(range(self.total)):
            raise ValueError("Kept and discarded trials must cover every trial")
        return self

    @property
    def discard_fraction(self) -> float:
        return len(self.discarded_trials) / self.total if self.total else 0.0


class LeakageEstimate(BaseModel):
    """Per-ion leakage probabilities per time and their linear-in-time fit"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: FloatArray = Field(description="Evolution times, ms")
    epsilon: FloatArray = Field(description="Raw leakage estimates per time and ion (T, n)")
    epsilon_se: FloatArray = Field(description="Standard errors of the raw estimates")
    rate: FloatArray = Field(description="Fitted leakage rate per ion, 1/ms")
    rate_se: FloatArray = Field(description="Standard error of the fitted rate")
    clamped: list[bool] = Field(description="Ions whose negative fitted rate was set to 0")

    @property
    def n(self) -> int:
        return self.rate.shape[0]

    def at(self, t: float) -> np.ndarray:
        """Fitted leakage probability per ion at time t"""
        return np.clip(self.rate * t, 0.0, MAX_LEAK_PROBABILITY)
