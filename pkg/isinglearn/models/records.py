"""Module for single-shot records, datasets and the synthetic experiment settings"""
from enum import IntEnum
from typing_extensions import Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from isinglearn.models.hamiltonian import DecoherenceModel
from isinglearn.models.types import BitArray, FloatArray, IntArray


MAX_LEAK_PROBABILITY = 0.999


class Group(IntEnum):
    """Leakage-compensation group of a trial"""
    plain = 0
    pi_before_measure = 1


class QuenchSchedule(BaseModel):
    """Evolution times, shots per time and echo setting"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    times: FloatArray = Field(
        description="Evolution times in ms, strictly increasing",
        examples=[[0.0, 0.75, 1.5]],
    )
    shots_per_time: int = Field(description="Trials M per time point", examples=[1000], ge=1)
    echo: bool = Field(description="Spin echo in the middle of the evolution", default=True)

    @field_validator("times")
    @classmethod
    def validate_times(cls, v: np.ndarray) -> np.ndarray:
        """Times are non-negative and strictly increasing"""
        if v.ndim != 1 or v.size == 0:
            raise ValueError("Schedule needs at least one time")
        if np.any(v < 0.0) or np.any(np.diff(v) <= 0.0):
            raise ValueError("Times must be non-negative and strictly increasing")
        return v

    @classmethod
    def uniform(cls, t_max: float, steps: int, shots_per_time: int, echo: bool = True) -> Self:
        """Evenly spaced times from 0 to t_max"""
        return cls(times=np.linspace(0.0, t_max, steps), shots_per_time=shots_per_time, echo=echo)


class ConfigChange(BaseModel):
    """Trials during which the listed ions are displaced from their sites"""
    start: int = Field(description="First affected trial (global index)", examples=[100], ge=0)
    stop: int = Field(description="Last affected trial, inclusive", examples=[150], ge=0)
    ions: list[int] = Field(description="Ions read dark at the cooling check", examples=[[3]])

    @model_validator(mode="after")
    def validate_range(self) -> Self:
        """The trial range must not be empty"""
        if self.stop < self.start:
            raise ValueError("Config change must end at or after its start")
        if not self.ions:
            raise ValueError("Config change must list at least one ion")
        return self


class ErrorChannels(BaseModel):
    """Error channels injected into synthetic shots"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    spam_flip: float = Field(
        description="Bit-flip probability per ion per shot",
        examples=[0.007],
        default=0.0,
        ge=0.0,
        lt=1.0,
    )
    leakage_rate: FloatArray = Field(
        description="Leakage rate per ion (or one shared value), 1/ms",
        examples=[0.02],
        default=0.0,
        validate_default=True,
    )
    decoherence: DecoherenceModel | None = Field(
        description="Dephasing realized as random residual fields",
        default=None,
    )
    config_change: list[ConfigChange] = Field(
        description="Injected crystal configuration changes",
        default_factory=list,
    )

    @field_validator("leakage_rate")
    @classmethod
    def validate_rates(cls, v: np.ndarray) -> np.ndarray:
        """Leakage rates are finite and non-negative"""
        if v.ndim > 1 or not np.all(np.isfinite(v)) or np.any(v < 0.0):
            raise ValueError("Leakage rates must be finite, non-negative scalars or vectors")
        return v

    def leakage_probability(self, t: float, n: int) -> np.ndarray:
        """Per-ion leak probability rate * t, kept inside [0, MAX_LEAK_PROBABILITY]"""
        rates = np.broadcast_to(self.leakage_rate, (n,))
        return np.clip(rates * t, 0.0, MAX_LEAK_PROBABILITY)

    @property
    def is_clean(self) -> bool:
        return (self.spam_flip == 0.0 and not np.any(self.leakage_rate)
                and self.decoherence is None and not self.config_change)


class ShotRecord(BaseModel):
    """One trial: measured bits and the cooling-stage brightness check"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    time_index: int = Field(description="Index into the schedule times", examples=[0], ge=0)
    group: Group = Field(description="Leakage-compensation group", default=Group.plain)
    bits: BitArray = Field(description="Outcome per ion, 1 = bright", examples=[[0, 1, 0]])
    cooling_bright: BitArray = Field(
        description="Cooling-stage brightness per ion, 1 = bright",
        examples=[[1, 1, 1]],
    )

    @model_validator(mode="after")
    def validate_lengths(self) -> Self:
        """Both bit vectors cover the same ions"""
        if self.bits.ndim != 1 or self.bits.shape != self.cooling_bright.shape:
            raise ValueError("bits and cooling_bright must be vectors of equal length")
        return self


class Dataset(BaseModel):
    """Time-tagged single-shot records stored column-wise"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    n: int = Field(description="Number of ions", examples=[12], ge=1)
    times: FloatArray = Field(description="Schedule times, ms")
    echo: bool = Field(description="Spin echo applied", default=True)
    groups: bool = Field(description="Trials split into the two leakage groups", default=True)
    time_index: IntArray = Field(description="Time index per record")
    group: IntArray = Field(description="Group code per record")
    bits: BitArray = Field(description="Measured bits (records, n)")
    cooling: BitArray = Field(description="Cooling brightness flags (records, n)")

    @model_validator(mode="after")
    def validate_columns(self) -> Self:
        """Columns agree on record count, ion count and index ranges"""
        records = self.time_index.shape[0]
        if self.group.shape != (records,):
            raise ValueError("group must have one entry per record")
        if self.bits.shape != (records, self.n) or self.cooling.shape != (records, self.n):
            raise ValueError(f"bits and cooling must have shape ({records}, {self.n})")
        if records and (self.time_index.min() < 0 or self.time_index.max() >= self.times.size):
            raise ValueError("time_index out of range of the schedule")
        if records and not set(np.unique(self.group)) <= {Group.plain, Group.pi_before_measure}:
            raise ValueError("Unknown group code")
        return self

    @classmethod
    def from_records(cls, n: int, times: np.ndarray, records: list[ShotRecord],
                     echo: bool = True, groups: bool = True) -> Self:
        """Assemble a dataset from individual shot records"""
        return cls(
            n=n,
            times=times,
            echo=echo,
            groups=groups,
            time_index=[r.time_index for r in records],
            group=[int(r.group) for r in records],
            bits=np.array([r.bits for r in records], dtype=np.uint8).reshape(-1, n),
            cooling=np.array([r.cooling_bright for r in records], dtype=np.uint8).reshape(-1, n),
        )

    def __len__(self) -> int:
        return self.time_index.shape[0]

    def record(self, k: int) -> ShotRecord:
        """The k-th record"""
        return ShotRecord(
            time_index=int(self.time_index[k]),
            group=Group(int(self.group[k])),
            bits=self.bits[k],
            cooling_bright=self.cooling[k],
        )

    def indices_at(self, time_index: int) -> np.ndarray:
        """Record indices at one time point, in trial order"""
        return np.flatnonzero(self.time_index == time_index)

    def subset(self, indices: np.ndarray | list[int]) -> "Dataset":
        """Dataset restricted to the given records, in the given order"""
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            n=self.n,
            times=self.times,
            echo=self.echo,
            groups=self.groups,
            time_index=self.time_index[indices],
            group=self.group[indices],
            bits=self.bits[indices],
            cooling=self.cooling[indices],
        )

    def take_per_time(self, shots: int, start: int = 0) -> "Dataset":
        """Records start..start+shots-1 of every time point.

        Consecutive trials keep the alternating group balance, so
        non-overlapping ``start`` values give disjoint sample sets.
        """
        chosen = []
        for ti in range(self.times.size):
            at_time = self.indices_at(ti)
            if at_time.size < start + shots:
                raise ValueError(
                    f"Time index {ti} has {at_time.size} records, need {start + shots}"
                )
            chosen.append(at_time[start:start + shots])
        return self.subset(np.concatenate(chosen))

    def counts(self) -> np.ndarray:
        """Records per time point"""
        return np.bincount(self.time_index, minlength=self.times.size)
