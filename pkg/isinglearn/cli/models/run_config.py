"""Run configuration for the command line, one section per sub-command"""
from enum import Enum
from pathlib import Path
from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from isinglearn.models.results import Scheme


class Command(Enum):
    """Sub-commands"""
    generate = "generate"
    estimate = "estimate"
    fit = "fit"
    phonon_fit = "phonon-fit"
    couplings = "couplings"
    epsilon = "epsilon"
    validate = "validate"
    report = "report"


STOCHASTIC = {Command.generate, Command.epsilon, Command.report}


class GenerateConfig(BaseModel):
    """Synthetic quench experiment"""
    model: Path | None = Field(description="Model file", examples=["model.json"], default=None)
    out: Path | None = Field(description="Dataset file to write", examples=["data.jsonl"],
                             default=None)
    times: list[float] | None = Field(description="Explicit times, ms", default=None)
    t_max: float = Field(description="Last time of a uniform schedule, ms", default=9.0, gt=0.0)
    steps: int = Field(description="Points of a uniform schedule", default=13, ge=1)
    shots: int = Field(description="Trials per time point", examples=[1000], default=1000, ge=1)
    echo: bool = Field(description="Spin echo applied", default=True)
    groups: bool = Field(description="Alternate plain and pi-before-measure trials",
                         default=True)
    spam: float = Field(description="SPAM bit-flip probability", default=0.0, ge=0.0, lt=1.0)
    leakage: float = Field(description="Leakage rate per ion, 1/ms", default=0.0, ge=0.0)
    decoherence: Path | None = Field(description="Decoherence file realized as noise fields",
                                     default=None)


class EstimateConfig(BaseModel):
    """Observable estimation from a dataset"""
    dataset: Path | None = Field(description="Dataset file", default=None)
    out: Path | None = Field(description="Observables file to write", default=None)
    filter: bool = Field(description="Apply the configuration-change filter", default=True)
    leakage: bool = Field(description="Correct leakage when both groups exist", default=True)
    split: float | None = Field(description="Train fraction of a train/test split", default=None,
                                gt=0.0, lt=1.0)
    test_out: Path | None = Field(description="Test observables file when splitting",
                                  default=None)


class FitConfig(BaseModel):
    """Fit of one scheme"""
    scheme: Scheme = Field(description="What to fit", examples=["on2"], default=Scheme.full)
    observables: Path | None = Field(description="Training observables", default=None)
    test: Path | None = Field(description="Held-out observables", default=None)
    decoherence: Path | None = Field(description="Fixed decoherence rates", default=None)
    init: Path | None = Field(description="Starting or fixed model", default=None)
    modes: Path | None = Field(description="Mode file for on and o1", default=None)
    drive: Path | None = Field(description="Drive file for on and o1", default=None)
    out: Path | None = Field(description="Fit result file", default=None)
    params_out: Path | None = Field(description="Fitted model or decoherence file",
                                    default=None)
    curve: Path | None = Field(description="Learning-curve CSV", default=None)
    tol: float = Field(description="Relative RSS tolerance", default=1e-8, gt=0.0)
    max_iters: int = Field(description="Iteration cap", default=500, ge=0)
    weighted: bool = Field(description="Inverse standard-error weights", default=False)
    no_decoherence: bool = Field(description="Fit without decoherence envelopes", default=False)


class PhononFitConfig(BaseModel):
    """Staged trap-potential fit"""
    measurement: Path | None = Field(description="Potential measurement file", default=None)
    initial: Path | None = Field(description="Initial potential file", default=None)
    passes: int = Field(description="Repeats of the five stages", default=1, ge=1)
    out: Path | None = Field(description="Fitted potential file", default=None)
    modes_out: Path | None = Field(description="Modes at the fitted equilibrium", default=None)


class CouplingsConfig(BaseModel):
    """Coupling synthesis from modes and drive"""
    modes: Path | None = Field(description="Mode file", default=None)
    drive: Path | None = Field(description="Drive file", default=None)
    out: Path | None = Field(description="Model file to write", default=None)


class EpsilonConfig(BaseModel):
    """Relative energy difference between two models"""
    first: Path | None = Field(description="First model file", default=None)
    second: Path | None = Field(description="Second model file", default=None)
    configs: int = Field(description="Spin configurations per repeat", default=1000, ge=2)
    repeats: int = Field(description="Configuration samples", default=5, ge=1)
    out: Path | None = Field(description="Report file", default=None)


class ValidateConfig(BaseModel):
    """k-body validation of a model against shots"""
    model: Path | None = Field(description="Model file", default=None)
    decoherence: Path | None = Field(description="Decoherence file", default=None)
    dataset: Path | None = Field(description="Dataset file", default=None)
    sets: list[list[int]] = Field(description="Ion index sets", examples=[[[0, 3, 7]]],
                                  default_factory=list)
    threshold: float = Field(description="z-score threshold", default=4.0, gt=0.0)
    fraction: float = Field(description="Required fraction within threshold", default=0.9,
                            gt=0.0, le=1.0)
    out: Path | None = Field(description="Validation CSV", default=None)


class ReportConfig(BaseModel):
    """Figure-data tables from a fit directory"""
    fit_dir: Path | None = Field(description="Directory with the input artifacts", default=None)
    out_dir: Path | None = Field(description="Directory for the CSV tables", default=None)
    samples: list[int] = Field(description="Sample sizes of the RSS sweep",
                               default=[250, 500, 1000, 2000, 4000])
    precision_samples: list[int] = Field(description="Sample sizes of the epsilon sweep",
                                         default=[250, 500, 1000])
    repeats: int = Field(description="Disjoint-set repeats per sample size", default=5, ge=1)
    configs: int = Field(description="Spin configurations per epsilon", default=1000, ge=2)
    train_fraction: float = Field(description="Train fraction of the split", default=0.5,
                                  gt=0.0, lt=1.0)
    sets: list[list[int]] = Field(description="k-body index sets; random k=3,4,5 when empty",
                                  default_factory=list)
    threshold: float = Field(description="k-body z-score threshold", default=4.0, gt=0.0)
    tol: float = Field(description="Relative RSS tolerance", default=1e-8, gt=0.0)
    max_iters: int = Field(description="Iteration cap", default=500, ge=0)

    @field_validator("samples", "precision_samples")
    @classmethod
    def validate_samples(cls, v: list[int]) -> list[int]:
        """Sample sizes must be positive"""
        if not v or any(m < 2 for m in v):
            raise ValueError("Sample sizes must be at least 2")
        return v


class RunConfig(BaseModel):
    """Everything one invocation needs; CLI flags override values read with --config"""
    model_config = ConfigDict(populate_by_name=True)

    command: Command = Field(description="Sub-command to run", examples=["generate"])
    seed: int | None = Field(description="Seed of every random stream", examples=[7],
                             default=None)
    threads: int = Field(description="Worker threads", default=1, ge=1)
    generate: GenerateConfig = Field(default_factory=GenerateConfig)
    estimate: EstimateConfig = Field(default_factory=EstimateConfig)
    fit: FitConfig = Field(default_factory=FitConfig)
    phonon_fit: PhononFitConfig = Field(default_factory=PhononFitConfig)
    couplings: CouplingsConfig = Field(default_factory=CouplingsConfig)
    epsilon: EpsilonConfig = Field(default_factory=EpsilonConfig)
    validate_: ValidateConfig = Field(default_factory=ValidateConfig, alias="validate")
    report: ReportConfig = Field(default_factory=ReportConfig)

    @model_validator(mode="after")
    def validate_seed(self) -> Self:
        """Stochastic commands must be reproducible"""
        stochastic = self.command in STOCHASTIC or (
            self.command is Command.estimate and self.estimate.split is not None
        )
        if stochastic and self.seed is None:
            raise ValueError(f"'{self.command.value}' is stochastic and needs --seed")
        return self

    def section(self, command: Command) -> BaseModel:
        """Configuration section of a sub-command"""
        return getattr(self, SECTIONS[command])


SECTIONS = {
    Command.generate: "generate",
    Command.estimate: "estimate",
    Command.fit: "fit",
    Command.phonon_fit: "phonon_fit",
    Command.couplings: "couplings",
    Command.epsilon: "epsilon",
    Command.validate: "validate_",
    Command.report: "report",
}
