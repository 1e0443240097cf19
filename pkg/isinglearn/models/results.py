"""Module for fit options and fit results"""
from enum import Enum
from typing_extensions import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator

from isinglearn.models.hamiltonian import DecoherenceModel, IsingModel
from isinglearn.models.types import FloatArray


class Scheme(str, Enum):
    """What a fit adjusts"""
    full = "on2"
    omega = "on"
    theory = "o1"
    decoherence = "decoherence"
    fields = "fields"


class FitOptions(BaseModel):
    """Levenberg-Marquardt settings shared by every fit"""
    model_config = ConfigDict(frozen=True)

    tol: float = Field(
        description="Relative RSS change below which an accepted step ends the fit",
        examples=[1e-8],
        default=1e-8,
        gt=0.0,
    )
    max_iters: int = Field(description="Iteration cap", examples=[500], default=500, ge=0)
    damping: float = Field(description="Initial damping", examples=[1e-3], default=1e-3, gt=0.0)
    damping_up: float = Field(description="Damping factor on rejection", default=10.0, gt=1.0)
    damping_down: float = Field(description="Damping divisor on acceptance", default=3.0, gt=1.0)
    weighted: bool = Field(
        description="Divide residuals by the estimated standard errors",
        default=False,
    )


class LearningPoint(BaseModel):
    """Train and test RSS after an accepted step"""
    train_rss: float = Field(description="RSS on the fitted observables", ge=0.0)
    test_rss: float | None = Field(description="RSS on held-out observables", default=None)
    objective: float | None = Field(
        description="Cost the fit minimized; chi^2 when weighted, else equal to train_rss",
        default=None,
    )


class FitResult(BaseModel):
    """Fitted parameters with RSS bookkeeping"""
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)

    scheme: Scheme = Field(description="Fitting scheme", examples=["on2"])
    model: IsingModel | None = Field(description="Fitted or predicted model", default=None)
    amplitudes: FloatArray | None = Field(
        description="Per-tone laser amplitudes (tones, n), rad/ms",
        default=None,
    )
    decoherence: DecoherenceModel | None = Field(description="Fitted rates", default=None)
    fields: FloatArray | None = Field(description="Fitted |h_i|, rad/ms", default=None)
    train_rss: float = Field(description="Final training RSS", examples=[0.42], ge=0.0)
    test_rss: float | None = Field(description="Final test RSS", default=None)
    iterations: int = Field(description="Accepted plus rejected iterations", default=0, ge=0)
    converged: bool = Field(description="Whether a stopping rule was met", default=True)
    message: str = Field(description="Why the fit stopped", default="")
    learning_curve: list[LearningPoint] = Field(
        description="RSS after every accepted step, starting at the initial point",
        default_factory=list,
    )
    param_se: FloatArray | None = Field(
        description="Standard errors of the fitted parameters",
        default=None,
    )

    @model_validator(mode="after")
    def validate_curve(self) -> Self:
        """Accepted steps never increase the minimized cost"""
        trace = [point.train_rss if point.objective is None else point.objective
                 for point in self.learning_curve]
        for before, after in zip(trace, trace[1:], strict=False):
            if after > before * (1.0 + 1e-12) + 1e-300:
                raise ValueError("Learning curve must be non-increasing in the minimized cost")
        return self
