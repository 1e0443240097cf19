"""Exceptions raised by isinglearn, grouped by CLI exit code."""


class IsingLearnError(Exception):
    """Base error for the package"""
    exit_code: int = 1


class InputValidationError(IsingLearnError, ValueError):
    """Inputs violate a precondition (exit code 2)"""
    exit_code = 2


class DimensionMismatchError(InputValidationError):
    """Two inputs disagree on ion count or array shape"""


class IndexOutOfRangeError(InputValidationError, IndexError):
    """An ion or mode index is outside the valid range"""


class NumericalError(IsingLearnError):
    """A numerical procedure failed (exit code 3)"""
    exit_code = 3


class ResonanceError(NumericalError):
    """A laser tone sits exactly on a phonon mode"""


class UnstableCrystalError(NumericalError):
    """The crystal has an imaginary mode or an unbounded potential"""


class EquilibriumError(NumericalError):
    """The equilibrium search did not converge or ions collided"""


class FitFailureError(NumericalError):
    """A least-squares fit produced non-finite values"""


class EstimationError(NumericalError):
    """Shot data cannot support the requested estimate"""


class ArtifactError(IsingLearnError):
    """Reading or writing an artifact failed (exit code 4)"""
    exit_code = 4


class MissingArtifactError(ArtifactError, FileNotFoundError):
    """One or more required input artifacts do not exist"""

    def __init__(self, missing: list[str], hint: str | None = None) -> None:
        self.missing = missing
        message = "missing artifacts: " + ", ".join(missing)
        if hint:
            message += f" ({hint})"
        super().__init__(message)
