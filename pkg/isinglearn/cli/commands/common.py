"""Helpers shared by the sub-commands"""
import argparse
from pathlib import Path
from typing import TypeVar

import numpy as np

from isinglearn import io
from isinglearn.errors import InputValidationError
from isinglearn.models.hamiltonian import DecoherenceModel

T = TypeVar("T")

DECOHERENCE_HINT = "run 'isinglearn fit --scheme decoherence' on far-detuned data first"


def require(value: T | None, flag: str) -> T:
    """Value of a mandatory option"""
    if value is None:
        raise InputValidationError(f"{flag} is required")
    return value


def stream(seed: int, purpose: int) -> np.random.Generator:
    """Independent generator per purpose, all derived from the run seed"""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(purpose,)))


def read_decoherence(path: Path | None) -> DecoherenceModel | None:
    """Decoherence file, or None when not given"""
    if path is None:
        return None
    return io.read_json(DecoherenceModel, path, hint=DECOHERENCE_HINT)


def int_list(text: str) -> list[int]:
    """argparse type for comma separated integers"""
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as error:
        raise argparse.ArgumentTypeError(f"not a list of integers: {text}") from error
