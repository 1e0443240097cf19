"""Reading and writing isinglearn artifacts.

JSON artifacts are pydantic models dumped with ``model_dump_json``. Datasets are
JSON lines: a header, then one record per trial whose bits are packed
LSB-first in ion order and base64 encoded. Tables are CSV through pandas.
"""
import base64
import json
import logging
from pathlib import Path
from typing import TypeVar

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, ValidationError

from isinglearn.errors import ArtifactError, InputValidationError, MissingArtifactError
from isinglearn.models.estimates import ObservableSet
from isinglearn.models.hamiltonian import IsingModel, IsingModelFile
from isinglearn.models.records import Dataset

logger = logging.getLogger(__name__)

ModelT = TypeVar("ModelT", bound=BaseModel)

FLOAT_FORMAT = "%.12g"


class ObservableSetFile(BaseModel):
    """On-disk estimates: every value paired with its standard error"""
    times: list[float] = Field(description="Evolution times, ms", examples=[[0.0, 0.75]])
    mag: list[list[tuple[float, float]]] = Field(
        description="Per time, (value, se) per ion",
        examples=[[[[1.0, 0.01], [1.0, 0.01]]]],
    )
    corr: list[list[tuple[float, float]]] = Field(
        description="Per time, (value, se) per pair i<j in packed order",
        examples=[[[[1.0, 0.01]]]],
    )
    counts: list[int] = Field(description="Samples per time point", examples=[[1000]])
    echo: bool = Field(description="Whether the spin echo was applied", default=True)

    @classmethod
    def from_set(cls, observed: ObservableSet) -> "ObservableSetFile":
        return cls(
            times=observed.times.tolist(),
            mag=np.stack([observed.mag, observed.mag_se], axis=-1).tolist(),
            corr=np.stack([observed.corr, observed.corr_se], axis=-1).tolist(),
            counts=observed.counts.tolist(),
            echo=observed.echo,
        )

    def to_set(self) -> ObservableSet:
        mag = np.asarray(self.mag, dtype=float).reshape(len(self.times), -1, 2)
        n = mag.shape[1]
        corr = np.asarray(self.corr, dtype=float).reshape(len(self.times), n * (n - 1) // 2, 2)
        return ObservableSet(
            times=self.times,
            mag=mag[..., 0],
            mag_se=mag[..., 1],
            corr=corr[..., 0],
            corr_se=corr[..., 1],
            counts=self.counts,
            echo=self.echo,
        )


class DatasetHeader(BaseModel):
    """First line of a dataset file"""
    n: int = Field(description="Number of ions", examples=[12], ge=1)
    times: list[float] = Field(description="Schedule times, ms", examples=[[0.0, 0.75]])
    echo: bool = Field(description="Spin echo applied", default=True)
    groups: bool = Field(description="Trials split into the two leakage groups", default=True)


class RecordLine(BaseModel):
    """One trial of a dataset file"""
    ti: int = Field(description="Time index", examples=[0], ge=0)
    g: int = Field(description="Group code", examples=[0], ge=0, le=1)
    bits: str = Field(description="base64 of the LSB-first packed outcome bits")
    cool: str = Field(description="base64 of the LSB-first packed cooling checks")


def _missing(path: Path, hint: str | None) -> MissingArtifactError:
    return MissingArtifactError([str(path)], hint)


def _read_text(path: Path, hint: str | None = None) -> str:
    try:
        return Path(path).read_text()
    except FileNotFoundError as error:
        raise _missing(path, hint) from error
    except OSError as error:
        raise ArtifactError(f"cannot read {path}: {error}") from error


def _write_text(path: Path, text: str) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text)
    except OSError as error:
        raise ArtifactError(f"cannot write {path}: {error}") from error
    logger.debug("wrote %s", path)


def read_json(cls: type[ModelT], path: Path, hint: str | None = None) -> ModelT:
    """Load a pydantic model; malformed content raises pydantic's ValidationError"""
    return cls.model_validate_json(_read_text(path, hint))


def write_json(model: BaseModel, path: Path) -> None:
    _write_text(path, model.model_dump_json(indent=2) + "\n")


def read_model(path: Path) -> IsingModel:
    return read_json(IsingModelFile, path).to_model()


def write_model(model: IsingModel, path: Path) -> None:
    write_json(model.to_file(), path)


def read_observables(path: Path) -> ObservableSet:
    return read_json(ObservableSetFile, path).to_set()


def write_observables(observed: ObservableSet, path: Path) -> None:
    write_json(ObservableSetFile.from_set(observed), path)


def pack_bits(bits: np.ndarray) -> str:
    return base64.b64encode(np.packbits(bits, bitorder="little").tobytes()).decode("ascii")


def unpack_bits(text: str, n: int) -> np.ndarray:
    packed = np.frombuffer(base64.b64decode(text, validate=True), dtype=np.uint8)
    if packed.size != (n + 7) // 8:
        raise ValueError(f"expected {(n + 7) // 8} packed bytes for {n} ions, got {packed.size}")
    return np.unpackbits(packed, count=n, bitorder="little")


def write_dataset(dataset: Dataset, path: Path) -> None:
    """JSON lines: header, then one record per trial in dataset order"""
    header = DatasetHeader(n=dataset.n, times=dataset.times.tolist(), echo=dataset.echo,
                           groups=dataset.groups)
    lines = [header.model_dump_json()]
    for k in range(len(dataset)):
        lines.append(json.dumps({
            "ti": int(dataset.time_index[k]),
            "g": int(dataset.group[k]),
            "bits": pack_bits(dataset.bits[k]),
            "cool": pack_bits(dataset.cooling[k]),
        }))
    _write_text(path, "\n".join(lines) + "\n")


def read_dataset(path: Path) -> Dataset:
    """Parse a dataset file; any malformed line is an artifact error"""
    lines = [line for line in _read_text(path).splitlines() if line.strip()]
    if not lines:
        raise ArtifactError(f"{path} is empty")
    try:
        header = DatasetHeader.model_validate_json(lines[0])
        records = [RecordLine.model_validate_json(line) for line in lines[1:]]
        bits = [unpack_bits(r.bits, header.n) for r in records]
        cooling = [unpack_bits(r.cool, header.n) for r in records]
    except (ValidationError, ValueError) as error:
        raise ArtifactError(f"malformed dataset file {path}: {error}") from error
    empty = np.zeros((0, header.n), dtype=np.uint8)
    return Dataset(
        n=header.n,
        times=header.times,
        echo=header.echo,
        groups=header.groups,
        time_index=[r.ti for r in records],
        group=[r.g for r in records],
        bits=np.array(bits, dtype=np.uint8) if bits else empty,
        cooling=np.array(cooling, dtype=np.uint8) if cooling else empty,
    )


def read_positions(path: Path) -> np.ndarray:
    """(n, 2) array of (x, z) in microns from a CSV with columns ion, x, z"""
    try:
        frame = pd.read_csv(path)
    except FileNotFoundError as error:
        raise _missing(path, None) from error
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as error:
        raise ArtifactError(f"cannot read positions from {path}: {error}") from error
    if not {"ion", "x", "z"} <= set(frame.columns):
        raise InputValidationError(f"{path} needs the columns ion, x, z (microns)")
    frame = frame.sort_values("ion")
    if not np.array_equal(frame["ion"].to_numpy(), np.arange(len(frame))):
        raise InputValidationError(f"{path} must list ions 0..n-1 exactly once")
    return frame[["x", "z"]].to_numpy(dtype=float)


def write_positions(positions_um: np.ndarray, path: Path) -> None:
    frame = pd.DataFrame({"ion": np.arange(positions_um.shape[0]),
                          "x": positions_um[:, 0], "z": positions_um[:, 1]})
    write_table(frame, path)


def write_table(frame: pd.DataFrame, path: Path) -> None:
    """CSV without the index; fixed float format so reruns are byte-identical"""
    _write_text(path, frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n"))
