"""Array field types shared by the domain models"""
from typing import Annotated, Any

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _frozen_float_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=float)
    array.setflags(write=False)
    return array


def _frozen_int_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.int64)
    array.setflags(write=False)
    return array


def _frozen_bit_array(value: Any) -> np.ndarray:
    array = np.array(value, dtype=np.uint8)
    if array.size and array.max() > 1:
        raise ValueError("Bit arrays may only contain 0 and 1")
    array.setflags(write=False)
    return array


def _to_list(array: np.ndarray) -> list:
    return array.tolist()


FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_float_array),
    PlainSerializer(_to_list, return_type=list),
]
IntArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_int_array),
    PlainSerializer(_to_list, return_type=list),
]
BitArray = Annotated[
    np.ndarray,
    BeforeValidator(_frozen_bit_array),
    PlainSerializer(_to_list, return_type=list),
]
