"""Input validation helpers shared across modules."""

from __future__ import annotations

import numbers

import numpy as np

from .exceptions import ParameterError


def check_1d(x, *, dtype=None, name="x", min_len=1) -> np.ndarray:
    """Coerce ``x`` to a contiguous 1-D array and check its length."""
    arr = np.ascontiguousarray(x, dtype=dtype)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be 1-D, got shape {arr.shape}")
    if arr.size < min_len:
        raise ParameterError(f"{name} needs at least {min_len} elements, got {arr.size}")
    if np.issubdtype(arr.dtype, np.inexact) and not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    return arr


def check_bits(bits, name="bits") -> np.ndarray:
    arr = np.ascontiguousarray(bits)
    if arr.ndim != 1:
        raise ParameterError(f"{name} must be 1-D")
    if arr.size and not np.all((arr == 0) | (arr == 1)):
        raise ParameterError(f"{name} must contain only 0/1")
    return arr.astype(np.int8)


def check_scalar(value, name, *, lo=None, hi=None, lo_inclusive=True, hi_inclusive=True,
                 integer=False):
    """Validate a scalar against an interval; returns the value unchanged."""
    kind = numbers.Integral if integer else numbers.Real
    if not isinstance(value, kind) or isinstance(value, bool):
        raise ParameterError(f"{name} must be {'an integer' if integer else 'real'}, got {value!r}")
    if lo is not None and (value < lo or (not lo_inclusive and value == lo)):
        raise ParameterError(f"{name}={value} below allowed range")
    if hi is not None and (value > hi or (not hi_inclusive and value == hi)):
        raise ParameterError(f"{name}={value} above allowed range")
    return value


def check_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)
