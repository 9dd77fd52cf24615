"""Real and complex 2D grids shared by every stage of the pipeline.

Samples are stored row-major as a read-only ``(height, width)`` array and
indexed ``(row, col)``. NaN and Inf are rejected at construction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvariantError, SizeError


def _frozen(arr):
    arr.setflags(write=False)
    return arr


class ScalarField:
    """Immutable real-valued 2D grid.

    Parameters
    ----------
    data : array_like
        2D array of finite reals, shape ``(height, width)``.
    """

    __slots__ = ("_data",)
    __array_priority__ = 100

    def __init__(self, data):
        if isinstance(data, ScalarField):
            self._data = data._data
            return
        arr = np.array(data, dtype=np.float64, copy=True)
        if arr.ndim != 2:
            raise SizeError(f"field must be 2D, got shape {arr.shape}")
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise SizeError(f"field must be at least 1x1, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("field samples must be finite (NaN/Inf found)")
        self._data = _frozen(arr)

    @classmethod
    def from_samples(cls, width: int, height: int, samples) -> "ScalarField":
        samples = np.asarray(samples, dtype=np.float64).ravel()
        if width < 1 or height < 1:
            raise SizeError("width and height must be >= 1")
        if samples.size != width * height:
            raise SizeError(
                f"expected {width * height} samples for {width}x{height}, got {samples.size}"
            )
        return cls(samples.reshape(height, width))

    @classmethod
    def full(cls, width: int, height: int, value: float) -> "ScalarField":
        return cls(np.full((height, width), float(value)))

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    @property
    def samples(self) -> np.ndarray:
        """Flat row-major view of the samples."""
        return self._data.ravel()

    def __array__(self, dtype=None, copy=None):
        if dtype is None:
            return self._data
        return self._data.astype(dtype)

    def __len__(self):
        return self._data.size

    def __repr__(self):
        return f"ScalarField({self.width}x{self.height})"

    def __eq__(self, other):
        if not isinstance(other, ScalarField):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self._data, other._data)

    __hash__ = None

    def _binary(self, other, op):
        if isinstance(other, ScalarField):
            if other.shape != self.shape:
                raise SizeError(f"shape mismatch {self.shape} vs {other.shape}")
            other = other._data
        return ScalarField(op(self._data, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return ScalarField(np.subtract(other, self._data))

    def __mul__(self, other):
        return self._binary(other, np.multiply)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return self._binary(other, np.divide)

    def __neg__(self):
        return ScalarField(-self._data)

    def map(self, func) -> "ScalarField":
        """Apply an element-wise function and wrap the result."""
        return ScalarField(func(self._data))

    def crop(self, border: int) -> "ScalarField":
        if border <= 0:
            return self
        if 2 * border >= min(self.shape):
            raise SizeError(f"border {border} leaves nothing of a {self.width}x{self.height} field")
        return ScalarField(self._data[border:-border, border:-border])

    def stats(self) -> "FieldStats":
        d = self._data
        lo, hi = float(d.min()), float(d.max())
        # clamp: the rounded mean of a constant field can sit one ulp outside
        mean = min(max(field_mean(self), lo), hi)
        return FieldStats(mean=mean, min=lo, max=hi, stddev=float(d.std()))


class ComplexField:
    """Immutable complex-valued 2D grid (filter responses)."""

    __slots__ = ("_data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.complex128, copy=True)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise SizeError(f"complex field must be a non-empty 2D array, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise InvariantError("complex field samples must be finite")
        self._data = _frozen(arr)

    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def width(self) -> int:
        return self._data.shape[1]

    @property
    def height(self) -> int:
        return self._data.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self._data.shape

    def __repr__(self):
        return f"ComplexField({self.width}x{self.height})"

    def magnitude(self) -> ScalarField:
        return ScalarField(np.abs(self._data))

    def angle(self) -> ScalarField:
        """Argument of each sample in (-pi, pi]."""
        return ScalarField(wrap_to_pi(np.angle(self._data)))

    def real(self) -> ScalarField:
        return ScalarField(self._data.real)

    def imag(self) -> ScalarField:
        return ScalarField(self._data.imag)


@dataclass(frozen=True)
class FieldStats:
    mean: float
    min: float
    max: float
    stddev: float


def as_field(value) -> ScalarField:
    """Coerce an array-like or field into a :class:`ScalarField`."""
    if isinstance(value, ScalarField):
        return value
    return ScalarField(value)


def field_mean(f) -> float:
    """Arithmetic mean of all samples (compensated summation)."""
    data = np.asarray(f, dtype=np.float64)
    if data.size == 0:
        raise SizeError("mean of an empty field")
    return math.fsum(data.ravel()) / data.size


def wrap_to_pi(v):
    """Reduce angles to the half-open interval (-pi, pi].

    Works on scalars and arrays. ``-pi`` maps to ``pi``.
    """
    arr = np.asarray(v, dtype=np.float64)
    out = np.pi - np.mod(np.pi - arr, 2.0 * np.pi)
    # np.mod can round up to exactly 2*pi for tiny negative arguments
    out = np.where(out <= -np.pi, np.pi, out)
    if out.ndim == 0:
        return float(out)
    return out
