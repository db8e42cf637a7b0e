"""Dense d-way tensors with colexicographic (first-index-fastest) linearization.

Every reshape in the package that merges or splits tensor modes uses
``order="F"`` so that the first index varies fastest, both for rows and for
columns of an unfolding.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod
from typing import Sequence, Union

import numpy as np

REAL = np.float64
COMPLEX = np.complex128


def field_dtype(*arrays) -> np.dtype:
    """Common scalar field of the inputs: complex if any input is complex."""
    for a in arrays:
        if np.iscomplexobj(a):
            return np.dtype(COMPLEX)
    return np.dtype(REAL)


@dataclass(frozen=True)
class DenseTensor:
    """Full tensor of shape ``dims``; ``data`` is indexed as ``data[l1, ..., ld]``."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in (REAL, COMPLEX):
            arr = arr.astype(field_dtype(arr))
        object.__setattr__(self, "data", arr)

    @classmethod
    def from_vector(cls, vec, dims: Sequence[int]) -> "DenseTensor":
        vec = np.asarray(vec)
        if vec.size != prod(dims):
            raise ValueError(f"vector of length {vec.size} does not fit dims {tuple(dims)}")
        return cls(vec.reshape(tuple(dims), order="F"))

    @property
    def dims(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def vector(self) -> np.ndarray:
        """Entries in colexicographic order."""
        return self.data.reshape(-1, order="F")

    def norm(self) -> float:
        return float(np.linalg.norm(self.data.ravel()))

    def __add__(self, other: "DenseTensor") -> "DenseTensor":
        _check_dims(self.dims, other.dims)
        return DenseTensor(self.data + other.data)

    def __sub__(self, other: "DenseTensor") -> "DenseTensor":
        _check_dims(self.dims, other.dims)
        return DenseTensor(self.data - other.data)

    def __mul__(self, alpha) -> "DenseTensor":
        return DenseTensor(alpha * self.data)

    __rmul__ = __mul__


TensorLike = Union[DenseTensor, np.ndarray]


def as_array(X: TensorLike) -> np.ndarray:
    return X.data if isinstance(X, DenseTensor) else np.asarray(X)


def _check_dims(a, b):
    if tuple(a) != tuple(b):
        raise ValueError(f"dims mismatch: {tuple(a)} vs {tuple(b)}")


def unfold(X: TensorLike, i: int) -> np.ndarray:
    """The ``i``-th unfolding, a ``(n_1...n_i) x (n_{i+1}...n_d)`` matrix.

    ``i = 0`` gives a single row and ``i = d`` a single column.
    """
    arr = as_array(X)
    d = arr.ndim
    if not 0 <= i <= d:
        raise IndexError(f"unfolding index {i} outside 0..{d}")
    rows = prod(arr.shape[:i])
    return arr.reshape(rows, -1, order="F")


def refold(M, dims: Sequence[int], i: int) -> DenseTensor:
    """Inverse of :func:`unfold`."""
    M = np.asarray(M)
    dims = tuple(int(n) for n in dims)
    if not 0 <= i <= len(dims):
        raise IndexError(f"unfolding index {i} outside 0..{len(dims)}")
    expected = (prod(dims[:i]), prod(dims[i:]))
    if M.shape != expected:
        raise ValueError(f"matrix of shape {M.shape} is not unfolding {i} of dims {dims}")
    return DenseTensor(M.reshape(dims, order="F"))


def inner(X: TensorLike, Y: TensorLike):
    """Euclidean inner product, conjugate-linear in the first argument."""
    a, b = as_array(X), as_array(Y)
    _check_dims(a.shape, b.shape)
    return np.vdot(a.ravel(), b.ravel())


def norm(X: TensorLike) -> float:
    return float(np.linalg.norm(as_array(X).ravel()))
