"""
Dense N-way Tensor Core

Value types and the fold/unfold algebra every other module builds on.

Element order is lexicographic with the FIRST index varying fastest
(column-major generalization), so the mode-0 unfolding is a plain reshape.
Modes are 0-based here; files and the CLI use 1-based modes.
"""
import math
from dataclasses import dataclass
from typing import Sequence, Tuple, Union
import logging

import numpy as np

from src.errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)

Shape = Tuple[int, ...]


def _check_shape(shape: Sequence[int]) -> Shape:
    shape = tuple(int(s) for s in shape)
    if len(shape) < 1:
        raise DimensionError("Tensor shape needs at least one mode")
    if any(s < 1 for s in shape):
        raise DimensionError(f"Tensor extents must be >= 1, got {shape}")
    return shape


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.asfortranarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DenseTensor:
    """Immutable N-way array of float64 values."""
    array: np.ndarray

    def __post_init__(self):
        arr = np.array(self.array, dtype=np.float64, order="F", copy=True)
        _check_shape(arr.shape)
        object.__setattr__(self, "array", _frozen(arr))

    @classmethod
    def from_flat(cls, shape: Sequence[int], data: Sequence[float]) -> "DenseTensor":
        """Build from a flat sequence in first-index-fastest order."""
        shape = _check_shape(shape)
        flat = np.asarray(data, dtype=np.float64).ravel()
        if flat.size != math.prod(shape):
            raise DimensionError(
                f"Data length {flat.size} does not match shape {shape} "
                f"({math.prod(shape)} elements)"
            )
        return cls(flat.reshape(shape, order="F"))

    @classmethod
    def zeros(cls, shape: Sequence[int]) -> "DenseTensor":
        return cls(np.zeros(_check_shape(shape), order="F"))

    @property
    def shape(self) -> Shape:
        return self.array.shape

    @property
    def ndim(self) -> int:
        return self.array.ndim

    @property
    def size(self) -> int:
        return self.array.size

    @property
    def data(self) -> np.ndarray:
        """Flat view in lexicographic (first index fastest) order."""
        return self.array.ravel(order="F")

    def __eq__(self, other) -> bool:
        if not isinstance(other, DenseTensor):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.array, other.array))


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """The observed index set Omega as a same-shape boolean tensor."""
    observed: np.ndarray

    def __post_init__(self):
        arr = np.array(self.observed, dtype=bool, order="F", copy=True)
        _check_shape(arr.shape)
        object.__setattr__(self, "observed", _frozen(arr))

    @classmethod
    def full(cls, shape: Sequence[int]) -> "ObservationMask":
        return cls(np.ones(_check_shape(shape), dtype=bool))

    @classmethod
    def empty(cls, shape: Sequence[int]) -> "ObservationMask":
        return cls(np.zeros(_check_shape(shape), dtype=bool))

    @property
    def shape(self) -> Shape:
        return self.observed.shape

    @property
    def count(self) -> int:
        return int(self.observed.sum())

    @property
    def sampling_rate(self) -> float:
        return self.count / self.observed.size

    def complement(self) -> "ObservationMask":
        return ObservationMask(~self.observed)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ObservationMask):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self.observed, other.observed))


@dataclass(frozen=True)
class ModeMatrix:
    """Mode-n unfolding: rows are I_n, columns are mode-n fibers."""
    mode: int
    matrix: np.ndarray

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]


def _check_mode(mode: int, ndim: int) -> int:
    if not 0 <= mode < ndim:
        raise DimensionError(f"Mode {mode} out of range for a {ndim}-way tensor")
    return mode


def unfold_array(arr: np.ndarray, mode: int) -> np.ndarray:
    """Raw-array unfolding used on hot paths (no validation)."""
    return np.reshape(np.moveaxis(arr, mode, 0), (arr.shape[mode], -1), order="F")


def fold_array(mat: np.ndarray, shape: Sequence[int], mode: int) -> np.ndarray:
    """Raw-array inverse of unfold_array."""
    full_shape = list(shape)
    mode_dim = full_shape.pop(mode)
    full_shape.insert(0, mode_dim)
    return np.moveaxis(np.reshape(mat, full_shape, order="F"), 0, mode)


def inner_product(a: DenseTensor, b: DenseTensor) -> float:
    if a.shape != b.shape:
        raise DimensionError(f"Inner product of mismatched shapes {a.shape} and {b.shape}")
    return float(np.dot(a.data, b.data))


def frobenius_norm(a: DenseTensor) -> float:
    return math.sqrt(inner_product(a, a))


def unfold(a: DenseTensor, mode: int) -> ModeMatrix:
    """
    Mode-n unfolding.

    Column j holds the fiber whose fixed indices sit at lexicographic
    position j, earlier indices varying fastest.
    """
    _check_mode(mode, a.ndim)
    return ModeMatrix(mode=mode, matrix=unfold_array(a.array, mode).copy())


def fold(m: Union[ModeMatrix, np.ndarray], shape: Sequence[int], mode: int) -> DenseTensor:
    """Inverse of unfold: fold(unfold(a, n), a.shape, n) == a exactly."""
    shape = _check_shape(shape)
    _check_mode(mode, len(shape))
    mat = m.matrix if isinstance(m, ModeMatrix) else np.asarray(m, dtype=np.float64)
    expected = (shape[mode], math.prod(shape) // shape[mode])
    if mat.shape != expected:
        raise DimensionError(
            f"Matrix of shape {mat.shape} cannot fold into {shape} along mode {mode} "
            f"(expected {expected})"
        )
    return DenseTensor(fold_array(mat, shape, mode))


def mode_product(a: DenseTensor, matrix: np.ndarray, mode: int) -> DenseTensor:
    """Mode-n product a x_n matrix, replacing extent I_n with matrix.shape[0]."""
    _check_mode(mode, a.ndim)
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[1] != a.shape[mode]:
        raise DimensionError(
            f"Matrix of shape {matrix.shape} cannot multiply mode {mode} of extent {a.shape[mode]}"
        )
    new_shape = list(a.shape)
    new_shape[mode] = matrix.shape[0]
    return DenseTensor(fold_array(matrix @ unfold_array(a.array, mode), new_shape, mode))


def project(a: DenseTensor, mask: ObservationMask) -> DenseTensor:
    """P_Omega: keep observed entries, zero the rest."""
    if a.shape != mask.shape:
        raise DimensionError(f"Mask shape {mask.shape} does not match tensor shape {a.shape}")
    return DenseTensor(np.where(mask.observed, a.array, 0.0))


def sample_mask(shape: Sequence[int], sr: float, seed: int) -> ObservationMask:
    """
    Draw round(sr * total) observed positions uniformly without replacement.

    Args:
        shape: Tensor extents.
        sr: Sampling rate in [0, 1].
        seed: Seed for numpy's default generator; same seed, same mask.
    """
    shape = _check_shape(shape)
    if not 0.0 <= sr <= 1.0:
        raise ValueError(f"Sampling rate {sr} outside [0, 1]")
    total = math.prod(shape)
    count = min(total, int(math.floor(sr * total + 0.5)))

    rng = np.random.default_rng(seed)
    flat = np.zeros(total, dtype=bool)
    flat[rng.choice(total, size=count, replace=False)] = True
    logger.debug(f"Sampled mask {shape} at SR {sr}: {count}/{total} observed")
    return ObservationMask(flat.reshape(shape, order="F"))


def relative_error(est: DenseTensor, ref: DenseTensor) -> float:
    if est.shape != ref.shape:
        raise DimensionError(f"Cannot compare shapes {est.shape} and {ref.shape}")
    ref_norm = float(np.linalg.norm(ref.data))
    if ref_norm == 0.0:
        raise NumericalError("Relative error undefined for a zero reference tensor")
    return float(np.linalg.norm(est.data - ref.data)) / ref_norm
