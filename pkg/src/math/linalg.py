"""
Dense Factorizations and the L_gamma Penalty

SVD contract, the exponential rank surrogate phi(x) = 1 - exp(-x / gamma),
its gradient, the matrix gamma-norm and generalized weighted singular
value thresholding (WSVT).
"""
from dataclasses import dataclass
from typing import Sequence, Union
import logging

import numpy as np
import scipy.linalg

from src.errors import DimensionError, NumericalError

logger = logging.getLogger(__name__)

# Singular values below this fraction of sigma_max count as zero.
RANK_RTOL = 1e-12


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD: m == U @ diag(sigma) @ V.T with t = min(p, q)."""
    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


@dataclass(frozen=True)
class WeightVector:
    """
    Nonnegative, nondecreasing shrinkage weights for WSVT.

    The ordering is the hypothesis under which WSVT is globally optimal.
    """
    weights: np.ndarray

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.float64).ravel()
        if np.any(~np.isfinite(w)):
            raise NumericalError("WSVT weights must be finite")
        if np.any(w < 0):
            raise ValueError(f"WSVT weights must be nonnegative, got min {w.min()}")
        if w.size > 1:
            slack = 1e-12 * max(1.0, float(w.max()))
            if np.any(np.diff(w) < -slack):
                raise ValueError("WSVT weights must be nondecreasing")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_singular_values(cls, sigma: Sequence[float], gamma: float, scale: float = 1.0) -> "WeightVector":
        """
        Weights scale * grad_phi(sigma_i) for nonincreasing sigma.

        grad_phi is decreasing, so nonincreasing sigma gives nondecreasing
        weights; the constructor asserts it.
        """
        return cls(scale * grad_phi(np.asarray(sigma, dtype=np.float64), gamma))

    def __len__(self) -> int:
        return self.weights.size


def _check_gamma(gamma: float):
    if not gamma > 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")


def _as_finite_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise DimensionError(f"Expected a matrix, got an array with shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NumericalError("SVD input contains non-finite entries")
    return m


def svd(m) -> SvdFactors:
    """Thin SVD with sigma nonincreasing; falls back to gesvd if gesdd fails."""
    m = _as_finite_matrix(m)
    try:
        U, s, Vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        logger.warning(f"gesdd did not converge on a {m.shape} matrix, retrying with gesvd")
        U, s, Vt = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
    return SvdFactors(U=U, sigma=s, V=Vt.T)


def singular_values(m) -> np.ndarray:
    m = _as_finite_matrix(m)
    if m.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(m)


def numerical_rank(m, rtol: float = RANK_RTOL) -> int:
    s = singular_values(m)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def phi(x: Union[float, np.ndarray], gamma: float) -> Union[float, np.ndarray]:
    """1 - exp(-x / gamma), in [0, 1) for x >= 0."""
    _check_gamma(gamma)
    value = -np.expm1(-np.asarray(x, dtype=np.float64) / gamma)
    return value if np.ndim(x) else float(value)


def grad_phi(x: Union[float, np.ndarray], gamma: float) -> Union[float, np.ndarray]:
    """(1 / gamma) * exp(-x / gamma): positive and strictly decreasing in x."""
    _check_gamma(gamma)
    value = np.exp(-np.asarray(x, dtype=np.float64) / gamma) / gamma
    return value if np.ndim(x) else float(value)


def gamma_norm(m, gamma: float) -> float:
    """||m||_gamma = sum_t (1 - exp(-sigma_t / gamma))."""
    _check_gamma(gamma)
    s = singular_values(m)
    return float(np.sum(phi(s, gamma))) if s.size else 0.0


def wsvt(p_mat, weights: Union[WeightVector, Sequence[float]]) -> np.ndarray:
    """
    Generalized weighted singular value thresholding.

    Returns U diag(max(sigma_i - w_i, 0)) V^T, the global minimizer of
    sum_i w_i sigma_i(Z) + 0.5 * ||Z - p_mat||_F^2 for nondecreasing w.
    """
    if not isinstance(weights, WeightVector):
        weights = WeightVector(np.asarray(weights, dtype=np.float64))
    p_mat = _as_finite_matrix(p_mat)
    t = min(p_mat.shape)
    if len(weights) != t:
        raise DimensionError(f"WSVT needs {t} weights for a {p_mat.shape} matrix, got {len(weights)}")

    factors = svd(p_mat)
    shrunk = np.maximum(factors.sigma - weights.weights, 0.0)
    return (factors.U * shrunk) @ factors.V.T


def relaxed_objective(z, p_mat, weights: Union[WeightVector, Sequence[float]]) -> float:
    """sum_i w_i sigma_i(z) + 0.5 * ||z - p_mat||_F^2, the problem WSVT solves."""
    w = weights.weights if isinstance(weights, WeightVector) else np.asarray(weights, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    return float(np.dot(w, singular_values(z)) + 0.5 * np.sum((z - np.asarray(p_mat)) ** 2))
