"""
Rank Estimation and Synthetic Low-Rank Tensors

Desk-scale problem generation for the solver: Tucker-style tensors of known
multilinear rank, and the per-mode rank heuristic used when no ranks are given.
"""
import math
from typing import List, Sequence
import logging

import numpy as np

from src.errors import DimensionError
from src.math.tensor import DenseTensor, mode_product

logger = logging.getLogger(__name__)


def feasible_rank(shape: Sequence[int], mode: int) -> int:
    """min(I_n, prod of the other extents): the largest possible n-rank."""
    return min(shape[mode], math.prod(shape) // shape[mode])


def estimate_ranks(t: DenseTensor, fraction: float) -> List[int]:
    """
    r_n = max(1, round(fraction * min(I_n, prod_{j != n} I_j))), rounding half up.
    """
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"Rank fraction must be in (0, 1), got {fraction}")
    ranks = [max(1, int(math.floor(fraction * feasible_rank(t.shape, n) + 0.5))) for n in range(t.ndim)]
    logger.debug(f"Estimated ranks {ranks} for shape {t.shape} at fraction {fraction}")
    return ranks


def synth_lowrank(shape: Sequence[int], ranks: Sequence[int], seed: int) -> DenseTensor:
    """
    Random tensor with multilinear rank at most `ranks`.

    A Gaussian core of size r_1 x ... x r_N is multiplied along every mode
    by an I_n x r_n factor with orthonormal columns (QR of a Gaussian draw).
    The core is scaled so the RMS entry of the result is 1 in expectation.
    """
    shape = tuple(int(s) for s in shape)
    ranks = tuple(int(r) for r in ranks)
    if len(ranks) != len(shape):
        raise DimensionError(f"Got {len(ranks)} ranks for a {len(shape)}-way shape {shape}")
    for n, r in enumerate(ranks):
        if not 1 <= r <= feasible_rank(shape, n):
            raise DimensionError(f"Rank {r} for mode {n + 1} outside [1, {feasible_rank(shape, n)}]")

    rng = np.random.default_rng(seed)
    core = rng.standard_normal(ranks)
    # Orthonormal factors preserve the Frobenius norm, so E ||T||_F^2 = prod(shape).
    core *= math.sqrt(math.prod(shape) / math.prod(ranks))

    result = DenseTensor(core)
    for n, (extent, r) in enumerate(zip(shape, ranks)):
        q, _ = np.linalg.qr(rng.standard_normal((extent, r)))
        result = mode_product(result, q, n)
    return result
