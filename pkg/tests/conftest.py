import math

import numpy as np
import pytest

from src.etl.models import LratmConfig
from src.math.solver import SolverState
from src.math.synthetic import synth_lowrank
from src.math.tensor import DenseTensor, sample_mask


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


@pytest.fixture
def small_problem():
    """Exact rank-(2,2,2) tensor, half of its entries observed."""
    truth = synth_lowrank((12, 10, 8), (2, 2, 2), seed=3)
    mask = sample_mask(truth.shape, 0.5, seed=4)
    return truth, mask


def resolved_config(shape, ranks, **overrides) -> LratmConfig:
    return LratmConfig(ranks=list(ranks), **overrides).resolve(shape)


def random_state(rng, shape, ranks, scale: float = 1.0) -> SolverState:
    """Arbitrary (not necessarily consistent) iterates with the right dimensions."""
    total = math.prod(shape)
    A, X = [], []
    for n, r in enumerate(ranks):
        A.append(rng.standard_normal((shape[n], r)) * scale)
        X.append(rng.standard_normal((r, total // shape[n])) * scale)
    return SolverState(
        Y=DenseTensor(rng.standard_normal(shape) * scale),
        A=A,
        X=X,
        Z=[rng.standard_normal(x.shape) * scale for x in X],
        J=[rng.standard_normal(a.shape) * scale for a in A],
        GammaX=[rng.standard_normal(x.shape) * 0.1 for x in X],
        GammaA=[rng.standard_normal(a.shape) * 0.1 for a in A],
    )
