"""
LRATM Completion Solver

Low-rank approximation of every mode unfolding Y_(n) ~ A_n X_n, with both
factors penalized by the gamma-norm rank surrogate. The splitting X = Z,
A = J is handled by an augmented Lagrangian; each block is minimized in
turn over a proximal upper bound (block successive upper-bound
minimization).

One sweep, per mode n:  Z -> X -> J -> A  (modes are independent),
then the completed tensor Y (a barrier over all modes), then the
multipliers Gamma^X, Gamma^A. Modes with a factor penalty finish by
re-splitting A_n X_n into factors with equal singular values; the
penalties are not invariant to how the product is split, and without
this A_n keeps shrinking while X_n grows.

With tau = lambda = 0 and frozen multipliers the sweep reduces to damped
alternating least squares on the parallel matrix factorization (Tmac) model.
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple
import logging

import numpy as np
import scipy.linalg

from src.errors import DimensionError, NumericalError
from src.etl.models import LratmConfig
from src.math.linalg import WeightVector, gamma_norm, singular_values, svd, wsvt
from src.math.synthetic import estimate_ranks
from src.math.tensor import (
    DenseTensor,
    ObservationMask,
    fold_array,
    project,
    unfold_array,
)

logger = logging.getLogger(__name__)

# Floor for the denominator of the relative Y change.
Y_NORM_FLOOR = 1e-12
# Smallest singular value ratio of A_n X_n that still gets rebalanced.
RANK_TOL = 1e-10

IterationCallback = Callable[["SolverState", float], None]


@dataclass(eq=False)
class SolverState:
    """All iterates of one run. Lists are indexed by mode."""
    Y: DenseTensor
    A: List[np.ndarray]
    X: List[np.ndarray]
    Z: List[np.ndarray]
    J: List[np.ndarray]
    GammaX: List[np.ndarray]
    GammaA: List[np.ndarray]
    iter: int = 0
    objective_history: List[float] = field(default_factory=list)
    y_change_history: List[float] = field(default_factory=list)

    @property
    def shape(self) -> Tuple[int, ...]:
        return self.Y.shape

    @property
    def n_modes(self) -> int:
        return self.Y.ndim

    def y_unfold(self, n: int) -> np.ndarray:
        return unfold_array(self.Y.array, n)

    def check_dimensions(self, ranks: Sequence[int]):
        """Raise DimensionError unless every factor matches `ranks` and the tensor shape."""
        total = self.Y.size
        for n in range(self.n_modes):
            rows, r = self.shape[n], ranks[n]
            cols = total // rows
            expected = {
                "A": (rows, r), "J": (rows, r), "GammaA": (rows, r),
                "X": (r, cols), "Z": (r, cols), "GammaX": (r, cols),
            }
            for name, want in expected.items():
                got = getattr(self, name)[n].shape
                if got != want:
                    raise DimensionError(f"{name}[{n}] has shape {got}, expected {want}")


@dataclass
class CompletionResult:
    tensor: DenseTensor
    iterations: int
    converged: bool
    objective_history: List[float]
    y_change_history: List[float]
    initial_objective: float = float("nan")
    ranks: List[int] = field(default_factory=list)
    elapsed_seconds: float = 0.0

    @property
    def final_objective(self) -> float:
        return self.objective_history[-1] if self.objective_history else self.initial_objective


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------
def objective(state: SolverState, config: LratmConfig) -> float:
    """sum_n alpha_n/2 ||Y_(n) - A_n X_n||_F^2 + tau_n ||X_n||_gX + lambda_n ||A_n||_gA."""
    total = 0.0
    for n in range(state.n_modes):
        residual = state.y_unfold(n) - state.A[n] @ state.X[n]
        total += 0.5 * config.alpha[n] * float(np.sum(residual * residual))
        if config.tau[n]:
            total += config.tau[n] * gamma_norm(state.X[n], config.gamma_X)
        if config.lam[n]:
            total += config.lam[n] * gamma_norm(state.A[n], config.gamma_A)
    return total


# ---------------------------------------------------------------------------
# Block updates
# ---------------------------------------------------------------------------
def _spd_solve(lhs: np.ndarray, rhs: np.ndarray, block: str) -> np.ndarray:
    try:
        return scipy.linalg.solve(lhs, rhs, assume_a="pos")
    except (ValueError, np.linalg.LinAlgError) as e:
        raise NumericalError(f"{block} update failed: {e}") from e


def update_Z(state: SolverState, n: int, config: LratmConfig) -> np.ndarray:
    """WSVT of X_n + Gamma^X_n / rho_n, weights from the singular values of the current Z_n."""
    rho = config.rho[n]
    p_mat = state.X[n] + state.GammaX[n] / rho
    if config.tau[n] == 0:
        return p_mat
    weights = WeightVector.from_singular_values(
        singular_values(state.Z[n]), config.gamma_X, scale=config.tau[n] / rho
    )
    return wsvt(p_mat, weights)


def update_X(state: SolverState, n: int, config: LratmConfig, y_unfold: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Solve (alpha A^T A + 2 rho I) X = alpha A^T Y_(n) + rho (X^k + Z - Gamma^X / rho).

    Expects state.Z[n] to already hold the new Z_n.
    """
    if y_unfold is None:
        y_unfold = state.y_unfold(n)
    alpha, rho = config.alpha[n], config.rho[n]
    A = state.A[n]
    lhs = alpha * (A.T @ A) + 2.0 * rho * np.eye(A.shape[1])
    rhs = alpha * (A.T @ y_unfold) + rho * (state.X[n] + state.Z[n]) - state.GammaX[n]
    return _spd_solve(lhs, rhs, f"X[{n}]")


def update_gamma_X(state: SolverState, n: int, step: float = 1.0) -> np.ndarray:
    return state.GammaX[n] + step * (state.X[n] - state.Z[n])


def update_J(state: SolverState, n: int, config: LratmConfig) -> np.ndarray:
    """WSVT of A_n + Gamma^A_n / rho_n, weights from the singular values of the current J_n."""
    rho = config.rho[n]
    q_mat = state.A[n] + state.GammaA[n] / rho
    if config.lam[n] == 0:
        return q_mat
    weights = WeightVector.from_singular_values(
        singular_values(state.J[n]), config.gamma_A, scale=config.lam[n] / rho
    )
    return wsvt(q_mat, weights)


def update_A(state: SolverState, n: int, config: LratmConfig, y_unfold: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Solve A (alpha X X^T + 2 rho I) = alpha Y_(n) X^T + rho (J - Gamma^A / rho + A^k).

    Expects state.X[n] and state.J[n] to already hold the new values.
    """
    if y_unfold is None:
        y_unfold = state.y_unfold(n)
    alpha, rho = config.alpha[n], config.rho[n]
    X = state.X[n]
    gram = alpha * (X @ X.T) + 2.0 * rho * np.eye(X.shape[0])
    rhs = alpha * (y_unfold @ X.T) + rho * (state.J[n] + state.A[n]) - state.GammaA[n]
    # gram is symmetric, so A gram = rhs  <=>  gram A^T = rhs^T
    return _spd_solve(gram, rhs.T, f"A[{n}]").T


def update_gamma_A(state: SolverState, n: int, step: float = 1.0) -> np.ndarray:
    return state.GammaA[n] + step * (state.A[n] - state.J[n])


def rebalance_factors(state: SolverState, n: int) -> bool:
    """
    Re-split A_n X_n so both factors carry the same singular values.

    A_n = Q_A R_A and X_n^T = Q_X R_X; with R_A R_X^T = U S V^T the pair
    becomes (Q_A U S^(1/2), S^(1/2) V^T Q_X^T). Writing A_n -> A_n M, the
    split variables follow (J -> J M, Z -> M^-1 Z) and the multipliers
    transform dually, so every gap and every pairing <Gamma, gap> is kept.
    Returns False and leaves the mode alone when the product is rank deficient.
    """
    A, X = state.A[n], state.X[n]
    q_a, r_a = np.linalg.qr(A)
    q_x, r_x = np.linalg.qr(X.T)
    u, s, vt = np.linalg.svd(r_a @ r_x.T)
    if s.size == 0 or s[-1] <= RANK_TOL * s[0]:
        return False

    root = np.sqrt(s)
    M = scipy.linalg.solve_triangular(r_a, u * root)
    M_inv = (u.T @ r_a) / root[:, None]
    state.A[n] = q_a @ (u * root)
    state.X[n] = root[:, None] * (vt @ q_x.T)
    state.J[n] = state.J[n] @ M
    state.Z[n] = M_inv @ state.Z[n]
    state.GammaA[n] = state.GammaA[n] @ M_inv.T
    state.GammaX[n] = M.T @ state.GammaX[n]
    return True


def update_Y(state: SolverState, observed: DenseTensor, mask: ObservationMask, config: LratmConfig) -> DenseTensor:
    """
    Weighted average of the mode reconstructions and the previous Y on the
    unobserved entries; observed entries are copied from `observed`.
    """
    rho = float(np.mean(config.rho))
    shape = state.shape
    blend = rho * state.Y.array
    for n in range(state.n_modes):
        blend = blend + config.alpha[n] * fold_array(state.A[n] @ state.X[n], shape, n)
    blend = blend / (1.0 + rho)
    return DenseTensor(np.where(mask.observed, observed.array, blend))


# ---------------------------------------------------------------------------
# Initialization and sweeps
# ---------------------------------------------------------------------------
def _spectral_factors(y_unfold: np.ndarray, r: int) -> Tuple[np.ndarray, np.ndarray]:
    factors = svd(y_unfold)
    root = np.sqrt(factors.sigma[:r])
    return factors.U[:, :r] * root, root[:, None] * factors.V[:, :r].T


def init_state(observed: DenseTensor, mask: ObservationMask, config: LratmConfig) -> SolverState:
    """
    Y^0 = zero-filled observations; (A_n, X_n) spectral or seeded random;
    Z = X, J = A, multipliers zero. `config` must be resolved.
    """
    Y = project(observed, mask)
    rng = np.random.default_rng(config.seed)
    A, X = [], []
    for n, r in enumerate(config.ranks):
        y_n = unfold_array(Y.array, n)
        if config.init == "spectral":
            a, x = _spectral_factors(y_n, r)
        else:
            scale = 1.0 / np.sqrt(r)
            a = rng.standard_normal((y_n.shape[0], r)) * scale
            x = rng.standard_normal((r, y_n.shape[1])) * scale
        A.append(a)
        X.append(x)

    state = SolverState(
        Y=Y,
        A=A,
        X=X,
        Z=[x.copy() for x in X],
        J=[a.copy() for a in A],
        GammaX=[np.zeros_like(x) for x in X],
        GammaA=[np.zeros_like(a) for a in A],
    )
    state.check_dimensions(config.ranks)
    return state


def _mode_block(state: SolverState, n: int, config: LratmConfig) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Z, X, J, A for mode n. Reads only mode-n blocks and the current Y."""
    y_n = state.y_unfold(n)
    local = SolverState(
        Y=state.Y,
        A=list(state.A), X=list(state.X), Z=list(state.Z), J=list(state.J),
        GammaX=state.GammaX, GammaA=state.GammaA,
    )
    local.Z[n] = update_Z(local, n, config)
    local.X[n] = update_X(local, n, config, y_n)
    local.J[n] = update_J(local, n, config)
    local.A[n] = update_A(local, n, config, y_n)
    return local.Z[n], local.X[n], local.J[n], local.A[n]


def sweep(
    state: SolverState,
    observed: DenseTensor,
    mask: ObservationMask,
    config: LratmConfig,
    executor: Optional[ThreadPoolExecutor] = None,
) -> SolverState:
    """
    One full pass over all blocks. Mutates and returns `state`.

    The multiplier ascent step is rho_n unless config.dual_step is set;
    dual_step = 1 gives the literal Gamma += X - Z update.
    """
    modes = range(state.n_modes)
    if executor is None:
        blocks = [_mode_block(state, n, config) for n in modes]
    else:
        blocks = list(executor.map(lambda n: _mode_block(state, n, config), modes))

    for n, (z, x, j, a) in zip(modes, blocks):
        state.Z[n], state.X[n], state.J[n], state.A[n] = z, x, j, a

    previous = state.Y
    state.Y = update_Y(state, observed, mask, config)

    if not config.freeze_multipliers:
        for n in modes:
            step = config.dual_step if config.dual_step is not None else config.rho[n]
            state.GammaX[n] = update_gamma_X(state, n, step)
            state.GammaA[n] = update_gamma_A(state, n, step)

    if config.rebalance:
        for n in modes:
            if config.tau[n] or config.lam[n]:
                rebalance_factors(state, n)

    change = float(np.linalg.norm(state.Y.data - previous.data))
    change /= max(float(np.linalg.norm(previous.data)), Y_NORM_FLOOR)

    state.iter += 1
    state.objective_history.append(objective(state, config))
    state.y_change_history.append(change)
    return state


# ---------------------------------------------------------------------------
# Driver
# ---------------------------------------------------------------------------
class LratmSolver:
    """
    Runs init_state then sweeps until the relative Y change drops below tol
    or max_iter sweeps have run.

    Usage:
        solver = LratmSolver(LratmConfig(ranks=[3, 3, 3]))
        result = solver.solve(observed, mask)
    """

    def __init__(self, config: Optional[LratmConfig] = None, callback: Optional[IterationCallback] = None):
        self.config = config or LratmConfig()
        self.callback = callback

    def resolve_config(self, observed: DenseTensor, mask: ObservationMask) -> LratmConfig:
        ranks = None
        if self.config.ranks is None:
            ranks = estimate_ranks(project(observed, mask), self.config.rank_fraction)
            logger.info(f"No ranks configured; estimated {ranks} from the observed tensor")
        return self.config.resolve(observed.shape, ranks)

    def solve(self, observed: DenseTensor, mask: ObservationMask) -> CompletionResult:
        if observed.shape != mask.shape:
            raise DimensionError(f"Mask shape {mask.shape} does not match tensor shape {observed.shape}")
        if not np.all(np.isfinite(observed.array[mask.observed])):
            raise NumericalError("Observed entries contain non-finite values")

        config = self.resolve_config(observed, mask)
        observed = project(observed, mask)
        label = "Tmac" if config.is_tmac else "LRATM"
        logger.info(
            f"{label}: shape {observed.shape}, SR {mask.sampling_rate:.4f}, "
            f"ranks {config.ranks}, max_iter {config.max_iter}, tol {config.tol:g}"
        )
        if mask.count == 0:
            logger.warning("Mask has no observed entries; the completion will be all zeros after max_iter sweeps")

        start = time.perf_counter()
        state = init_state(observed, mask, config)
        initial_objective = objective(state, config)
        converged = False

        executor = ThreadPoolExecutor(max_workers=config.workers) if config.workers > 1 else None
        try:
            while state.iter < config.max_iter:
                sweep(state, observed, mask, config, executor)
                elapsed = time.perf_counter() - start
                logger.debug(
                    f"iter {state.iter}: objective {state.objective_history[-1]:.10g}, "
                    f"Y change {state.y_change_history[-1]:.3e}"
                )
                if self.callback is not None:
                    self.callback(state, elapsed)
                # With nothing observed Y stays zero and its change is no signal.
                if mask.count > 0 and state.y_change_history[-1] < config.tol:
                    converged = True
                    break
        finally:
            if executor is not None:
                executor.shutdown()

        elapsed = time.perf_counter() - start
        if converged:
            logger.info(
                f"{label} converged after {state.iter} iterations in {elapsed:.2f}s, "
                f"objective {state.objective_history[-1]:.10g}"
            )
        else:
            logger.warning(
                f"{label} stopped at max_iter={config.max_iter} without reaching tol "
                f"(last Y change {state.y_change_history[-1]:.3e})"
            )

        return CompletionResult(
            tensor=state.Y,
            iterations=state.iter,
            converged=converged,
            objective_history=list(state.objective_history),
            y_change_history=list(state.y_change_history),
            initial_objective=initial_objective,
            ranks=list(config.ranks),
            elapsed_seconds=elapsed,
        )


def solve(
    observed: DenseTensor,
    mask: ObservationMask,
    config: Optional[LratmConfig] = None,
    callback: Optional[IterationCallback] = None,
) -> CompletionResult:
    return LratmSolver(config, callback).solve(observed, mask)
