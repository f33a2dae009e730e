import logging
import math
from typing import Dict, List, Literal, Optional, Sequence, Tuple

from pydantic import BaseModel, ConfigDict, Field, ValidationInfo, field_validator

from src.errors import ConfigError

logger = logging.getLogger(__name__)

TNSR_MAGIC = b"TNSR"
TENSOR_VERSION = 0x01
MASK_VERSION = 0x02

# Published gamma_A tuning per dataset and sampling rate (gamma_X fixed at 0.1).
GAMMA_A_PRESETS: Dict[str, Dict[float, float]] = {
    "suzie": {0.05: 2.3, 0.1: 2.5, 0.2: 2.7},
    "hall": {0.05: 1.7, 0.1: 2.6, 0.2: 2.6},
    "mri": {0.05: 1.3, 0.1: 2.5, 0.2: 3.0},
    "hsi": {0.025: 3.5, 0.05: 5.5, 0.1: 5.7},
}

PER_MODE_FIELDS = ("alpha", "tau", "lam", "rho")


def _all_finite(values: Sequence[float]) -> bool:
    return all(math.isfinite(x) for x in values)


def gamma_a_preset(dataset: str, sr: float) -> float:
    """gamma_A tuned for `dataset` at the tabulated sampling rate nearest to `sr`."""
    table = GAMMA_A_PRESETS.get(dataset.lower())
    if table is None:
        raise ConfigError(f"Unknown preset '{dataset}'. Choose from {sorted(GAMMA_A_PRESETS)}")
    nearest = min(table, key=lambda rate: abs(rate - sr))
    if not math.isclose(nearest, sr):
        logger.info(f"Preset {dataset}: no entry for SR {sr}, using SR {nearest}")
    return table[nearest]


class LratmConfig(BaseModel):
    """
    Solver hyperparameters.

    Per-mode fields are lists; a single value broadcasts to every mode.
    `ranks=None` means the ranks are estimated from the observed tensor
    with `rank_fraction`. Call resolve(shape) before solving.
    """
    model_config = ConfigDict(extra="forbid", populate_by_name=True, frozen=True)

    ranks: Optional[List[int]] = Field(None, description="n-rank estimate r_n per mode")
    alpha: Optional[List[float]] = Field(None, description="Mode weights, sum to 1; default 1/N")
    tau: List[float] = Field([0.01], description="Weight of ||X_n||_gamma")
    lam: List[float] = Field([0.01], alias="lambda", description="Weight of ||A_n||_gamma")
    gamma_X: float = Field(0.1, gt=0, allow_inf_nan=False, description="gamma inside ||X_n||_gamma")
    gamma_A: float = Field(2.5, gt=0, allow_inf_nan=False, description="gamma inside ||A_n||_gamma")
    rho: List[float] = Field([0.1], description="Per-mode proximal / ALM weight")
    max_iter: int = Field(500, ge=1)
    tol: float = Field(1e-5, gt=0, allow_inf_nan=False, description="Relative Y-change stopping threshold")
    init: Literal["spectral", "random"] = "spectral"
    seed: int = 0
    dual_step: Optional[float] = Field(None, gt=0, allow_inf_nan=False, description="Multiplier ascent step; None uses rho_n")
    freeze_multipliers: bool = False
    rebalance: bool = Field(True, description="Rebalance each penalized factor pair after a sweep")
    rank_fraction: float = Field(0.005, gt=0, lt=1)
    workers: int = Field(1, ge=1, description="Threads for the per-mode updates")

    @field_validator("ranks")
    @classmethod
    def validate_ranks(cls, v: Optional[List[int]]) -> Optional[List[int]]:
        if v is not None:
            if not v:
                raise ValueError("ranks must not be empty")
            if any(r < 1 for r in v):
                raise ValueError(f"ranks must be >= 1, got {v}")
        return v

    @field_validator("alpha")
    @classmethod
    def validate_alpha(cls, v: Optional[List[float]]) -> Optional[List[float]]:
        if v is None:
            return v
        if not v or not _all_finite(v) or any(a < 0 for a in v):
            raise ValueError(f"alpha must be a nonempty list of finite nonnegative weights, got {v}")
        if abs(math.fsum(v) - 1.0) > 1e-12:
            raise ValueError(f"alpha must sum to 1, got sum {math.fsum(v)!r}")
        return v

    @field_validator("tau", "lam")
    @classmethod
    def validate_penalty_weights(cls, v: List[float], info: ValidationInfo) -> List[float]:
        if not v or not _all_finite(v) or any(x < 0 for x in v):
            raise ValueError(f"{info.field_name} must be a nonempty list of finite values >= 0, got {v}")
        return v

    @field_validator("rho")
    @classmethod
    def validate_rho(cls, v: List[float]) -> List[float]:
        if not v or not _all_finite(v) or any(x <= 0 for x in v):
            raise ValueError(f"rho must be a nonempty list of finite values > 0, got {v}")
        return v

    def as_tmac(self) -> "LratmConfig":
        """Tmac baseline: both penalties off, multipliers frozen at zero."""
        return self.model_copy(update={
            "tau": [0.0] * len(self.tau),
            "lam": [0.0] * len(self.lam),
            "freeze_multipliers": True,
        })

    @property
    def is_tmac(self) -> bool:
        return self.freeze_multipliers and not any(self.tau) and not any(self.lam)

    def resolve(self, shape: Sequence[int], ranks: Optional[Sequence[int]] = None) -> "LratmConfig":
        """
        Expand per-mode lists to N entries and clamp ranks to the feasible range.

        Args:
            shape: Tensor extents (I_1, ..., I_N).
            ranks: Ranks to use when the config itself has none (e.g. estimated).
        """
        n_modes = len(shape)
        total = math.prod(shape)
        update = {}

        for name in PER_MODE_FIELDS + ("ranks",):
            value = getattr(self, name)
            if name == "ranks" and value is None:
                value = list(ranks) if ranks is not None else None
            if name == "alpha" and value is None:
                value = [1.0 / n_modes] * n_modes
            if value is None:
                raise ConfigError("ranks are not set; pass ranks or estimate them first")
            if len(value) == 1 and n_modes > 1:
                value = value * n_modes
            if len(value) != n_modes:
                raise ConfigError(f"{name} has {len(value)} entries but the tensor has {n_modes} modes")
            update[name] = list(value)

        if n_modes > 1 and len(self.alpha or []) == 1:
            raise ConfigError("a single alpha value cannot sum to 1 over several modes")

        clamped = []
        for n, r in enumerate(update["ranks"]):
            limit = min(shape[n], total // shape[n])
            if r > limit:
                logger.warning(f"Rank {r} for mode {n + 1} exceeds feasible {limit}; clamping")
                r = limit
            clamped.append(int(r))
        update["ranks"] = clamped

        return self.model_copy(update=update)


class RunLogRow(BaseModel):
    """One solver iteration as written to the CSV log."""
    iter: int = Field(..., ge=1)
    objective: float
    y_rel_change: float
    elapsed_seconds: float = Field(..., ge=0)


class TensorFileHeader(BaseModel):
    """Fixed TNSR header: magic, version byte, uint32 ndim, uint64 dims (little-endian)."""
    magic: bytes = TNSR_MAGIC
    version: int
    dims: Tuple[int, ...]

    @field_validator("magic")
    @classmethod
    def validate_magic(cls, v: bytes) -> bytes:
        if v != TNSR_MAGIC:
            raise ValueError(f"bad magic {v!r}, expected {TNSR_MAGIC!r}")
        return v

    @field_validator("version")
    @classmethod
    def validate_version(cls, v: int) -> int:
        if v not in (TENSOR_VERSION, MASK_VERSION):
            raise ValueError(f"unsupported version byte 0x{v:02x}")
        return v

    @field_validator("dims")
    @classmethod
    def validate_dims(cls, v: Tuple[int, ...]) -> Tuple[int, ...]:
        if len(v) < 1:
            raise ValueError("ndim must be >= 1")
        if any(d < 1 for d in v):
            raise ValueError(f"all dims must be >= 1, got {v}")
        return v

    @property
    def ndim(self) -> int:
        return len(self.dims)

    @property
    def element_count(self) -> int:
        return math.prod(self.dims)

    @property
    def nbytes(self) -> int:
        return 4 + 1 + 4 + 8 * self.ndim
