"""
Experiment Pipeline

The steps the CLI and scripts chain together:
- complete: solve one completion problem, streaming the iteration log
- evaluate: quality report of an estimate against a reference
- gamma sweep: one complete (+ evaluate) run per gamma_A value, with a summary table

Every step is recorded in an in-memory run history.
"""
import math
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Union
import logging

import numpy as np
import pandas as pd

from src.etl.models import LratmConfig, RunLogRow
from src.etl.run_log import RunLogWriter, write_frame, write_report
from src.etl.tensor_file import write_tensor
from src.math.metrics import QualityReport, report
from src.math.solver import CompletionResult, LratmSolver, SolverState
from src.math.tensor import DenseTensor, ObservationMask, relative_error

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

SWEEP_COLUMNS = ["gamma", "mean_psnr", "mean_ssim", "rel_err", "iterations", "converged"]

# ---------------------------------------------------------------------------
# Run history (in-memory, per process)
# ---------------------------------------------------------------------------
_run_history: List[Dict] = []
_history_lock = threading.Lock()
_MAX_HISTORY = 50


def _record(step: str, status: str, detail: str = "") -> Dict:
    entry = {
        "step": step,
        "status": status,
        "detail": detail,
        "timestamp": datetime.now(timezone.utc).isoformat(),
    }
    with _history_lock:
        _run_history.append(entry)
        if len(_run_history) > _MAX_HISTORY:
            _run_history.pop(0)
    return entry


def get_run_history() -> List[Dict]:
    with _history_lock:
        return list(_run_history)


def clear_run_history():
    with _history_lock:
        _run_history.clear()


@dataclass
class CompletionRun:
    result: CompletionResult
    config: LratmConfig
    rel_error: Optional[float] = None


# ---------------------------------------------------------------------------
# Step: complete
# ---------------------------------------------------------------------------
def run_completion(
    observed: DenseTensor,
    mask: ObservationMask,
    config: LratmConfig,
    log_path: Optional[PathLike] = None,
    out_path: Optional[PathLike] = None,
    reference: Optional[DenseTensor] = None,
    tmac: bool = False,
) -> CompletionRun:
    """
    Solve one completion problem.

    Args:
        observed: Observed tensor (entries outside the mask are ignored).
        mask: Observed index set.
        config: Solver configuration.
        log_path: If set, the iteration log CSV is streamed there.
        out_path: If set, the completed tensor is written there.
        reference: If set, the relative error against it is reported.
        tmac: Run the Tmac baseline (penalties off, multipliers frozen).
    """
    step = "complete-tmac" if tmac else "complete"
    if tmac:
        config = config.as_tmac()

    writer = RunLogWriter(log_path) if log_path is not None else None

    def on_iteration(state: SolverState, elapsed: float):
        if writer is not None:
            writer.write(RunLogRow(
                iter=state.iter,
                objective=state.objective_history[-1],
                y_rel_change=state.y_change_history[-1],
                elapsed_seconds=elapsed,
            ))

    try:
        result = LratmSolver(config, callback=on_iteration).solve(observed, mask)
        if out_path is not None:
            write_tensor(out_path, result.tensor)
        rel = relative_error(result.tensor, reference) if reference is not None else None
    except Exception as e:
        logger.error(f"{step} failed: {e}")
        _record(step, "failed", str(e))
        raise

    detail = f"{result.iterations} iterations, converged={result.converged}"
    if rel is not None:
        detail += f", rel_err={rel:.3e}"
        logger.info(f"Relative error against reference: {rel:.6e}")
    _record(step, "ok" if result.converged else "max_iter", detail)
    return CompletionRun(result=result, config=config, rel_error=rel)


# ---------------------------------------------------------------------------
# Step: evaluate
# ---------------------------------------------------------------------------
def run_metrics(reference: DenseTensor, estimate: DenseTensor, out_path: Optional[PathLike] = None) -> QualityReport:
    try:
        quality = report(reference, estimate)
        if out_path is not None:
            write_report(out_path, quality)
    except Exception as e:
        logger.error(f"metrics failed: {e}")
        _record("metrics", "failed", str(e))
        raise

    logger.info(
        f"Mean PSNR {quality.mean_psnr:.3f} dB, mean SSIM {quality.mean_ssim:.4f}, "
        f"ERGAS {quality.ergas:.3f}, SAM {quality.sam_mean_degrees:.3f} deg"
    )
    _record("metrics", "ok", f"{quality.n_slices} slices")
    return quality


# ---------------------------------------------------------------------------
# Step: gamma_A sweep
# ---------------------------------------------------------------------------
def _sweep_dir(out_dir: Path, gamma: float) -> Path:
    # repr round-trips, so distinct gammas never share a directory
    label = repr(float(gamma))
    if label.endswith(".0"):
        label = label[:-2]
    return out_dir / f"gamma_{label}"


def _sweep_one(
    gamma: float,
    observed: DenseTensor,
    mask: ObservationMask,
    config: LratmConfig,
    out_dir: Path,
    reference: Optional[DenseTensor],
) -> Dict:
    run_dir = _sweep_dir(out_dir, gamma)
    run_dir.mkdir(parents=True, exist_ok=True)
    run = run_completion(
        observed, mask, config.model_copy(update={"gamma_A": gamma}),
        log_path=run_dir / "log.csv",
        out_path=run_dir / "completed.tnsr",
        reference=reference,
    )

    row = {
        "gamma": gamma,
        "mean_psnr": np.nan,
        "mean_ssim": np.nan,
        "rel_err": run.rel_error if run.rel_error is not None else np.nan,
        "iterations": run.result.iterations,
        "converged": run.result.converged,
    }
    if reference is not None and reference.ndim == 3:
        quality = run_metrics(reference, run.result.tensor, run_dir / "report.csv")
        row["mean_psnr"] = quality.mean_psnr
        row["mean_ssim"] = quality.mean_ssim
    return row


def run_gamma_sweep(
    observed: DenseTensor,
    mask: ObservationMask,
    config: LratmConfig,
    gammas: Sequence[float],
    out_dir: PathLike,
    reference: Optional[DenseTensor] = None,
    jobs: int = 1,
) -> pd.DataFrame:
    """
    One completion per gamma_A value, each in its own `gamma_<value>/` directory,
    plus `summary.csv` with one row per value in input order.

    Quality columns stay empty without a (3-way) reference.
    """
    if not gammas:
        raise ValueError("gamma list is empty")
    if any(not (g > 0 and math.isfinite(g)) for g in gammas):
        raise ValueError(f"gamma values must be finite and > 0, got {list(gammas)}")
    if len(set(gammas)) != len(gammas):
        raise ValueError(f"gamma values must be distinct, got {list(gammas)}")

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"Sweeping gamma_A over {list(gammas)} ({jobs} job(s)) into {out_dir}")

    def one(gamma: float) -> Dict:
        return _sweep_one(gamma, observed, mask, config, out_dir, reference)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(one, gammas))
    else:
        rows = [one(g) for g in gammas]

    summary = pd.DataFrame(rows, columns=SWEEP_COLUMNS)
    write_frame(out_dir / "summary.csv", summary)
    _record("sweep", "ok", f"{len(rows)} gamma values")
    return summary
