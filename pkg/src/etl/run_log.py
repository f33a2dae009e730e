"""
CSV artifacts: per-iteration solver logs and quality reports.

Reals are written with 17 significant digits so they read back bit-identically.
"""
import os
from pathlib import Path
from typing import List, Optional, Union
import logging

import numpy as np
import pandas as pd

from src.errors import RunLogError
from src.etl.models import RunLogRow
from src.math.metrics import REPORT_COLUMNS, QualityReport

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

FLOAT_FORMAT = "%.17g"
LOG_COLUMNS = ["iter", "objective", "y_rel_change", "elapsed_seconds"]

REPORT_NOTES = (
    "PSNR/SSIM per frontal slice; peak = max of reference; SSIM 11x11 Gaussian window sigma 1.5, K1 0.01, K2 0.03\n"
    "psnr inf = identical slice, excluded from the mean unless every slice is inf\n"
    "ergas over frontal slices as bands, scale ratio 1; sam_degrees = mean angle between mode-3 fibers\n"
)


def report_notes_path(path: PathLike) -> Path:
    """Sidecar holding the metric conventions, so the CSV starts with its header."""
    return Path(f"{path}.notes.txt")


def _last_iter(path: Path) -> Optional[int]:
    if not path.exists() or path.stat().st_size == 0:
        return None
    with open(path, "rb") as f:
        f.seek(0, os.SEEK_END)
        size = f.tell()
        f.seek(max(0, size - 4096))
        tail = f.read().decode("utf-8").strip().splitlines()
    last = tail[-1] if tail else ""
    if last == ",".join(LOG_COLUMNS):
        return None
    try:
        return int(last.split(",", 1)[0])
    except ValueError:
        raise RunLogError(f"{path}: cannot read the last iteration from '{last}'") from None


def _row_frame(rows: List[RunLogRow]) -> pd.DataFrame:
    return pd.DataFrame([r.model_dump() for r in rows], columns=LOG_COLUMNS)


def append_log(path: PathLike, row: RunLogRow):
    """Append one row, writing the header first if the file is new or empty."""
    path = Path(path)
    last = _last_iter(path)
    if last is not None and row.iter <= last:
        raise RunLogError(f"{path}: iter {row.iter} does not follow iter {last}")
    new_file = not path.exists() or path.stat().st_size == 0
    _row_frame([row]).to_csv(path, mode="a", header=new_file, index=False, float_format=FLOAT_FORMAT)


class RunLogWriter:
    """
    Streams log rows to one file, truncating it on open.

    Usable directly as a solver callback target via `write(row)`.
    """

    def __init__(self, path: PathLike):
        self.path = Path(path)
        self.last_iter: Optional[int] = None
        self.path.write_text(",".join(LOG_COLUMNS) + "\n", encoding="utf-8")

    def write(self, row: RunLogRow):
        if self.last_iter is not None and row.iter <= self.last_iter:
            raise RunLogError(f"{self.path}: iter {row.iter} does not follow iter {self.last_iter}")
        _row_frame([row]).to_csv(self.path, mode="a", header=False, index=False, float_format=FLOAT_FORMAT)
        self.last_iter = row.iter


def read_log(path: PathLike) -> List[RunLogRow]:
    frame = pd.read_csv(path, dtype={"iter": np.int64}, float_precision="round_trip")
    if list(frame.columns) != LOG_COLUMNS:
        raise RunLogError(f"{path}: header {list(frame.columns)} is not {LOG_COLUMNS}")
    rows = [
        RunLogRow(iter=int(r.iter), objective=r.objective, y_rel_change=r.y_rel_change, elapsed_seconds=r.elapsed_seconds)
        for r in frame.itertuples(index=False)
    ]
    for prev, cur in zip(rows, rows[1:]):
        if cur.iter <= prev.iter:
            raise RunLogError(f"{path}: iter {cur.iter} does not follow iter {prev.iter}")
    return rows


def write_report(path: PathLike, quality: QualityReport):
    quality.to_frame().to_csv(path, index=False, float_format=FLOAT_FORMAT, na_rep="")
    report_notes_path(path).write_text(REPORT_NOTES, encoding="utf-8")
    logger.debug(f"Wrote quality report ({quality.n_slices} slices) to {path}")


def read_report(path: PathLike) -> QualityReport:
    frame = pd.read_csv(path, dtype={"slice": str}, float_precision="round_trip")
    if list(frame.columns) != REPORT_COLUMNS:
        raise RunLogError(f"{path}: header {list(frame.columns)} is not {REPORT_COLUMNS}")
    mean_rows = frame[frame["slice"] == "mean"]
    if len(mean_rows) != 1:
        raise RunLogError(f"{path}: expected exactly one 'mean' row, found {len(mean_rows)}")
    slices = frame[frame["slice"] != "mean"]
    mean = mean_rows.iloc[0]
    return QualityReport(
        per_slice_psnr=[float(v) for v in slices["psnr"]],
        per_slice_ssim=[float(v) for v in slices["ssim"]],
        ergas=float(mean["ergas"]),
        sam_mean_degrees=float(mean["sam_degrees"]),
        mean_psnr=float(mean["psnr"]),
        mean_ssim=float(mean["ssim"]),
    )


def write_frame(path: PathLike, frame: pd.DataFrame):
    """Any summary table, with the same lossless float format."""
    frame.to_csv(path, index=False, float_format=FLOAT_FORMAT)
