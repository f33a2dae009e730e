"""
Picture Quality Indices

Compares a completed tensor against its reference: PSNR and SSIM per
frontal slice (averaged), ERGAS over slices as bands, and the mean
spectral angle between mode-3 fibers.

Conventions: peak = max of the reference; a perfect slice has PSNR +inf;
ERGAS uses scale ratio 1; zero-norm fibers contribute a SAM angle of 0.
"""
import math
from dataclasses import dataclass
from typing import List
import logging

import numpy as np
import pandas as pd
from skimage.metrics import structural_similarity

from src.errors import DimensionError, NumericalError
from src.math.tensor import DenseTensor

logger = logging.getLogger(__name__)

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03

REPORT_COLUMNS = ["slice", "psnr", "ssim", "ergas", "sam_degrees"]


@dataclass
class QualityReport:
    """Slice-wise PSNR/SSIM with their means, plus the global ERGAS and SAM."""
    per_slice_psnr: List[float]
    per_slice_ssim: List[float]
    ergas: float
    sam_mean_degrees: float
    mean_psnr: float
    mean_ssim: float

    @property
    def n_slices(self) -> int:
        return len(self.per_slice_psnr)

    def to_frame(self) -> pd.DataFrame:
        """One row per slice (1-based) followed by a `mean` row carrying ERGAS and SAM."""
        rows = [
            {"slice": str(k + 1), "psnr": p, "ssim": s, "ergas": np.nan, "sam_degrees": np.nan}
            for k, (p, s) in enumerate(zip(self.per_slice_psnr, self.per_slice_ssim))
        ]
        rows.append({
            "slice": "mean",
            "psnr": self.mean_psnr,
            "ssim": self.mean_ssim,
            "ergas": self.ergas,
            "sam_degrees": self.sam_mean_degrees,
        })
        return pd.DataFrame(rows, columns=REPORT_COLUMNS)


def _check_pair(ref: np.ndarray, est: np.ndarray):
    if ref.shape != est.shape:
        raise DimensionError(f"Reference shape {ref.shape} does not match estimate shape {est.shape}")


def psnr_slice(ref, est, peak: float) -> float:
    """10 log10(peak^2 / MSE) in dB; +inf when the slices are identical."""
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    _check_pair(ref, est)
    if not peak > 0:
        raise NumericalError(f"PSNR needs a positive peak, got {peak}")
    mse = float(np.mean((ref - est) ** 2))
    if mse == 0.0:
        return math.inf
    return 10.0 * math.log10(peak * peak / mse)


def ssim_slice(ref, est, peak: float) -> float:
    """
    Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), K1 = 0.01,
    K2 = 0.03 and dynamic range `peak`, border windows excluded.
    """
    ref = np.asarray(ref, dtype=np.float64)
    est = np.asarray(est, dtype=np.float64)
    _check_pair(ref, est)
    if ref.ndim != 2:
        raise DimensionError(f"SSIM works on matrices, got shape {ref.shape}")
    if min(ref.shape) < SSIM_WINDOW:
        raise DimensionError(f"Slice {ref.shape} is smaller than the {SSIM_WINDOW}x{SSIM_WINDOW} SSIM window")
    if not peak > 0:
        raise NumericalError(f"SSIM needs a positive peak, got {peak}")
    return float(structural_similarity(
        ref, est,
        data_range=peak,
        gaussian_weights=True,
        sigma=SSIM_SIGMA,
        use_sample_covariance=False,
        K1=SSIM_K1,
        K2=SSIM_K2,
    ))


def _check_3way(ref: DenseTensor, est: DenseTensor):
    _check_pair(ref.array, est.array)
    if ref.ndim != 3:
        raise DimensionError(f"Expected a 3-way tensor, got {ref.ndim} modes")


def ergas(ref: DenseTensor, est: DenseTensor) -> float:
    """100 sqrt(mean_b MSE_b / mu_b^2) over frontal slices b, mu_b the reference slice mean."""
    _check_3way(ref, est)
    diff = ref.array - est.array
    mse = np.mean(diff * diff, axis=(0, 1))
    means = np.mean(ref.array, axis=(0, 1))
    zero = np.flatnonzero(means == 0.0)
    if zero.size:
        raise NumericalError(f"ERGAS undefined: reference slice {int(zero[0]) + 1} has zero mean")
    return float(100.0 * np.sqrt(np.mean(mse / (means * means))))


def sam_mean(ref: DenseTensor, est: DenseTensor) -> float:
    """Mean angle in degrees between corresponding mode-3 fibers."""
    _check_3way(ref, est)
    bands = ref.shape[2]
    r = ref.array.reshape(-1, bands, order="F")
    e = est.array.reshape(-1, bands, order="F")
    dot = np.sum(r * e, axis=1)
    norms = np.sum(r * r, axis=1) * np.sum(e * e, axis=1)
    valid = norms > 0
    cos = np.ones_like(dot)
    cos[valid] = dot[valid] / np.sqrt(norms[valid])
    return float(np.mean(np.degrees(np.arccos(np.clip(cos, -1.0, 1.0)))))


def mean_psnr(values: List[float]) -> float:
    """Mean over finite slices; +inf only when every slice is perfect."""
    finite = [v for v in values if math.isfinite(v)]
    if not finite:
        return math.inf
    return float(np.mean(finite))


def report(ref: DenseTensor, est: DenseTensor) -> QualityReport:
    _check_3way(ref, est)
    peak = float(ref.array.max())
    if not peak > 0:
        raise NumericalError(f"Reference maximum {peak} is not a usable peak value")

    psnrs, ssims = [], []
    for k in range(ref.shape[2]):
        r, e = ref.array[:, :, k], est.array[:, :, k]
        psnrs.append(psnr_slice(r, e, peak))
        ssims.append(ssim_slice(r, e, peak))

    result = QualityReport(
        per_slice_psnr=psnrs,
        per_slice_ssim=ssims,
        ergas=ergas(ref, est),
        sam_mean_degrees=sam_mean(ref, est),
        mean_psnr=mean_psnr(psnrs),
        mean_ssim=float(np.mean(ssims)),
    )
    logger.debug(
        f"Quality: PSNR {result.mean_psnr:.3f} dB, SSIM {result.mean_ssim:.4f}, "
        f"ERGAS {result.ergas:.3f}, SAM {result.sam_mean_degrees:.3f} deg"
    )
    return result
