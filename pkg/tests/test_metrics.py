import math

import numpy as np
import pytest
from scipy.ndimage import gaussian_filter

from src.errors import DimensionError, NumericalError
from src.math.metrics import (
    QualityReport,
    ergas,
    mean_psnr,
    psnr_slice,
    report,
    sam_mean,
    ssim_slice,
)
from src.math.tensor import DenseTensor


def ssim_oracle(x, y, peak):
    """Windowed SSIM written out from its definition (Gaussian 11x11, sigma 1.5, borders cropped)."""
    blur = lambda img: gaussian_filter(img, sigma=1.5, truncate=3.5, mode="reflect")
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    mx, my = blur(x), blur(y)
    vx = blur(x * x) - mx * mx
    vy = blur(y * y) - my * my
    cxy = blur(x * y) - mx * my
    s = ((2 * mx * my + c1) * (2 * cxy + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2))
    return float(s[5:-5, 5:-5].mean())


@pytest.fixture
def image_pair(rng):
    ref = rng.uniform(0.0, 255.0, size=(16, 16))
    est = ref + rng.normal(0.0, 20.0, size=ref.shape)
    return ref, est


@pytest.fixture
def tensor_pair(rng):
    ref = DenseTensor(rng.uniform(1.0, 2.0, size=(16, 14, 5)))
    est = DenseTensor(ref.array + rng.normal(0.0, 0.05, size=ref.shape))
    return ref, est


class TestPsnr:

    def test_identical_is_infinite(self, image_pair):
        ref, _ = image_pair
        assert psnr_slice(ref, ref, 255.0) == math.inf

    def test_unit_offset(self, image_pair):
        ref, _ = image_pair
        assert psnr_slice(ref, ref + 1.0, 255.0) == pytest.approx(20 * math.log10(255.0), abs=1e-9)

    def test_offset_of_peak_is_zero_db(self):
        ref = np.zeros((4, 4))
        assert psnr_slice(ref, ref + 255.0, 255.0) == pytest.approx(0.0, abs=1e-12)

    def test_decreases_with_noise(self, rng):
        ref = rng.uniform(0, 1, size=(8, 8))
        direction = rng.standard_normal(ref.shape)
        values = [psnr_slice(ref, ref + a * direction, 1.0) for a in (0.01, 0.02, 0.1, 0.5)]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            psnr_slice(np.zeros((3, 3)), np.zeros((3, 4)), 1.0)

    def test_needs_positive_peak(self):
        with pytest.raises(NumericalError):
            psnr_slice(np.zeros((3, 3)), np.ones((3, 3)), 0.0)


class TestSsim:

    def test_identical_is_one(self, image_pair):
        ref, _ = image_pair
        assert ssim_slice(ref, ref, 255.0) == pytest.approx(1.0, abs=1e-12)

    def test_negated_locally_zero_mean_is_not_positive(self):
        i, j = np.indices((16, 16))
        ref = (-1.0) ** (i + j)
        assert ssim_slice(ref, -ref, 1.0) <= 0.0

    def test_matches_windowed_oracle(self, image_pair):
        ref, est = image_pair
        assert ssim_slice(ref, est, 255.0) == pytest.approx(ssim_oracle(ref, est, 255.0), abs=1e-10)

    def test_bounded(self, image_pair):
        ref, est = image_pair
        assert -1.0 <= ssim_slice(ref, est, 255.0) <= 1.0

    def test_slice_smaller_than_window(self):
        with pytest.raises(DimensionError):
            ssim_slice(np.ones((10, 16)), np.ones((10, 16)), 1.0)


class TestErgas:

    def test_identical_is_zero(self, tensor_pair):
        ref, _ = tensor_pair
        assert ergas(ref, ref) == 0.0

    def test_relative_scaling_of_constant_reference(self):
        ref = DenseTensor(np.full((4, 4, 3), 5.0))
        est = DenseTensor(ref.array * 1.02)
        assert ergas(ref, est) == pytest.approx(2.0, rel=1e-9)

    def test_matches_band_loop(self, tensor_pair):
        ref, est = tensor_pair
        terms = []
        for b in range(ref.shape[2]):
            r, e = ref.array[:, :, b], est.array[:, :, b]
            terms.append(np.mean((r - e) ** 2) / np.mean(r) ** 2)
        assert ergas(ref, est) == pytest.approx(100 * math.sqrt(sum(terms) / len(terms)), rel=1e-9)

    def test_scale_invariant(self, tensor_pair):
        ref, est = tensor_pair
        scaled = ergas(DenseTensor(ref.array * 3.0), DenseTensor(est.array * 3.0))
        assert scaled == pytest.approx(ergas(ref, est), rel=1e-12)

    def test_zero_slice_mean(self):
        data = np.ones((4, 4, 2))
        data[:, :, 1] = 0.0
        with pytest.raises(NumericalError):
            ergas(DenseTensor(data), DenseTensor(data))

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            ergas(DenseTensor.zeros((2, 2, 2)), DenseTensor.zeros((2, 2, 3)))


class TestSam:

    def test_identical_is_zero(self, tensor_pair):
        ref, _ = tensor_pair
        assert sam_mean(ref, ref) == pytest.approx(0.0, abs=1e-6)

    def test_scale_invariant(self, tensor_pair):
        ref, est = tensor_pair
        assert sam_mean(ref, DenseTensor(ref.array * 2.0)) == pytest.approx(0.0, abs=1e-6)
        fiber_scale = np.linspace(0.5, 3.0, 16 * 14).reshape(16, 14, 1)
        assert sam_mean(ref, DenseTensor(est.array * fiber_scale)) == pytest.approx(sam_mean(ref, est), rel=1e-9)

    def test_orthogonal_fibers(self):
        ref = np.zeros((3, 3, 2))
        est = np.zeros((3, 3, 2))
        ref[:, :, 0] = 1.0
        est[:, :, 1] = 4.0
        assert sam_mean(DenseTensor(ref), DenseTensor(est)) == pytest.approx(90.0)

    def test_zero_fibers_count_as_zero_angle(self):
        ref = np.zeros((2, 1, 2))
        est = np.zeros((2, 1, 2))
        ref[0, 0] = [1.0, 0.0]
        est[0, 0] = [0.0, 1.0]
        assert sam_mean(DenseTensor(ref), DenseTensor(est)) == pytest.approx(45.0)

    def test_matches_fiber_loop(self, tensor_pair):
        ref, est = tensor_pair
        angles = []
        for i in range(ref.shape[0]):
            for j in range(ref.shape[1]):
                r, e = ref.array[i, j, :], est.array[i, j, :]
                cos = np.dot(r, e) / (np.linalg.norm(r) * np.linalg.norm(e))
                angles.append(math.degrees(math.acos(min(1.0, max(-1.0, cos)))))
        assert sam_mean(ref, est) == pytest.approx(np.mean(angles), rel=1e-9)


class TestReport:

    def test_identical(self, tensor_pair):
        ref, _ = tensor_pair
        q = report(ref, ref)
        assert q.mean_psnr == math.inf
        assert q.mean_ssim == pytest.approx(1.0, abs=1e-12)
        assert q.ergas == 0.0
        assert q.sam_mean_degrees == pytest.approx(0.0, abs=1e-6)
        assert q.n_slices == 5

    def test_fields_match_oracles(self, tensor_pair):
        ref, est = tensor_pair
        q = report(ref, est)
        peak = ref.array.max()
        for k in range(5):
            r, e = ref.array[:, :, k], est.array[:, :, k]
            mse = np.mean((r - e) ** 2)
            assert q.per_slice_psnr[k] == pytest.approx(10 * math.log10(peak ** 2 / mse), abs=1e-9)
            assert q.per_slice_ssim[k] == pytest.approx(ssim_oracle(r, e, peak), abs=1e-9)
        assert q.mean_psnr == pytest.approx(np.mean(q.per_slice_psnr), abs=1e-9)
        assert q.ergas == pytest.approx(ergas(ref, est))

    def test_slice_order_permutes_lists(self, tensor_pair):
        ref, est = tensor_pair
        q = report(ref, est)
        flipped = report(DenseTensor(ref.array[:, :, ::-1]), DenseTensor(est.array[:, :, ::-1]))
        assert flipped.per_slice_psnr == pytest.approx(q.per_slice_psnr[::-1], abs=1e-12)
        assert flipped.per_slice_ssim == pytest.approx(q.per_slice_ssim[::-1], abs=1e-12)

    def test_needs_three_modes(self):
        with pytest.raises(DimensionError):
            report(DenseTensor.zeros((12, 12)), DenseTensor.zeros((12, 12)))

    def test_to_frame_has_mean_row(self, tensor_pair):
        ref, est = tensor_pair
        frame = report(ref, est).to_frame()
        assert list(frame.columns) == ["slice", "psnr", "ssim", "ergas", "sam_degrees"]
        assert len(frame) == 6
        assert frame.iloc[-1]["slice"] == "mean"
        assert frame["ergas"].iloc[:-1].isna().all()


class TestMeanPsnr:

    def test_excludes_perfect_slices(self):
        assert mean_psnr([30.0, math.inf, 40.0]) == pytest.approx(35.0)

    def test_all_perfect_is_infinite(self):
        assert mean_psnr([math.inf, math.inf]) == math.inf

    def test_report_dataclass_roundtrips_through_frame(self):
        q = QualityReport([1.0], [0.5], 2.0, 3.0, 1.0, 0.5)
        frame = q.to_frame()
        assert frame.iloc[1]["ergas"] == 2.0
        assert frame.iloc[1]["sam_degrees"] == 3.0
