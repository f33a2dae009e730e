import math

import numpy as np
import pytest

from src.errors import DimensionError, NumericalError
from src.math.tensor import (
    DenseTensor,
    ModeMatrix,
    ObservationMask,
    fold,
    frobenius_norm,
    inner_product,
    mode_product,
    project,
    relative_error,
    sample_mask,
    unfold,
)


@pytest.fixture
def counting_tensor():
    """2x2x2 tensor holding 1..8 in first-index-fastest order."""
    return DenseTensor.from_flat((2, 2, 2), np.arange(1, 9))


class TestDenseTensor:

    def test_first_index_varies_fastest(self, counting_tensor):
        assert counting_tensor.array[1, 0, 0] == 2
        assert counting_tensor.array[0, 1, 0] == 3
        assert counting_tensor.array[0, 0, 1] == 5
        np.testing.assert_array_equal(counting_tensor.data, np.arange(1, 9))

    def test_from_flat_length_mismatch(self):
        with pytest.raises(DimensionError):
            DenseTensor.from_flat((2, 3), [1.0, 2.0])

    def test_rejects_zero_extent(self):
        with pytest.raises(DimensionError):
            DenseTensor.zeros((3, 0, 2))

    def test_is_immutable_copy(self):
        source = np.ones((2, 3))
        t = DenseTensor(source)
        source[0, 0] = 7.0
        assert t.array[0, 0] == 1.0
        with pytest.raises(ValueError):
            t.array[0, 0] = 5.0

    def test_equality(self, counting_tensor):
        assert counting_tensor == DenseTensor.from_flat((2, 2, 2), np.arange(1, 9))
        assert counting_tensor != DenseTensor.zeros((2, 2, 2))
        assert counting_tensor != DenseTensor.zeros((2, 4))


class TestUnfold:

    def test_mode_unfoldings_of_counting_tensor(self, counting_tensor):
        np.testing.assert_array_equal(unfold(counting_tensor, 0).matrix, [[1, 3, 5, 7], [2, 4, 6, 8]])
        np.testing.assert_array_equal(unfold(counting_tensor, 1).matrix, [[1, 2, 5, 6], [3, 4, 7, 8]])
        np.testing.assert_array_equal(unfold(counting_tensor, 2).matrix, [[1, 2, 3, 4], [5, 6, 7, 8]])

    def test_unfold_shape(self, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 5)))
        m = unfold(t, 1)
        assert isinstance(m, ModeMatrix)
        assert (m.rows, m.cols, m.mode) == (4, 15, 1)

    def test_fold_unfold_roundtrip_is_exact(self, rng):
        for _ in range(100):
            ndim = int(rng.integers(1, 5))
            shape = tuple(int(s) for s in rng.integers(1, 6, size=ndim))
            t = DenseTensor(rng.standard_normal(shape))
            mode = int(rng.integers(0, ndim))
            back = fold(unfold(t, mode), shape, mode)
            assert back == t

    def test_unfolding_preserves_norm(self, rng):
        t = DenseTensor(rng.standard_normal((4, 3, 6, 2)))
        for mode in range(t.ndim):
            assert np.linalg.norm(unfold(t, mode).matrix) == pytest.approx(frobenius_norm(t), abs=1e-12)

    def test_mode_out_of_range(self, counting_tensor):
        with pytest.raises(DimensionError):
            unfold(counting_tensor, 3)
        with pytest.raises(DimensionError):
            unfold(counting_tensor, -1)

    def test_fold_rejects_wrong_matrix_shape(self):
        with pytest.raises(DimensionError):
            fold(np.zeros((2, 5)), (2, 2, 2), 0)


class TestAlgebra:

    def test_inner_product_and_norm(self, counting_tensor):
        assert inner_product(counting_tensor, counting_tensor) == float(sum(k * k for k in range(1, 9)))
        assert frobenius_norm(counting_tensor) == pytest.approx(math.sqrt(204.0))

    def test_inner_product_shape_mismatch(self):
        with pytest.raises(DimensionError):
            inner_product(DenseTensor.zeros((2, 2)), DenseTensor.zeros((2, 3)))

    def test_mode_product_matches_einsum(self, rng):
        t = DenseTensor(rng.standard_normal((3, 4, 5)))
        m = rng.standard_normal((6, 4))
        result = mode_product(t, m, 1)
        assert result.shape == (3, 6, 5)
        np.testing.assert_allclose(result.array, np.einsum("ijk,aj->iak", t.array, m), atol=1e-12)

    def test_mode_product_dimension_check(self, counting_tensor):
        with pytest.raises(DimensionError):
            mode_product(counting_tensor, np.ones((3, 3)), 0)

    def test_project_zeroes_unobserved(self, counting_tensor):
        mask = ObservationMask(counting_tensor.array > 4)
        projected = project(counting_tensor, mask)
        np.testing.assert_array_equal(projected.data, [0, 0, 0, 0, 5, 6, 7, 8])

    def test_project_shape_mismatch(self, counting_tensor):
        with pytest.raises(DimensionError):
            project(counting_tensor, ObservationMask.full((2, 2)))

    def test_unfold_is_linear(self, rng):
        for _ in range(50):
            shape = tuple(int(s) for s in rng.integers(1, 6, size=3))
            a, b = DenseTensor(rng.standard_normal(shape)), DenseTensor(rng.standard_normal(shape))
            alpha, beta = rng.standard_normal(2)
            combined = DenseTensor(alpha * a.array + beta * b.array)
            for mode in range(3):
                expected = alpha * unfold(a, mode).matrix + beta * unfold(b, mode).matrix
                np.testing.assert_allclose(unfold(combined, mode).matrix, expected, rtol=1e-12, atol=1e-12)

    def test_project_is_idempotent(self, rng):
        for _ in range(50):
            t = DenseTensor(rng.standard_normal((4, 3, 5)))
            mask = sample_mask(t.shape, float(rng.uniform()), seed=int(rng.integers(1 << 30)))
            once = project(t, mask)
            assert project(once, mask) == once

    def test_projections_onto_mask_and_complement_sum_to_tensor(self, rng):
        for _ in range(50):
            t = DenseTensor(rng.standard_normal((5, 2, 4)))
            mask = sample_mask(t.shape, float(rng.uniform()), seed=int(rng.integers(1 << 30)))
            total = project(t, mask).array + project(t, mask.complement()).array
            np.testing.assert_array_equal(total, t.array)

    def test_inner_product_with_zero(self, rng):
        for shape in [(3,), (2, 5), (4, 3, 2), (2, 2, 2, 3)]:
            assert inner_product(DenseTensor(rng.standard_normal(shape)), DenseTensor.zeros(shape)) == 0.0

    def test_relative_error(self, counting_tensor):
        assert relative_error(counting_tensor, counting_tensor) == 0.0
        doubled = DenseTensor(counting_tensor.array * 2)
        assert relative_error(doubled, counting_tensor) == pytest.approx(1.0)

    def test_relative_error_zero_reference(self):
        with pytest.raises(NumericalError):
            relative_error(DenseTensor.zeros((2, 2)), DenseTensor.zeros((2, 2)))


class TestSampleMask:

    @pytest.mark.parametrize("sr, expected", [(0.0, 0), (0.05, 50), (0.3, 300), (1.0, 1000)])
    def test_observed_count(self, sr, expected):
        assert sample_mask((10, 10, 10), sr, seed=1).count == expected

    def test_count_rounds_half_up(self):
        assert sample_mask((3,), 0.5, seed=0).count == 2

    def test_same_seed_same_mask(self):
        assert sample_mask((6, 7, 8), 0.2, seed=9) == sample_mask((6, 7, 8), 0.2, seed=9)
        assert sample_mask((6, 7, 8), 0.2, seed=9) != sample_mask((6, 7, 8), 0.2, seed=10)

    def test_rejects_out_of_range_rate(self):
        with pytest.raises(ValueError):
            sample_mask((4, 4), 1.5, seed=0)

    def test_sampling_rate_and_complement(self):
        mask = sample_mask((10, 10), 0.25, seed=2)
        assert mask.sampling_rate == pytest.approx(0.25)
        assert mask.complement().count == 75
        assert ObservationMask.empty((3, 3)).count == 0
