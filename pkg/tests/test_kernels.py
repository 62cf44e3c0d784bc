import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmetric.data import Dataset
from kmetric.kernels import (
    GramMatrix,
    Linear,
    Polynomial,
    ScaledRbf,
    WeightedSum,
    alignment,
    cross_gram,
    eval_kernel,
    format_kernel_spec,
    frobenius_normalize,
    gram,
    ideal_kernel,
    parse_kernel_spec,
)


def _dataset(features, labels=None, p=None):
    features = np.asarray(features, dtype=np.float64)
    n = features.shape[0]
    labels = np.zeros(n, dtype=np.int64) if labels is None else np.asarray(labels)
    return Dataset(features, labels, p or max(1, int(labels.max()) + 1))


class TestEvalKernel:
    def test_rbf_self_similarity_is_one(self, rng):
        x = rng.normal(size=4)
        for sigma in (0.01, 1.0, 250.0):
            assert eval_kernel(ScaledRbf(sigma), x, x, 4) == 1.0

    def test_rbf_formula(self):
        # ||x-y||^2 = 4, denominator 2 * D * sigma^2 = 4
        value = eval_kernel(ScaledRbf(1.0), np.array([0.0, 0.0]), np.array([2.0, 0.0]), 2)
        npt.assert_allclose(value, np.exp(-1.0), rtol=1e-15)

    def test_rbf_symmetric_in_arguments(self, rng):
        x, y = rng.normal(size=3), rng.normal(size=3)
        k = ScaledRbf(0.7)
        assert eval_kernel(k, x, y, 3) == eval_kernel(k, y, x, 3)

    def test_weighted_sum_of_linear(self):
        spec = WeightedSum(((2.0, Linear()),))
        assert eval_kernel(spec, np.array([1.0, 1.0]), np.array([1.0, -1.0]), 2) == 0.0

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimensional"):
            eval_kernel(Linear(), np.ones(3), np.ones(2), 3)

    def test_nonpositive_sigma_rejected(self):
        with pytest.raises(ValueError, match="sigma"):
            ScaledRbf(0.0)

    def test_polynomial_validation(self):
        with pytest.raises(ValueError):
            Polynomial(degree=0)
        with pytest.raises(ValueError):
            Polynomial(degree=2, offset=-1.0)


class TestGram:
    def test_single_point(self, rng):
        ds = _dataset(rng.normal(size=(1, 3)))
        k = gram(Polynomial(2, 1.0), ds)
        assert k.values.shape == (1, 1)
        npt.assert_allclose(k.values[0, 0], (ds.features[0] @ ds.features[0] + 1.0) ** 2)

    def test_rbf_unit_diagonal_exact(self, rng):
        ds = _dataset(rng.normal(size=(12, 5)))
        k = gram(ScaledRbf(0.3), ds)
        assert np.all(np.diag(k.values) == 1.0)

    def test_linear_on_orthogonal_rows(self):
        ds = _dataset([[1.0, 0.0], [0.0, 1.0]])
        npt.assert_allclose(gram(Linear(), ds).values, np.eye(2))

    def test_exact_symmetry(self, rng):
        ds = _dataset(rng.normal(size=(20, 3)))
        k = gram(ScaledRbf(1.5), ds)
        assert np.array_equal(k.values, k.values.T)

    def test_weighted_sum_gram_is_weighted_sum_of_grams(self, rng):
        ds = _dataset(rng.normal(size=(15, 4)))
        parts = (ScaledRbf(0.5), Linear(), Polynomial(2, 0.5))
        weights = (0.3, 1.2, 2.0)
        combined = gram(WeightedSum(tuple(zip(weights, parts))), ds).values
        expected = sum(w * gram(p, ds).values for w, p in zip(weights, parts))
        npt.assert_allclose(combined, expected, atol=1e-12)

    def test_gram_psd_within_tolerance(self, rng):
        ds = _dataset(rng.normal(size=(25, 3)))
        for spec in (ScaledRbf(0.5), ScaledRbf(5.0), Polynomial(2, 1.0), Linear()):
            values = gram(spec, ds).values
            min_eig = np.linalg.eigvalsh(values).min()
            assert min_eig >= -1e-8 * np.trace(values)


class TestCrossGram:
    def test_train_equals_test_matches_gram(self, rng):
        ds = _dataset(rng.normal(size=(10, 3)))
        k = gram(ScaledRbf(1.0), ds)
        x = cross_gram(ScaledRbf(1.0), ds, ds)
        npt.assert_allclose(x, k.values, atol=1e-12)

    def test_single_test_point_equals_gram_column(self, rng):
        ds = _dataset(rng.normal(size=(8, 2)))
        j = 5
        probe = _dataset(ds.features[[j]])
        k = gram(ScaledRbf(2.0), ds)
        row = cross_gram(ScaledRbf(2.0), ds, probe)
        npt.assert_allclose(row[0], k.values[:, j], atol=1e-12)

    def test_distant_point_vanishes(self):
        train = _dataset([[0.0, 0.0], [1.0, 0.0]])
        test = _dataset([[1000.0, 0.0]])
        # smallest ||x'-xi||^2 is 998001; exponent <= -998001/4 << -50
        row = cross_gram(ScaledRbf(1.0), train, test)
        assert np.all(row <= np.exp(-50.0))

    def test_dimension_mismatch(self, rng):
        with pytest.raises(ValueError, match="dimension mismatch"):
            cross_gram(Linear(), _dataset(rng.normal(size=(3, 2))), _dataset(rng.normal(size=(3, 4))))


class TestFrobeniusNormalize:
    def test_identity_four(self):
        ds = _dataset(np.eye(4))
        k = GramMatrix(np.eye(4), Linear(), ds)
        npt.assert_allclose(frobenius_normalize(k).values, np.eye(4) / 2.0)

    def test_unit_norm_unchanged(self, rng):
        ds = _dataset(rng.normal(size=(3, 3)))
        raw = rng.normal(size=(3, 3))
        raw = (raw + raw.T) / 2.0
        raw /= np.linalg.norm(raw)
        k = GramMatrix(raw, Linear(), ds)
        npt.assert_allclose(frobenius_normalize(k).values, raw, atol=1e-15)

    def test_scaled_identity(self):
        ds = _dataset(np.eye(2))
        k = GramMatrix(np.array([[2.0, 0.0], [0.0, 2.0]]), Linear(), ds)
        npt.assert_allclose(frobenius_normalize(k).values, np.eye(2) / np.sqrt(2.0))

    def test_scale_annotated_in_spec(self):
        ds = _dataset(np.eye(2))
        k = GramMatrix(2.0 * np.eye(2), Linear(), ds)
        out = frobenius_normalize(k)
        assert isinstance(out.spec, WeightedSum)
        (weight, inner), = out.spec.terms
        npt.assert_allclose(weight, 1.0 / (2.0 * np.sqrt(2.0)))
        assert inner == Linear()

    def test_zero_matrix_rejected(self):
        ds = _dataset(np.eye(2))
        with pytest.raises(ValueError, match="zero"):
            frobenius_normalize(GramMatrix(np.zeros((2, 2)), Linear(), ds))


class TestIdealKernel:
    def test_two_class_example(self):
        y = ideal_kernel(np.array([0, 0, 1]), 2)
        npt.assert_array_equal(y.values, [[1, 1, -1], [1, 1, -1], [-1, -1, 1]])

    def test_three_class_off_diagonal(self):
        y = ideal_kernel(np.array([0, 1, 2]), 3)
        off = y.values[~np.eye(3, dtype=bool)]
        npt.assert_allclose(off, -0.5)

    def test_single_present_class_all_ones(self):
        y = ideal_kernel(np.array([1, 1, 1]), 2)
        npt.assert_array_equal(y.values, np.ones((3, 3)))

    def test_p_below_two_rejected(self):
        with pytest.raises(ValueError):
            ideal_kernel(np.array([0, 0]), 1)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_psd_for_random_labels(self, p, rng):
        labels = rng.integers(0, p, 20)
        y = ideal_kernel(labels, p)
        assert np.linalg.eigvalsh(y.values).min() >= -1e-8


class TestAlignment:
    def test_self_alignment_is_one(self):
        y = ideal_kernel(np.array([0, 1, 0, 1]), 2).values
        npt.assert_allclose(alignment(y, y), 1.0, atol=1e-12)

    def test_scale_invariance(self, rng):
        k = rng.normal(size=(5, 5))
        y = rng.normal(size=(5, 5))
        npt.assert_allclose(alignment(7.0 * k, y), alignment(k, y), atol=1e-12)

    def test_hand_computed_value(self):
        value = alignment(np.eye(2), np.array([[1.0, -1.0], [-1.0, 1.0]]))
        npt.assert_allclose(value, 1.0 / np.sqrt(2.0), atol=1e-15)

    def test_bounded_by_one(self, rng):
        for _ in range(20):
            k = rng.normal(size=(4, 4))
            y = rng.normal(size=(4, 4))
            assert -1.0 - 1e-12 <= alignment(k, y) <= 1.0 + 1e-12

    def test_permutation_symmetry(self, rng):
        k = rng.normal(size=(6, 6))
        y = rng.normal(size=(6, 6))
        perm = rng.permutation(6)
        npt.assert_allclose(
            alignment(k[np.ix_(perm, perm)], y[np.ix_(perm, perm)]),
            alignment(k, y),
            atol=1e-12,
        )

    def test_psd_pair_inner_product_nonnegative(self, rng):
        for _ in range(20):
            a = rng.normal(size=(5, 5))
            b = rng.normal(size=(5, 5))
            k, y = a @ a.T, b @ b.T
            assert float(np.tensordot(k, y)) >= -1e-10
            assert alignment(k, y) >= -1e-12

    def test_zero_matrix_rejected(self):
        with pytest.raises(ValueError, match="zero"):
            alignment(np.zeros((2, 2)), np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError, match="shape"):
            alignment(np.eye(2), np.eye(3))


class TestSpecSerialization:
    CASES = [
        Linear(),
        ScaledRbf(0.25),
        Polynomial(degree=3, offset=1.5),
        WeightedSum(((1.0, ScaledRbf(0.5)), (0.25, Linear()))),
        WeightedSum(((2.0, Polynomial(2, 0.0)),)),
    ]

    @pytest.mark.parametrize("spec", CASES, ids=repr)
    def test_round_trip(self, spec):
        assert parse_kernel_spec(format_kernel_spec(spec)) == spec

    def test_nested_sums_flatten(self):
        nested = WeightedSum(((2.0, WeightedSum(((3.0, Linear()),))),))
        assert nested.terms == ((6.0, Linear()),)

    def test_negative_weight_rejected(self):
        with pytest.raises(ValueError, match="nonnegative"):
            WeightedSum(((-1.0, Linear()),))

    def test_empty_sum_rejected(self):
        with pytest.raises(ValueError, match="at least one"):
            WeightedSum(())

    def test_parse_errors(self):
        for bad in ("gaussian(1.0)", "scaled-rbf()", "weighted-sum(linear)"):
            with pytest.raises(ValueError):
                parse_kernel_spec(bad)


@settings(max_examples=30, deadline=None)
@given(
    st.floats(min_value=0.05, max_value=100.0),
    st.integers(min_value=2, max_value=6),
)
def test_rbf_values_in_unit_interval(sigma, n):
    # mathematically (0, 1]; tiny bandwidths underflow to exactly 0.0 in
    # float64, so the representable contract is [0, 1] with unit diagonal
    rng = np.random.default_rng(0)
    ds = _dataset(rng.normal(size=(n, 3)))
    values = gram(ScaledRbf(sigma), ds).values
    assert np.all(values >= 0.0) and np.all(values <= 1.0)
    assert np.all(np.diag(values) == 1.0)
