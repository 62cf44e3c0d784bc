import numpy as np
import numpy.testing as npt
import pytest

from kmetric.nca import GradientDescentConfig, nca_fit, nca_gradient, nca_objective
from kmetric.numerics import check_gradient


def _direct_objective(a, x, labels):
    """Independent two-loop reimplementation of the soft LOO loss."""
    z = x @ a.T
    n = len(labels)
    total = 0.0
    for i in range(n):
        weights = np.array(
            [np.exp(-((z[i] - z[k]) ** 2).sum()) if k != i else 0.0 for k in range(n)]
        )
        p = weights / weights.sum()
        total -= sum(p[j] for j in range(n) if labels[j] == labels[i] and j != i)
    return total


class TestObjective:
    def test_zero_map_uniform_softmax(self, rng):
        # balanced 2-class, 4 points: p_ij = 1/3because all distances vanish
        x = rng.normal(size=(4, 2))
        labels = np.array([0, 0, 1, 1])
        npt.assert_allclose(nca_objective(np.zeros((2, 2)), x, labels), -4.0 / 3.0, atol=1e-12)

    def test_two_points_same_class(self, rng):
        x = rng.normal(size=(2, 3))
        labels = np.array([1, 1])
        assert nca_objective(np.eye(3), x, labels) == -2.0

    def test_matches_direct_reimplementation(self, rng):
        x = rng.normal(size=(10, 3))
        labels = rng.integers(0, 3, 10)
        a = rng.normal(size=(2, 3))
        npt.assert_allclose(
            nca_objective(a, x, labels), _direct_objective(a, x, labels), atol=1e-10
        )

    def test_bounded(self, rng):
        for _ in range(10):
            n = int(rng.integers(3, 12))
            x = rng.normal(size=(n, 2)) * 10
            labels = rng.integers(0, 2, n)
            a = rng.normal(size=(2, 2)) * 5
            value = nca_objective(a, x, labels)
            assert -n <= value <= 0.0

    def test_stable_under_large_distances(self, rng):
        x = rng.normal(size=(6, 2)) * 1e4
        labels = rng.integers(0, 2, 6)
        value = nca_objective(np.eye(2), x, labels)
        assert np.isfinite(value)


class TestGradient:
    def test_zero_map_gives_zero_gradient(self, rng):
        x = rng.normal(size=(7, 3))
        labels = rng.integers(0, 2, 7)
        npt.assert_array_equal(nca_gradient(np.zeros((3, 3)), x, labels), np.zeros((3, 3)))

    def test_constant_objective_two_points(self, rng):
        x = rng.normal(size=(2, 2))
        labels = np.array([0, 0])
        npt.assert_allclose(nca_gradient(np.eye(2), x, labels), 0.0, atol=1e-12)

    @pytest.mark.parametrize("trial", range(5))
    def test_finite_difference_agreement(self, trial, rng):
        local = np.random.default_rng(trial)
        n, dim = int(local.integers(5, 15)), int(local.integers(2, 5))
        x = local.normal(size=(n, dim))
        labels = local.integers(0, 2, n)
        for d in {1, 2, dim}:
            if d > dim:
                continue
            a0 = local.normal(size=(d, dim)) * 0.5
            err = check_gradient(
                lambda a: nca_objective(a, x, labels),
                lambda a: nca_gradient(a, x, labels),
                a0,
                h=1e-5,
            )
            assert err <= 1e-5


class TestFit:
    def test_monotone_objective_trace(self, rng):
        x = np.vstack([rng.normal(size=(10, 2)), rng.normal(size=(10, 2)) + 4.0])
        labels = np.repeat([0, 1], 10)
        result = nca_fit(x, labels, 2)
        trace = result.objective_trace
        assert all(trace[i + 1] <= trace[i] + 1e-12 for i in range(len(trace) - 1))
        assert trace[-1] <= trace[0]

    def test_already_collapsed_classes_not_degraded(self):
        # each class sits on a single distinct point: objective near -n
        x = np.array([[0.0, 0.0]] * 5 + [[100.0, 0.0]] * 5)
        labels = np.repeat([0, 1], 5)
        result = nca_fit(x, labels, 2, opt=GradientDescentConfig(max_iter=20))
        assert result.objective_trace[-1] <= result.objective_trace[0]
        npt.assert_allclose(result.objective_trace[0], -10.0, atol=1e-6)

    def test_pinned_regression_instance(self):
        rng = np.random.default_rng(42)
        x = rng.normal(size=(12, 3))
        labels = rng.integers(0, 2, 12)
        result = nca_fit(x, labels, 2)
        npt.assert_allclose(result.objective_trace[0], -4.903694668137106, rtol=1e-12)
        npt.assert_allclose(result.objective_trace[-1], -8.99999980776828, rtol=1e-9)

    def test_output_shape_and_provenance(self, rng):
        x = rng.normal(size=(8, 4))
        labels = rng.integers(0, 2, 8)
        result = nca_fit(x, labels, 2)
        assert result.a.shape == (2, 4)
        assert result.provenance == "nca"

    def test_invalid_dimension(self, rng):
        x = rng.normal(size=(5, 2))
        with pytest.raises(ValueError, match="output dimension"):
            nca_fit(x, np.zeros(5, dtype=int), 3)
