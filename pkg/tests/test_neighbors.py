import numpy as np
import numpy.testing as npt
import pytest

from kmetric.neighbors import build_neighbor_graph, euclidean_distances


class TestLmnnMode:
    def test_collinear_targets(self):
        x = np.array([[0.0], [1.0], [5.0]])
        g = build_neighbor_graph(x, np.zeros(3, dtype=int), 1, "lmnn")
        expected = np.zeros((3, 3))
        expected[0, 1] = 1.0  # point 0's nearest same-class point is 1
        expected[1, 0] = 1.0
        expected[2, 1] = 1.0  # point 2 is closer to 1 than to 0
        npt.assert_array_equal(g.w, expected)

    def test_rows_have_k_targets(self, rng):
        x = rng.normal(size=(20, 3))
        labels = np.repeat([0, 1], 10)
        g = build_neighbor_graph(x, labels, 3, "lmnn")
        npt.assert_array_equal(g.w.sum(axis=1), np.full(20, 3.0))
        assert np.all(np.diag(g.w) == 0.0)

    def test_small_class_gets_all_available(self):
        x = np.arange(5, dtype=float)[:, None]
        labels = np.array([0, 0, 1, 1, 1])
        g = build_neighbor_graph(x, labels, 3, "lmnn")
        # class 0 has two members: one target each
        assert g.w[0].sum() == 1.0 and g.w[1].sum() == 1.0
        # class 1 has three members: two targets each
        assert g.w[2].sum() == 2.0

    def test_targets_are_same_class_only(self, rng):
        x = rng.normal(size=(12, 2))
        labels = rng.integers(0, 3, 12)
        g = build_neighbor_graph(x, labels, 2, "lmnn")
        i, j = np.nonzero(g.w)
        assert np.all(labels[i] == labels[j])


class TestDneMode:
    def test_two_far_clusters(self, rng):
        x = np.vstack([rng.normal(size=(5, 2)), rng.normal(size=(5, 2)) + 100.0])
        labels = np.repeat([0, 1], 5)
        g = build_neighbor_graph(x, labels, 1, "dne")
        i, j = np.nonzero(g.w == 1.0)
        assert np.all(labels[i] == labels[j])
        i, j = np.nonzero(g.w == -1.0)
        assert np.all(labels[i] != labels[j])

    def test_symmetric_by_or_rule(self, rng):
        x = rng.normal(size=(15, 2))
        labels = rng.integers(0, 2, 15)
        g = build_neighbor_graph(x, labels, 2, "dne")
        npt.assert_array_equal(g.w, g.w.T)
        assert np.all(np.diag(g.w) == 0.0)

    def test_or_rule_extends_asymmetric_choices(self):
        # x2 picks x1 as nearest same-class neighbor, but x1 picks x0;
        # the or-rule still links (1, 2) both ways
        x = np.array([[0.0], [1.0], [3.0]])
        g = build_neighbor_graph(x, np.zeros(3, dtype=int), 1, "dne")
        assert g.w[1, 2] == 1.0 and g.w[2, 1] == 1.0

    def test_values_limited_to_pm_one_and_zero(self, rng):
        x = rng.normal(size=(20, 3))
        labels = rng.integers(0, 3, 20)
        g = build_neighbor_graph(x, labels, 2, "dne")
        assert set(np.unique(g.w)) <= {-1.0, 0.0, 1.0}


class TestTiesAndOverrides:
    def test_tie_goes_to_lower_index(self):
        # points 1 and 2 are both at distance 1 from point 0
        x = np.array([[0.0], [1.0], [-1.0]])
        g = build_neighbor_graph(x, np.zeros(3, dtype=int), 1, "lmnn")
        assert g.w[0, 1] == 1.0 and g.w[0, 2] == 0.0

    def test_metric_override_changes_neighbors(self):
        x = np.array([[0.0], [1.0], [10.0]])

        def reversed_metric(points):
            return -euclidean_distances(points)  # closest becomes farthest

        plain = build_neighbor_graph(x, np.zeros(3, dtype=int), 1, "lmnn")
        flipped = build_neighbor_graph(x, np.zeros(3, dtype=int), 1, "lmnn", metric=reversed_metric)
        assert plain.w[0, 1] == 1.0
        assert flipped.w[0, 2] == 1.0

    def test_y_match_indicator(self):
        labels = np.array([0, 1, 0])
        g = build_neighbor_graph(np.arange(3, dtype=float)[:, None], labels, 1, "lmnn")
        npt.assert_array_equal(g.y_match, labels[:, None] == labels[None, :])


class TestValidation:
    def test_k_at_least_one(self):
        with pytest.raises(ValueError, match="k must be"):
            build_neighbor_graph(np.zeros((3, 1)), np.zeros(3, dtype=int), 0, "lmnn")

    def test_k_below_n(self):
        with pytest.raises(ValueError, match="k must be"):
            build_neighbor_graph(np.zeros((3, 1)), np.zeros(3, dtype=int), 3, "lmnn")

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="mode"):
            build_neighbor_graph(np.zeros((3, 1)), np.zeros(3, dtype=int), 1, "knn")

    def test_needs_two_points(self):
        with pytest.raises(ValueError, match="two points"):
            build_neighbor_graph(np.zeros((1, 1)), np.zeros(1, dtype=int), 1, "lmnn")
