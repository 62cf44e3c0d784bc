import numpy as np
import numpy.testing as npt
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from kmetric.data import (
    Dataset,
    SplitPlan,
    fit_standardizer,
    load_csv,
    make_synthetic,
    split,
    standardize,
)


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestLoadCsv:
    def test_three_row_two_class_encoding(self, tmp_path):
        path = _write(tmp_path, "1.0,2.0,a\n3.0,4.0,a\n5.0,6.0,b\n")
        ds = load_csv(path, 2)
        assert ds.n == 3 and ds.class_count == 2
        npt.assert_array_equal(ds.labels, [0, 0, 1])
        npt.assert_allclose(ds.features, [[1, 2], [3, 4], [5, 6]])

    def test_non_numeric_feature_cell(self, tmp_path):
        path = _write(tmp_path, "1.0,,a\n3.0,4.0,b\n")
        with pytest.raises(ValueError, match="non-numeric feature"):
            load_csv(path, 2)

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            load_csv(tmp_path / "nope.csv", 0)

    def test_single_class_rejected(self, tmp_path):
        path = _write(tmp_path, "1.0,a\n2.0,a\n")
        with pytest.raises(ValueError, match="two classes"):
            load_csv(path, 1)

    def test_empty_file(self, tmp_path):
        path = _write(tmp_path, "")
        with pytest.raises(ValueError, match="empty"):
            load_csv(path, 0)

    def test_header_only_file(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n")
        with pytest.raises(ValueError, match="no data rows"):
            load_csv(path, "label")

    def test_iris_shape(self, iris):
        assert iris.n == 150
        assert iris.dim == 4
        assert iris.class_count == 3

    def test_label_column_by_name_and_negative_index(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,2,u\n3,4,v\n")
        by_name = load_csv(path, "label")
        by_index = load_csv(path, -1)
        npt.assert_array_equal(by_name.labels, by_index.labels)
        assert by_name.feature_names == ("x", "y")

    def test_unknown_label_name(self, tmp_path):
        path = _write(tmp_path, "x,y,label\n1,2,u\n3,4,v\n")
        with pytest.raises(ValueError, match="no column named"):
            load_csv(path, "target")

    def test_first_appearance_encoding_preserves_row_order(self, tmp_path):
        path = _write(tmp_path, "1,b\n2,a\n3,b\n")
        ds = load_csv(path, 1)
        npt.assert_array_equal(ds.labels, [0, 1, 0])


class TestStandardize:
    def test_two_point_column(self):
        ds = Dataset(np.array([[1.0], [3.0]]), np.array([0, 1]), 2)
        npt.assert_allclose(standardize(ds).features, [[-1.0], [1.0]])

    def test_constant_column_maps_to_zero(self):
        ds = Dataset(np.array([[5.0], [5.0], [5.0]]), np.array([0, 0, 1]), 2)
        npt.assert_array_equal(standardize(ds).features, np.zeros((3, 1)))

    def test_population_variance_convention(self):
        # column [0,2,4]: mean 2, population variance 8/3
        ds = Dataset(np.array([[0.0, 10.0], [2.0, 10.0], [4.0, 10.0]]), np.array([0, 1, 0]), 2)
        out = standardize(ds).features
        c = np.sqrt(3.0 / 2.0)
        npt.assert_allclose(out[:, 0], [-c, 0.0, c], atol=1e-12)
        npt.assert_array_equal(out[:, 1], [0.0, 0.0, 0.0])

    def test_idempotent(self, rng):
        ds = Dataset(rng.normal(size=(20, 4)) * 7 + 3, rng.integers(0, 2, 20), 2)
        once = standardize(ds)
        twice = standardize(once)
        npt.assert_allclose(twice.features, once.features, atol=1e-12)

    def test_train_stats_apply_to_other_data(self, rng):
        train = Dataset(rng.normal(size=(30, 3)), rng.integers(0, 2, 30), 2)
        test = Dataset(rng.normal(size=(10, 3)), rng.integers(0, 2, 10), 2)
        scaler = fit_standardizer(train)
        expected = (test.features - train.features.mean(axis=0)) / train.features.std(axis=0)
        npt.assert_allclose(scaler.apply(test).features, expected, atol=1e-12)

    def test_needs_two_rows(self):
        ds = Dataset(np.array([[1.0]]), np.array([0]), 1)
        with pytest.raises(ValueError):
            standardize(ds)


class TestDataset:
    def test_rejects_non_finite(self):
        with pytest.raises(ValueError, match="non-finite"):
            Dataset(np.array([[np.nan]]), np.array([0]), 1)

    def test_rejects_label_out_of_range(self):
        with pytest.raises(ValueError, match="class_count"):
            Dataset(np.array([[1.0]]), np.array([3]), 2)


def _index_ids(ds):
    # features encode the original row id in the first column
    return [int(v) for v in ds.features[:, 0]]


class TestSplit:
    def make(self, n=10):
        feats = np.column_stack([np.arange(n, dtype=float), np.zeros(n)])
        return Dataset(feats, np.array([0, 1] * (n // 2)), 2)

    def test_cardinality_and_disjointness(self):
        ds = self.make()
        train, test = split(ds, SplitPlan(seed=0, train_size=6, repetitions=1), 0)
        assert train.n == 6 and test.n == 4
        assert not set(_index_ids(train)) & set(_index_ids(test))

    def test_deterministic(self):
        ds = self.make()
        plan = SplitPlan(seed=3, train_size=6, repetitions=2)
        a = split(ds, plan, 1)
        b = split(ds, plan, 1)
        npt.assert_array_equal(a[0].features, b[0].features)
        npt.assert_array_equal(a[1].features, b[1].features)

    def test_pinned_permutations_for_default_seed(self):
        # regression fixture: generator output frozen for (seed=0, n=10, train=6)
        ds = self.make()
        plan = SplitPlan(seed=0, train_size=6, repetitions=2)
        train0, test0 = split(ds, plan, 0)
        train1, _ = split(ds, plan, 1)
        assert _index_ids(train0) == [2, 3, 4, 5, 6, 7]
        assert _index_ids(test0) == [0, 1, 8, 9]
        assert _index_ids(train1) == [1, 3, 6, 7, 8, 9]
        assert _index_ids(train0) != _index_ids(train1)

    def test_every_class_reaches_training(self):
        # class 1 has a single member; it must always land in train
        feats = np.arange(12, dtype=float).reshape(6, 2)
        ds = Dataset(feats, np.array([0, 0, 0, 0, 0, 1]), 2)
        for rep in range(8):
            train, _ = split(ds, SplitPlan(seed=1, train_size=3, repetitions=8), rep)
            assert 1 in train.labels

    def test_train_size_too_large(self):
        ds = self.make()
        with pytest.raises(ValueError, match="train_size"):
            split(ds, SplitPlan(seed=0, train_size=10, repetitions=1), 0)

    def test_rep_out_of_range(self):
        ds = self.make()
        with pytest.raises(ValueError, match="rep"):
            split(ds, SplitPlan(seed=0, train_size=6, repetitions=1), 1)


class TestSynthetic:
    def test_exact_radii_without_noise(self):
        ds = make_synthetic("concentric-circles", 10, 0.0, seed=1)
        radii = np.linalg.norm(ds.features, axis=1)
        npt.assert_allclose(radii[ds.labels == 0], 1.0, atol=1e-12)
        npt.assert_allclose(radii[ds.labels == 1], 2.0, atol=1e-12)

    def test_cardinality(self):
        ds = make_synthetic("concentric-circles", 50, 0.1, seed=2)
        assert ds.n == 100 and ds.class_count == 2
        npt.assert_array_equal(np.bincount(ds.labels), [50, 50])

    def test_interleaved_curves_counts_and_finite(self):
        ds = make_synthetic("interleaved-curves", 30, 0.05, seed=3)
        npt.assert_array_equal(np.bincount(ds.labels), [30, 30])
        assert np.isfinite(ds.features).all()

    def test_unknown_kind(self):
        with pytest.raises(ValueError, match="unknown synthetic kind"):
            make_synthetic("spiral", 10, 0.0, seed=0)

    def test_plain_1nn_separates_noisy_circles(self):
        # the manifolds are kNN-separable; learned linear maps are what fail
        ds = make_synthetic("concentric-circles", 50, 0.05, seed=99)
        train, test = split(ds, SplitPlan(seed=4, train_size=50, repetitions=1), 0)
        d2 = ((test.features[:, None, :] - train.features[None, :, :]) ** 2).sum(-1)
        pred = train.labels[np.argsort(d2, axis=1, kind="stable")[:, 0]]
        score = float((pred == test.labels).mean())
        assert score == 0.94  # pinned; >= 0.9 is the property of interest
        assert score >= 0.9


@settings(max_examples=25, deadline=None)
@given(st.integers(min_value=0, max_value=2**31 - 1), st.integers(min_value=2, max_value=5))
def test_split_reproducible_for_any_seed(seed, rep_count):
    feats = np.arange(24, dtype=float).reshape(12, 2)
    ds = Dataset(feats, np.array([0, 1] * 6), 2)
    plan = SplitPlan(seed=seed, train_size=7, repetitions=rep_count)
    for rep in range(rep_count):
        a, _ = split(ds, plan, rep)
        b, _ = split(ds, plan, rep)
        npt.assert_array_equal(a.features, b.features)
