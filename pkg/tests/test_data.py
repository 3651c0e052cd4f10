import numpy as np
import numpy.testing as npt
import pytest

from sapt.data import (
    Dataset,
    feature_stats,
    load_csv,
    load_registered,
    load_registry,
    make_dataset,
    normalize,
    one_hot,
    registry_entry,
    resolve_data_file,
    save_csv,
    split,
)
from sapt.exceptions import ConfigError, ContractError, DataFormatError


class TestOneHot:
    def test_basic(self):
        z = one_hot([2, 0, 1], 3)
        npt.assert_array_equal(z, [[0, 0, 1], [1, 0, 0], [0, 1, 0]])
        assert z.dtype == np.float64

    def test_rows_sum_to_one(self):
        rng = np.random.default_rng(1)
        labels = rng.integers(0, 4, 100)
        npt.assert_array_equal(one_hot(labels, 4).sum(axis=1), np.ones(100))

    def test_rejects_out_of_range(self):
        with pytest.raises(DataFormatError):
            one_hot([0, 3], 3)
        with pytest.raises(DataFormatError):
            one_hot([-1], 3)


class TestDatasetInvariants:
    def test_counts(self, tiny_dataset):
        assert tiny_dataset.sample_count == 40
        assert tiny_dataset.feature_count == 2
        assert tiny_dataset.class_count == 2

    def test_rejects_non_finite(self):
        with pytest.raises(ContractError):
            make_dataset(np.array([[np.inf, 0.0]]), [0], 2)

    def test_rejects_row_mismatch(self):
        with pytest.raises(ContractError):
            Dataset(np.zeros((3, 2)), np.zeros(2, dtype=np.int64),
                    np.zeros((3, 2)))


class TestCsvRoundTrip:
    def test_load_and_save(self, tmp_path):
        path = tmp_path / "toy.csv"
        path.write_text("0.5,1.25,0\n-3.0,0.0,1\n2.0,7.5,2\n")
        ds = load_csv(path, feature_count=2, class_count=3)
        npt.assert_array_equal(ds.labels, [0, 1, 2])
        npt.assert_array_equal(ds.features,
                               [[0.5, 1.25], [-3.0, 0.0], [2.0, 7.5]])
        out = tmp_path / "again.csv"
        save_csv(ds, out)
        ds2 = load_csv(out, feature_count=2, class_count=3)
        npt.assert_array_equal(ds2.features, ds.features)
        npt.assert_array_equal(ds2.labels, ds.labels)

    def test_skip_header_and_blank_lines(self, tmp_path):
        path = tmp_path / "h.csv"
        path.write_text("a,b,label\n1,2,0\n\n3,4,1\n")
        ds = load_csv(path, 2, 2, skip_header=True)
        assert ds.sample_count == 2

    def test_errors(self, tmp_path):
        missing = tmp_path / "nope.csv"
        with pytest.raises(DataFormatError):
            load_csv(missing, 2, 2)
        bad_cols = tmp_path / "cols.csv"
        bad_cols.write_text("1,2,3,0\n")
        with pytest.raises(DataFormatError):
            load_csv(bad_cols, 2, 2)
        bad_label = tmp_path / "lab.csv"
        bad_label.write_text("1,2,1.5\n")
        with pytest.raises(DataFormatError):
            load_csv(bad_label, 2, 2)
        out_of_range = tmp_path / "range.csv"
        out_of_range.write_text("1,2,5\n")
        with pytest.raises(DataFormatError):
            load_csv(out_of_range, 2, 2)
        empty = tmp_path / "empty.csv"
        empty.write_text("\n")
        with pytest.raises(DataFormatError):
            load_csv(empty, 2, 2)
        garbage = tmp_path / "garbage.csv"
        garbage.write_text("1,x,0\n")
        with pytest.raises(DataFormatError):
            load_csv(garbage, 2, 2)


class TestNormalize:
    def test_train_columns_scaled_to_unit_interval(self, tiny_dataset):
        stats = feature_stats(tiny_dataset.features)
        scaled = normalize(tiny_dataset, stats)
        npt.assert_allclose(scaled.features.min(axis=0), 0.0, atol=1e-15)
        npt.assert_allclose(scaled.features.max(axis=0), 1.0, rtol=1e-15)

    def test_constant_column_maps_to_zero(self):
        ds = make_dataset(np.array([[5.0, 1.0], [5.0, 3.0]]), [0, 1], 2)
        scaled = normalize(ds, feature_stats(ds.features))
        npt.assert_array_equal(scaled.features[:, 0], [0.0, 0.0])
        assert np.all(np.isfinite(scaled.features))


class TestSplit:
    def build(self, n_per_class=30, classes=3, seed=41):
        rng = np.random.default_rng(seed)
        n = n_per_class * classes
        feats = rng.normal(size=(n, 2))
        labels = np.repeat(np.arange(classes), n_per_class)
        return make_dataset(feats, labels, classes)

    def test_stratified_counts(self):
        ds = self.build()
        train, test = split(ds, train_fraction=0.6, seed=0)
        for cls in range(3):
            assert np.sum(train.labels == cls) == 18
            assert np.sum(test.labels == cls) == 12
        assert train.split == "train"
        assert test.split == "test"

    def test_disjoint_and_covering(self):
        ds = self.build()
        # tag rows through the first feature to track membership
        feats = ds.features.copy()
        feats[:, 0] = np.arange(ds.sample_count)
        ds = make_dataset(feats, ds.labels, 3)
        train, test = split(ds, seed=3, normalize_features=False)
        ids = np.concatenate([train.features[:, 0], test.features[:, 0]])
        assert sorted(ids) == list(range(90))

    def test_deterministic_per_seed(self):
        ds = self.build()
        a1, b1 = split(ds, seed=5)
        a2, b2 = split(ds, seed=5)
        npt.assert_array_equal(a1.features, a2.features)
        npt.assert_array_equal(b1.labels, b2.labels)
        a3, _ = split(ds, seed=6)
        assert not np.array_equal(a1.features, a3.features)

    def test_test_side_uses_train_statistics(self):
        ds = self.build()
        train_raw, test_raw = split(ds, seed=7, normalize_features=False)
        train, test = split(ds, seed=7, normalize_features=True)
        stats = feature_stats(train_raw.features)
        npt.assert_allclose(test.features,
                            (test_raw.features - stats.lo) / stats.span,
                            rtol=1e-14)

    def test_bad_fraction(self):
        ds = self.build()
        with pytest.raises(ContractError):
            split(ds, train_fraction=0.0)
        with pytest.raises(ContractError):
            split(ds, train_fraction=1.0)

    def test_class_starved_split(self):
        ds = make_dataset(np.random.default_rng(0).normal(size=(5, 2)),
                          [0, 0, 0, 0, 1], 2)
        with pytest.raises(DataFormatError):
            split(ds, train_fraction=0.1)


class TestRegistry:
    def test_iris_entry(self):
        entry = registry_entry("iris")
        assert entry.attribute_count == 4
        assert entry.class_count == 3
        topo = entry.topology()
        assert (topo.input_count, topo.output_count) == (4, 3)

    def test_cancer_entry(self):
        entry = registry_entry("cancer")
        assert entry.attribute_count == 9
        assert entry.class_count == 2

    def test_unknown_name_lists_registry(self):
        with pytest.raises(ConfigError) as err:
            registry_entry("mnist")
        assert "iris" in str(err.value)

    def test_bundled_files_resolve(self):
        for name in load_registry():
            entry = registry_entry(name)
            if entry.bundled:
                assert resolve_data_file(entry).is_file()

    def test_load_registered_shapes(self, iris):
        entry, train, test = iris
        assert train.feature_count == 4
        assert train.class_count == 3
        assert train.sample_count + test.sample_count == 150
        # 0.6 of each 50-row class rounds to 30
        for cls in range(3):
            assert np.sum(train.labels == cls) == 30

    def test_load_registered_deterministic(self):
        _, train_a, _ = load_registered("iris", seed=9)
        _, train_b, _ = load_registered("iris", seed=9)
        npt.assert_array_equal(train_a.features, train_b.features)
