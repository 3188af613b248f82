import json

import numpy as np
import pytest

from ronsynth.dataset import (
    DataError,
    Dataset,
    clip_labels,
    load_csv,
    write_dataset_csv,
    write_release,
)

META = {
    "mode": "unsupervised", "m": 2, "p": 2, "n": 3, "n_synth": 3,
    "epsilon_total": 1.0, "epsilon_mu": 0.3, "epsilon_sigma": 0.7,
    "split_ratio": 0.3, "label_bound": None, "seed": 0,
    "psd_repair_applied": False, "clip_count": 0, "timestamp": "t",
}


def _write(tmp_path, text, name="in.csv"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadCsv:
    def test_plain_numeric_file(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n3,4\n5,6\n")
        data = load_csv(path)
        assert data.n_samples == 3 and data.n_features == 2
        assert data.labels is None and data.class_labels is None
        # columns-as-samples internally
        assert np.array_equal(data.features[:, 0], [1.0, 2.0])
        assert data.feature_names == ("f1", "f2")

    def test_real_label_column_split(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n3,4\n5,6\n")
        data = load_csv(path, label_column="f2", label_kind="real")
        assert data.n_samples == 3 and data.n_features == 1
        assert np.array_equal(data.labels, [2.0, 4.0, 6.0])

    def test_categorical_labels(self, tmp_path):
        path = _write(tmp_path, "f1,cls\n1,a\n2,b\n3,a\n")
        data = load_csv(path, label_column="cls", label_kind="categorical")
        assert list(data.class_labels) == ["a", "b", "a"]

    def test_non_numeric_cell_names_row_and_column(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n3,abc\n")
        with pytest.raises(DataError, match=r"row 3.*'f2'"):
            load_csv(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(DataError, match="no such file"):
            load_csv(str(tmp_path / "nope.csv"))

    def test_missing_label_column(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n")
        with pytest.raises(DataError, match="label column"):
            load_csv(path, label_column="y", label_kind="real")

    def test_no_rows_dropped(self, tmp_path):
        rows = "\n".join(f"{i},{i + 1}" for i in range(57))
        path = _write(tmp_path, "a,b\n" + rows + "\n")
        assert load_csv(path).n_samples == 57

    def test_ragged_row_rejected(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n3\n")
        with pytest.raises(DataError, match="row 3"):
            load_csv(path)

    def test_interior_blank_line_rejected_trailing_tolerated(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n\n3,4\n")
        with pytest.raises(DataError, match="blank line at row 3"):
            load_csv(path)
        ok = _write(tmp_path, "f1,f2\n1,2\n3,4\n\n\n", name="ok.csv")
        assert load_csv(ok).n_samples == 2

    def test_bad_label_kind(self, tmp_path):
        path = _write(tmp_path, "f1,f2\n1,2\n")
        with pytest.raises(ValueError):
            load_csv(path, label_column="f2", label_kind="ordinal")


class TestDatasetInvariants:
    def test_rejects_nan(self):
        with pytest.raises(DataError, match="non-finite"):
            Dataset(features=np.array([[1.0, np.nan]]))

    def test_rejects_empty(self):
        with pytest.raises(DataError):
            Dataset(features=np.empty((0, 3)))

    def test_rejects_label_length_mismatch(self):
        with pytest.raises(DataError):
            Dataset(features=np.eye(2), labels=np.array([1.0]))

    def test_rejects_out_of_bound_labels(self):
        with pytest.raises(DataError, match="bound"):
            Dataset(features=np.eye(2), labels=np.array([0.5, 2.0]), label_bound=1.0)

    def test_rejects_both_label_kinds(self):
        with pytest.raises(DataError):
            Dataset(features=np.eye(2), labels=np.array([0.0, 1.0]),
                    class_labels=np.array(["a", "b"]))


class TestClipLabels:
    def test_clips_and_counts(self):
        clipped, count = clip_labels(np.array([-2.0, 0.5, 3.0]), 1.0)
        assert np.array_equal(clipped, [-1.0, 0.5, 1.0])
        assert count == 2

    def test_in_range_untouched(self):
        clipped, count = clip_labels(np.array([0.2, -0.9]), 1.0)
        assert np.array_equal(clipped, [0.2, -0.9])
        assert count == 0

    def test_boundary_is_inclusive(self):
        clipped, count = clip_labels(np.array([1.0]), 1.0)
        assert np.array_equal(clipped, [1.0])
        assert count == 0

    def test_rejects_nonpositive_bound(self):
        with pytest.raises(ValueError):
            clip_labels(np.array([0.0]), 0.0)


class TestWriteRelease:
    def test_unlabeled_release_shape(self, tmp_path):
        release = Dataset(features=np.random.default_rng(0).normal(size=(2, 3)))
        data_path, meta_path = write_release(release, dict(META), str(tmp_path / "out"))
        header = open(data_path).readline().strip().split(",")
        assert header == ["z1", "z2"]
        meta = json.load(open(meta_path))
        assert meta["epsilon_total"] == 1.0

    def test_supervised_release_has_label_column(self, tmp_path):
        release = Dataset(features=np.zeros((2, 3)), labels=np.array([1.0, 2.0, 3.0]))
        data_path, _ = write_release(release, dict(META), str(tmp_path / "out"))
        header = open(data_path).readline().strip().split(",")
        assert header == ["z1", "z2", "label"]

    def test_gmm_release_has_class_column_with_names(self, tmp_path):
        release = Dataset(features=np.zeros((2, 3)),
                          class_labels=np.array(["cat", "dog", "cat"]))
        data_path, _ = write_release(release, dict(META), str(tmp_path / "out"))
        lines = open(data_path).read().splitlines()
        assert lines[0].split(",")[-1] == "class"
        assert [ln.split(",")[-1] for ln in lines[1:]] == ["cat", "dog", "cat"]

    def test_missing_metadata_key_rejected(self, tmp_path):
        release = Dataset(features=np.zeros((1, 1)))
        bad = dict(META)
        del bad["epsilon_total"]
        with pytest.raises(ValueError, match="epsilon_total"):
            write_release(release, bad, str(tmp_path / "out"))

    def test_round_trip_is_exact(self, tmp_path):
        # 17 significant digits round-trip doubles exactly, so the
        # reload must match bit for bit, not just approximately
        rng = np.random.default_rng(99)
        release = Dataset(features=rng.normal(size=(4, 25)) * 10.0 ** rng.integers(-8, 8),
                          labels=rng.normal(size=25))
        data_path, _ = write_release(release, dict(META), str(tmp_path / "out"))
        reloaded = load_csv(data_path, label_column="label", label_kind="real")
        assert np.array_equal(reloaded.features, release.features)
        assert np.array_equal(reloaded.labels, release.labels)

    def test_write_dataset_csv_keeps_feature_names(self, tmp_path):
        ds = Dataset(features=np.ones((2, 2)), feature_names=("height", "width"))
        path = write_dataset_csv(ds, str(tmp_path / "d.csv"))
        assert open(path).readline().strip() == "height,width"
