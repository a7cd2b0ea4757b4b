import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from causefs import DataMatrix, SyntheticSpec, derive_treatment, load_dataset, save_csv, standardize, synthesize
from causefs.dataset import DatasetError


def test_csv_round_trip(tmp_path):
    data = DataMatrix.from_samples([[1.5, -2.0], [0.1, 3.0], [7.0, 1e-9]], labels=[0, 1, 1])
    path = tmp_path / "d.csv"
    save_csv(data, path)
    back = load_dataset(path)
    np.testing.assert_array_equal(back.values, data.values)
    np.testing.assert_array_equal(back.labels, data.labels)
    assert back.feature_ids == data.feature_ids
    assert (back.d, back.n, back.n_classes) == (2, 3, 2)


def test_csv_without_header_or_labels(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("1,2,3\n4,5,6\n")
    data = load_dataset(path)
    assert data.labels is None
    np.testing.assert_array_equal(data.values, [[1, 4], [2, 5], [3, 6]])
    forced = load_dataset(path, label_column=True)
    np.testing.assert_array_equal(forced.labels, [0, 1])


def test_labels_are_reencoded(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,b,label\n1,2,7\n3,4,3\n5,6,7\n")
    data = load_dataset(path)
    np.testing.assert_array_equal(data.labels, [1, 0, 1])
    assert data.feature_ids == ("a", "b")


def test_libsvm(tmp_path):
    path = tmp_path / "d.svm"
    path.write_text("1 1:0.5 3:2\n2 2:1.5\n1 1:1 2:1 3:1\n")
    data = load_dataset(path, "libsvm")
    assert (data.d, data.n, data.n_classes) == (3, 3, 2)
    np.testing.assert_array_equal(data.values[:, 0], [0.5, 0, 2])


@pytest.mark.parametrize("content,message", [
    ("", "no samples"),
    ("a,b\n", "no samples"),
    ("1,2\n3\n", "expected 2 fields"),
    ("1,2\n3,nan\n", "non-finite"),
    ("1,2\n", "at least 2 samples"),
    ("1\n2\n", "at least 2 features"),
])
def test_load_errors(tmp_path, content, message):
    path = tmp_path / "bad.csv"
    path.write_text(content)
    with pytest.raises(DatasetError, match=message):
        load_dataset(path)


def test_missing_file_names_path(tmp_path):
    with pytest.raises(DatasetError, match="nowhere.csv"):
        load_dataset(tmp_path / "nowhere.csv")


def test_standardize_examples():
    data = DataMatrix(np.array([[1.0, 2.0, 3.0], [5.0, 5.0, 5.0]]))
    out, constant = standardize(data)
    np.testing.assert_allclose(out.values[0], [-1, 0, 1])
    np.testing.assert_array_equal(out.values[1], [0, 0, 0])
    np.testing.assert_array_equal(constant, [1])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 6), st.integers(3, 20)),
              elements=st.floats(-1e3, 1e3)))
def test_standardize_moments_and_idempotence(X):
    once, constant = standardize(DataMatrix(X))
    twice, _ = standardize(once)
    np.testing.assert_allclose(twice.values, once.values, atol=1e-12)
    live = np.setdiff1d(np.arange(X.shape[0]), constant)
    V = once.values[live]
    assert np.all(np.abs(V.mean(axis=1)) <= 1e-10)
    assert np.all(np.abs(V.std(axis=1, ddof=1) - 1) <= 1e-10)


def test_treatment_examples():
    data = DataMatrix(np.array([[1.0, 2.0, 3.0, 4.0], [2.0, 2.0, 2.0, 2.0], [0.0, 1.0, 1.0, 1.0]]))
    design = derive_treatment(data)
    np.testing.assert_array_equal(design.E[0], [0, 0, 1, 1])
    np.testing.assert_array_equal(design.E[1], [0, 0, 0, 0])
    # a 0/1 feature keeps its coding even when 1 is the majority value
    np.testing.assert_array_equal(design.E[2], [0, 1, 1, 1])
    assert design.degenerate == frozenset({1})
    np.testing.assert_array_equal(design.contrast()[1], 0)
    np.testing.assert_allclose(design.contrast()[0], [-0.5, -0.5, 0.5, 0.5])


@settings(max_examples=100, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 5), st.integers(2, 15)),
              elements=st.integers(-3, 3).map(float)))
def test_treatment_partitions_samples(X):
    design = derive_treatment(DataMatrix(X))
    np.testing.assert_array_equal(design.E + design.C, 1)
    for r in range(X.shape[0]):
        # sort-based oracle: treated iff strictly above the median, except two-valued rows
        values = np.unique(X[r])
        if values.size == 2:
            expected = X[r] == values[1]
        else:
            s = np.sort(X[r])
            m = s.size // 2
            median = s[m] if s.size % 2 else 0.5 * (s[m - 1] + s[m])
            expected = X[r] > median
        np.testing.assert_array_equal(design.E[r], expected)


def test_synthesize_determinism_and_truth():
    spec = SyntheticSpec(n=200, n_causal=3, n_spurious=4, n_noise=5, seed=11)
    a, truth = synthesize(spec)
    b, _ = synthesize(spec)
    np.testing.assert_array_equal(a.values, b.values)
    all_idx = sorted(truth["causal"] + truth["spurious"] + truth["noise"])
    assert all_idx == list(range(12))
    assert [len(truth[k]) for k in ("causal", "spurious", "noise")] == [3, 4, 5]


def test_synthesize_without_spurious():
    _, truth = synthesize(SyntheticSpec(n_spurious=0))
    assert truth["spurious"] == []


def test_spurious_features_correlate_with_label():
    data, truth = synthesize(SyntheticSpec(n=500, confound_strength=2.0, seed=1))
    for f in truth["spurious"]:
        assert abs(np.corrcoef(data.values[f], data.labels)[0, 1]) > 0.2


def test_synthesize_labels_roughly_uniform():
    data, _ = synthesize(SyntheticSpec(n=600, n_clusters=3, seed=2))
    counts = np.bincount(data.labels)
    assert np.all(np.abs(counts - 200) <= 40)


def test_synthetic_spec_validation():
    with pytest.raises(ValueError):
        SyntheticSpec(n_causal=1, n_spurious=0, n_noise=0)
    with pytest.raises(ValueError):
        SyntheticSpec(noise_sigma=0)
