import gzip
import logging

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from fvib.data import (LabeledDataset, balance_classes, ensure_balanced, load_csv, load_idx,
                       read_idx, save_csv, split, synth_blobs, write_idx, IDX_IMAGES_MAGIC)
from fvib.errors import DataError, DomainError


def test_synth_blobs_shape_and_centres():
    ds = synth_blobs(4, 2000, dim=5, spread=0.1, seed=0)
    assert ds.features.shape == (8000, 5) and ds.is_balanced()
    from fvib.simplex import build_target_matrix
    centres = np.array([ds.features[ds.labels == k].mean(axis=0) for k in range(4)])
    np.testing.assert_allclose(centres[:, :3], build_target_matrix(4).targets, atol=0.01)
    np.testing.assert_allclose(centres[:, 3:], 0.0, atol=0.01)


def test_synth_blobs_validation():
    with pytest.raises(DomainError):
        synth_blobs(3, 5, dim=1)


def test_csv_roundtrip_is_exact(tmp_path, rng):
    ds = LabeledDataset(rng.standard_normal((7, 3)), np.array([2, 0, 1, 1, 0, 2, 2]), 3)
    path = tmp_path / "d.csv"
    save_csv(ds, path)
    back = load_csv(path)
    assert np.array_equal(back.features, ds.features)
    assert np.array_equal(back.labels, ds.labels)


def test_csv_label_remap(tmp_path):
    path = tmp_path / "d.csv"
    path.write_text("a,label,b\n1,7,2\n3,3,4\n5,7,6\n")
    ds = load_csv(path)
    assert ds.d == 2 and ds.labels.tolist() == [1, 0, 1]
    assert ds.label_map == {3: 0, 7: 1}
    np.testing.assert_array_equal(ds.features[0], [1.0, 2.0])


@pytest.mark.parametrize("body, match", [
    ("a,label\n1,x\n", "2: non-numeric label"),
    ("a,label\n1,1.5\n", "non-integral"),
    ("a,label\nnan,1\n", "NaN"),
    ("a,label\n1,2,3\n", "expected 2 fields"),
    ("a,b\n1,2\n", "label column"),
    ("", "empty file"),
    ("a,label\n", "no data rows"),
])
def test_csv_errors_carry_location(tmp_path, body, match):
    path = tmp_path / "bad.csv"
    path.write_text(body)
    with pytest.raises(DataError, match=match):
        load_csv(path)


def test_idx_roundtrip_and_gzip(tmp_path, rng):
    images = rng.integers(0, 256, size=(4, 3, 2), dtype=np.uint8)
    labels = np.array([3, 1, 3, 0], dtype=np.uint8)
    write_idx(tmp_path / "img", images)
    write_idx(tmp_path / "lab", labels)
    with open(tmp_path / "img", "rb") as src, gzip.open(tmp_path / "img.gz", "wb") as dst:
        dst.write(src.read())
    assert np.array_equal(read_idx(tmp_path / "img.gz", IDX_IMAGES_MAGIC), images)
    ds = load_idx(tmp_path / "img", tmp_path / "lab")
    assert ds.features.shape == (4, 6) and ds.features.max() <= 1.0
    assert ds.labels.tolist() == [2, 1, 2, 0]


def test_idx_bad_magic_and_truncation(tmp_path):
    write_idx(tmp_path / "lab", np.array([1, 2], dtype=np.uint8))
    with pytest.raises(DataError, match="magic"):
        read_idx(tmp_path / "lab", IDX_IMAGES_MAGIC)
    blob = (tmp_path / "lab").read_bytes()
    (tmp_path / "cut").write_bytes(blob[:-1])
    with pytest.raises(DataError, match="data bytes"):
        read_idx(tmp_path / "cut", 0x00000801)


def test_dataset_validation():
    with pytest.raises(DataError):
        LabeledDataset(np.zeros((2, 2)), np.array([0, 3]), 2)
    with pytest.raises(DataError):
        LabeledDataset(np.array([[np.inf, 0.0]]), np.array([0]), 2)


def test_balancing(caplog):
    ds = synth_blobs(3, 10, seed=0).subset(np.r_[0:10, 10:16, 20:28])
    with pytest.raises(DataError):
        ensure_balanced(ds, strict=True)
    with caplog.at_level(logging.WARNING):
        bal = ensure_balanced(ds, strict=False, seed=1)
    assert bal.class_counts().tolist() == [6, 6, 6] and bal.balanced
    assert "undersampling" in caplog.text and "6 example" in caplog.text
    assert np.array_equal(balance_classes(ds, 1).labels, bal.labels)


def test_split_rejects_degenerate():
    ds = synth_blobs(2, 2, seed=0)
    with pytest.raises(DataError):
        split(ds, (0.8, 0.1, 0.1))
    with pytest.raises(DomainError):
        split(ds, (0.5, 0.5, 0.0))


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 5), st.integers(5, 40), st.integers(0, 1000))
def test_split_is_stratified_partition(d, per_class, seed):
    ds = synth_blobs(d, per_class, seed=seed)
    parts = split(ds, (0.6, 0.2, 0.2), seed=seed)
    sizes = sum(len(p) for p in parts)
    assert sizes == len(ds)
    rows = np.concatenate([p.features for p in parts])
    assert len({r.tobytes() for r in rows}) == len(ds)
    for p in parts:
        counts = p.class_counts()
        assert counts.max() == counts.min() and p.balanced
    again = split(ds, (0.6, 0.2, 0.2), seed=seed)
    assert all(np.array_equal(a.labels, b.labels) for a, b in zip(parts, again))


def test_manifest():
    ds = synth_blobs(3, 4, seed=0)
    m = ds.manifest(seed=0)
    assert m["N"] == 12 and m["d"] == 3 and m["source"].startswith("synth_blobs")
