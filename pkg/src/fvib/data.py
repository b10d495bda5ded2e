"""Datasets: CSV and IDX ingestion, class balancing, stratified splits, synthetic blobs."""

import csv
import gzip
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import DataError, DomainError
from .simplex import build_target_matrix

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
LOW_DATA_THRESHOLD = 10


@dataclass(frozen=True)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    d: int
    split: str = "all"
    provenance: str = ""
    label_map: dict = field(default_factory=dict)
    balanced: bool = False

    def __post_init__(self):
        x = np.asarray(self.features, dtype=np.float64)
        y = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2 or y.shape != (x.shape[0],):
            raise DataError(f"features {x.shape} and labels {y.shape} disagree")
        if y.size and (y.min() < 0 or y.max() >= self.d):
            raise DataError(f"labels must lie in [0, {self.d})")
        if not np.all(np.isfinite(x)):
            raise DataError("features contain NaN or Inf")
        object.__setattr__(self, "features", x)
        object.__setattr__(self, "labels", y)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def n_features(self):
        return self.features.shape[1]

    def class_counts(self):
        return np.bincount(self.labels, minlength=self.d)

    def is_balanced(self):
        counts = self.class_counts()
        return bool(counts.min() == counts.max() and counts.min() > 0)

    def subset(self, idx, **changes):
        idx = np.asarray(idx, dtype=np.int64)
        return replace(self, features=self.features[idx], labels=self.labels[idx], **changes)

    def manifest(self, seed=None, splits=None):
        return {"source": self.provenance, "d": self.d, "N": len(self),
                "splits": splits or {self.split: len(self)}, "seed": seed}


def _dense_labels(raw):
    values = sorted(set(raw))
    mapping = {v: i for i, v in enumerate(values)}
    return np.array([mapping[v] for v in raw], dtype=np.int64), mapping


def load_csv(path, label_column="label"):
    """Read a headered CSV of decimal features plus one integral label column.

    Labels are remapped to ``0..d-1`` in sorted order; the original-to-dense
    mapping is kept in ``label_map``.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file, header row expected") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DataError(f"{path}: label column {label_column!r} not in header")
        li = header.index(label_column)
        rows, raw_labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} fields, got {len(row)}")
            try:
                values = [float(c) for j, c in enumerate(row) if j != li]
            except ValueError as exc:
                raise DataError(f"{path}:{lineno}: {exc}") from None
            if not all(math.isfinite(v) for v in values):
                raise DataError(f"{path}:{lineno}: NaN or Inf feature value")
            try:
                lab = float(row[li])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric label {row[li]!r}") from None
            if not lab.is_integer():
                raise DataError(f"{path}:{lineno}: non-integral label {row[li]!r}")
            rows.append(values)
            raw_labels.append(int(lab))
    if not rows:
        raise DataError(f"{path}: no data rows")
    labels, mapping = _dense_labels(raw_labels)
    return LabeledDataset(np.array(rows), labels, len(mapping),
                          provenance=f"csv:{path}", label_map=mapping)


def save_csv(ds, path, label_column="label"):
    """Write features with 17 significant digits so :func:`load_csv` round-trips bit-exactly."""
    names = [f"x{j}" for j in range(ds.n_features)] + [label_column]
    inverse = {v: k for k, v in ds.label_map.items()} if ds.label_map else None
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(names)
        for row, lab in zip(ds.features, ds.labels):
            lab = inverse[int(lab)] if inverse else int(lab)
            w.writerow(["%.17g" % v for v in row] + [lab])


def _open_maybe_gz(path):
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    return gzip.open(path, "rb") if path.suffix == ".gz" else path.open("rb")


def read_idx(path, expected_magic):
    with _open_maybe_gz(path) as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise DataError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", blob[:4])
    if magic != expected_magic:
        raise DataError(f"{path}: magic 0x{magic:08x}, expected 0x{expected_magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(blob) < header:
        raise DataError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", blob[4:header])
    size = int(np.prod(dims))
    if len(blob) - header != size:
        raise DataError(f"{path}: expected {size} data bytes, found {len(blob) - header}")
    return np.frombuffer(blob, dtype=np.uint8, offset=header).reshape(dims)


def write_idx(path, array):
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with Path(path).open("wb") as fh:
        fh.write(struct.pack(">I", magic))
        fh.write(struct.pack(f">{array.ndim}I", *array.shape))
        fh.write(array.tobytes())


def load_idx(images_path, labels_path):
    """MNIST-style IDX pair; pixels are scaled to ``[0, 1]`` and flattened row-major."""
    images = read_idx(images_path, IDX_IMAGES_MAGIC)
    labels = read_idx(labels_path, IDX_LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise DataError(f"{images.shape[0]} images but {labels.shape[0]} labels")
    features = images.reshape(images.shape[0], -1).astype(np.float64) / 255.0
    dense, mapping = _dense_labels(labels.tolist())
    return LabeledDataset(features, dense, len(mapping),
                          provenance=f"idx:{images_path}", label_map=mapping)


def balance_classes(ds, seed):
    """Undersample every class to the smallest class count."""
    counts = ds.class_counts()
    if counts.min() == 0:
        missing = np.flatnonzero(counts == 0).tolist()
        raise DataError(f"classes {missing} have no examples")
    target = int(counts.min())
    if target < LOW_DATA_THRESHOLD:
        log.warning("balancing down to %d example(s) per class", target)
    rng = np.random.default_rng(seed)
    keep = []
    for k in range(ds.d):
        idx = np.flatnonzero(ds.labels == k)
        keep.append(np.sort(rng.permutation(idx)[:target]))
    return ds.subset(np.sort(np.concatenate(keep)), balanced=True)


def ensure_balanced(ds, strict=True, seed=0):
    """Return ``ds`` if balanced; otherwise reject (strict) or undersample with a warning."""
    if ds.is_balanced():
        return replace(ds, balanced=True)
    if strict:
        raise DataError(f"training data is not class balanced: counts {ds.class_counts().tolist()}")
    log.warning("training data not class balanced (%s); undersampling",
                ds.class_counts().tolist())
    return balance_classes(ds, seed)


def synth_blobs(d, per_class, dim=None, spread=1.0, seed=0):
    """Gaussian blobs centred on the regular-simplex class targets.

    Class ``k`` is drawn from ``N(c_k, spread**2 I)`` where ``c_k`` is the
    ``(d-1)``-dimensional class target zero-padded to ``dim`` coordinates.
    """
    dim = d - 1 if dim is None else dim
    if d < 2 or per_class < 1 or dim < d - 1 or spread < 0:
        raise DomainError(
            f"invalid blob parameters d={d}, per_class={per_class}, dim={dim}, spread={spread}")
    centers = np.zeros((d, dim))
    centers[:, :d - 1] = build_target_matrix(d).targets
    rng = np.random.default_rng(seed)
    labels = np.repeat(np.arange(d), per_class)
    features = centers[labels] + spread * rng.standard_normal((labels.size, dim))
    return LabeledDataset(features, labels, d,
                          provenance=f"synth_blobs(d={d},per_class={per_class},dim={dim},"
                                     f"spread={spread},seed={seed})",
                          balanced=True)


def _allocate(n, fractions):
    # largest-remainder apportionment of n items
    raw = [f * n for f in fractions]
    base = [math.floor(r + 1e-9) for r in raw]
    order = sorted(range(len(raw)), key=lambda i: (base[i] - raw[i], i))
    for i in order[:n - sum(base)]:
        base[i] += 1
    return base


def split(ds, fractions=(0.8, 0.1, 0.1), seed=0, names=("train", "val", "test")):
    """Stratified split; every class is apportioned separately, so balance is kept."""
    fractions = tuple(float(f) for f in fractions)
    if len(fractions) != len(names):
        raise DomainError(f"{len(names)} fractions expected, got {len(fractions)}")
    if any(f <= 0 for f in fractions) or abs(sum(fractions) - 1.0) > 1e-9:
        raise DomainError(f"split fractions must be positive and sum to 1, got {fractions}")
    rng = np.random.default_rng(seed)
    parts = [[] for _ in names]
    for k in range(ds.d):
        idx = rng.permutation(np.flatnonzero(ds.labels == k))
        sizes = _allocate(idx.size, fractions)
        if min(sizes) == 0:
            raise DataError(f"class {k} ({idx.size} examples) cannot fill every split")
        start = 0
        for part, size in zip(parts, sizes):
            part.append(idx[start:start + size])
            start += size
    out = []
    for name, part in zip(names, parts):
        sub = ds.subset(np.sort(np.concatenate(part)), split=name)
        out.append(replace(sub, balanced=sub.is_balanced()))
    return tuple(out)
