"""Dataset ingestion (IDX, CIFAR-10 binary, CSV) and two-class task construction."""
from __future__ import annotations

import csv
import gzip
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .numerics import rng_stream

log = logging.getLogger(__name__)

IDX_IMAGES_MAGIC = 0x00000803
IDX_LABELS_MAGIC = 0x00000801
CIFAR_RECORD = 3073
CIFAR_PIXELS = 3072


class DatasetError(ValueError):
    """Malformed or inconsistent input data."""


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    source: str = ""

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DatasetError(f"features must be 2-D, got shape {self.features.shape}")
        if len(self.labels) != len(self.features):
            raise DatasetError(f"{len(self.labels)} labels for {len(self.features)} feature rows")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def class_counts(self) -> dict[int, int]:
        vals, counts = np.unique(self.labels, return_counts=True)
        return {int(v): int(c) for v, c in zip(vals, counts)}


@dataclass(frozen=True, eq=False)
class BinaryTask:
    """Equal-size samples from the two class-conditional distributions.

    ``class_pos`` holds the +1 class, ``class_neg`` the -1 class, both ``(k, d)``.
    """

    class_pos: np.ndarray
    class_neg: np.ndarray
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        pos = np.array(self.class_pos, dtype=float)
        neg = np.array(self.class_neg, dtype=float)
        if pos.ndim != 2 or neg.ndim != 2:
            raise DatasetError("class samples must be 2-D arrays")
        if len(pos) != len(neg):
            raise DatasetError(f"class sizes differ: {len(pos)} vs {len(neg)}")
        if len(pos) < 1:
            raise DatasetError("each class needs at least one sample")
        if pos.shape[1] != neg.shape[1]:
            raise DatasetError(f"dimension mismatch between classes: {pos.shape[1]} vs {neg.shape[1]}")
        if not (np.all(np.isfinite(pos)) and np.all(np.isfinite(neg))):
            raise DatasetError("non-finite feature values")
        pos.setflags(write=False)
        neg.setflags(write=False)
        object.__setattr__(self, "class_pos", pos)
        object.__setattr__(self, "class_neg", neg)

    @property
    def k(self) -> int:
        return len(self.class_pos)

    @property
    def dim(self) -> int:
        return self.class_pos.shape[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, BinaryTask):
            return NotImplemented
        return np.array_equal(self.class_pos, other.class_pos) and np.array_equal(self.class_neg, other.class_neg)

    __hash__ = None

    def swapped(self) -> "BinaryTask":
        return BinaryTask(self.class_neg, self.class_pos, dict(self.metadata))


def _read_bytes(path) -> bytes:
    data = Path(path).read_bytes()
    if data[:2] == b"\x1f\x8b":
        data = gzip.decompress(data)
    return data


def _parse_idx(data: bytes, expected_magic: int, path) -> np.ndarray:
    if len(data) < 4:
        raise DatasetError(f"{path}: truncated IDX header")
    (magic,) = struct.unpack(">I", data[:4])
    if magic != expected_magic:
        raise DatasetError(f"{path}: unsupported IDX element type (magic 0x{magic:08x}, expected 0x{expected_magic:08x})")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(data) < header:
        raise DatasetError(f"{path}: truncated IDX header")
    dims = struct.unpack(f">{ndim}I", data[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(data) - header < size:
        raise DatasetError(f"{path}: truncated IDX payload ({len(data) - header} of {size} bytes)")
    return np.frombuffer(data, dtype=np.uint8, count=size, offset=header).reshape(dims)


def load_idx(images_path, labels_path) -> LabeledDataset:
    """Read an MNIST-style IDX image/label pair (optionally gzip-compressed).

    Pixels are scaled by 1/255 and flattened to ``rows * cols`` features.
    """
    images = _parse_idx(_read_bytes(images_path), IDX_IMAGES_MAGIC, images_path)
    labels = _parse_idx(_read_bytes(labels_path), IDX_LABELS_MAGIC, labels_path)
    if images.shape[0] != labels.shape[0]:
        raise DatasetError(f"label/image count mismatch: {labels.shape[0]} labels, {images.shape[0]} images")
    n = images.shape[0]
    feats = images.reshape(n, int(np.prod(images.shape[1:]))).astype(float) / 255.0
    return LabeledDataset(feats, labels.astype(np.int64), source=str(images_path))


def load_cifar10(batch_paths) -> LabeledDataset:
    """Read CIFAR-10 binary batches: records of 1 label byte + 3072 pixel bytes."""
    if isinstance(batch_paths, (str, Path)):
        batch_paths = [batch_paths]
    feats, labels = [], []
    for path in batch_paths:
        data = _read_bytes(path)
        if len(data) % CIFAR_RECORD:
            offset = len(data) - len(data) % CIFAR_RECORD
            raise DatasetError(f"{path}: truncated record at byte offset {offset}")
        recs = np.frombuffer(data, dtype=np.uint8).reshape(-1, CIFAR_RECORD)
        bad = np.flatnonzero(recs[:, 0] > 9)
        if bad.size:
            raise DatasetError(f"{path}: label byte {recs[bad[0], 0]} > 9 at byte offset {bad[0] * CIFAR_RECORD}")
        labels.append(recs[:, 0].astype(np.int64))
        feats.append(recs[:, 1:].astype(float) / 255.0)
    if not feats:
        return LabeledDataset(np.zeros((0, CIFAR_PIXELS)), np.zeros(0, dtype=np.int64))
    return LabeledDataset(np.concatenate(feats), np.concatenate(labels), source=",".join(map(str, batch_paths)))


def _is_numeric_row(row) -> bool:
    try:
        int(row[0])
        [float(c) for c in row[1:]]
    except (ValueError, IndexError):
        return False
    return True


def load_csv(path) -> LabeledDataset:
    """Read ``label,f1,f2,...`` rows. Features are used as-is.

    A non-numeric first line is treated as a header and skipped with a warning.
    """
    labels, rows = [], []
    width = None
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or all(not c.strip() for c in row):
                continue
            if lineno == 1 and not _is_numeric_row(row):
                log.warning("%s: skipping header line %r", path, ",".join(row))
                continue
            if width is None:
                width = len(row)
            elif len(row) != width:
                raise DatasetError(f"{path}:{lineno}: ragged row ({len(row)} columns, expected {width})")
            try:
                labels.append(int(row[0]))
                rows.append([float(c) for c in row[1:]])
            except ValueError as exc:
                raise DatasetError(f"{path}:{lineno}: non-numeric cell ({exc})") from None
    if width is None:
        return LabeledDataset(np.zeros((0, 0)), np.zeros(0, dtype=np.int64), source=str(path))
    feats = np.array(rows, dtype=float).reshape(len(rows), width - 1)
    return LabeledDataset(feats, np.array(labels, dtype=np.int64), source=str(path))


def write_csv(task: BinaryTask, path, labels=(1, -1)) -> None:
    """Write a task as label-prefixed rows (positive class first); floats round-trip exactly."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        for label, block in zip(labels, (task.class_pos, task.class_neg)):
            for x in block:
                w.writerow([label, *map(repr, x.tolist())])


def make_binary_task(data: LabeledDataset, class_a: int, class_b: int, k: int | None = None, seed: int = 0) -> BinaryTask:
    """Seeded uniform subsample of ``k`` examples per class, kept in file order.

    The choice depends on each example's position within its class, so the
    same seed on a reordered file selects different examples.
    ``k=None`` takes the smaller class size.
    """
    if class_a == class_b:
        raise DatasetError("class_a and class_b must differ")
    idx_a = np.flatnonzero(data.labels == class_a)
    idx_b = np.flatnonzero(data.labels == class_b)
    if k is None:
        k = min(len(idx_a), len(idx_b))
    if k < 1 or len(idx_a) < k or len(idx_b) < k:
        raise DatasetError(
            f"insufficient examples for k={k}: class {class_a} has {len(idx_a)}, class {class_b} has {len(idx_b)}"
        )
    picks = []
    for stream, idx in enumerate((idx_a, idx_b)):
        if k == len(idx):
            picks.append(idx)
        else:
            chosen = rng_stream(seed, stream).choice(len(idx), size=k, replace=False)
            picks.append(idx[np.sort(chosen)])
    meta = {"source": data.source, "class_a": class_a, "class_b": class_b, "seed": seed, "k": k}
    return BinaryTask(data.features[picks[0]], data.features[picks[1]], meta)
