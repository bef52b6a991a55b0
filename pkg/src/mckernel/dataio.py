"""Dataset ingestion, binary dumps and synthetic generators.

IDX files are parsed exactly as distributed by the MNIST-style datasets:
big-endian headers, magic 0x00000803 for image files and 0x00000801 for
label files, raw uint8 payload.  Pixels are normalized to [0, 1] as
byte / 255 and stored row-major float32.  Gzipped files are detected by
their two magic bytes and unpacked transparently.

Binary matrix records share one 16-byte header across feature dumps,
model checkpoints and dataset dumps::

    magic[8]  rows[uint32 LE]  cols[uint32 LE]  data (row-major)

with magic ``MCKMAT4\\n`` for float32, ``MCKMAT8\\n`` for float64 and
``MCKMATi4`` for int32 payloads.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass

import numpy as np

from .detrand import RandomStream, fisher_yates_permutation

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801

_MAGIC_F32 = b"MCKMAT4\n"
_MAGIC_F64 = b"MCKMAT8\n"
_MAGIC_I32 = b"MCKMATi4"
DATASET_MAGIC = b"MCKDSET1"


class IdxError(ValueError):
    """Base for IDX parse failures; carries the offending file and offset."""

    def __init__(self, path, offset: int, message: str):
        super().__init__(f"{path} @ offset {offset}: {message}")
        self.path = path
        self.offset = offset


class IdxBadMagic(IdxError):
    pass


class IdxTruncated(IdxError):
    pass


class IdxCountMismatch(IdxError):
    pass


@dataclass
class Dataset:
    """Dense samples (n, d) float32 in [0, 1]-ish range plus int labels."""
    features: np.ndarray
    labels: np.ndarray
    num_classes: int

    def __post_init__(self):
        self.features = np.ascontiguousarray(self.features, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or len(self.features) != len(self.labels):
            raise ValueError("features must be (n, d) with one label per row")
        if len(self.labels) < 1:
            raise ValueError("dataset must contain at least one sample")
        if self.num_classes < 1:
            raise ValueError("num_classes must be positive")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError("labels must lie in [0, num_classes)")

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def __len__(self) -> int:
        return len(self.labels)


def _open_maybe_gz(path):
    with open(path, "rb") as probe:
        head = probe.read(2)
    if head == b"\x1f\x8b":
        return gzip.open(path, "rb")
    return open(path, "rb")


def _read_exact(f, count: int, path, offset: int) -> bytes:
    data = f.read(count)
    if len(data) != count:
        raise IdxTruncated(path, offset, f"expected {count} bytes, got {len(data)}")
    return data


def _read_be32(f, path, offset: int) -> int:
    return struct.unpack(">I", _read_exact(f, 4, path, offset))[0]


def load_idx_images(path) -> np.ndarray:
    """Raw uint8 image tensor (count, rows, cols) from an IDX3 file."""
    with _open_maybe_gz(path) as f:
        magic = _read_be32(f, path, 0)
        if magic != IDX_IMAGE_MAGIC:
            raise IdxBadMagic(path, 0, f"magic 0x{magic:08X}, want 0x{IDX_IMAGE_MAGIC:08X}")
        count = _read_be32(f, path, 4)
        rows = _read_be32(f, path, 8)
        cols = _read_be32(f, path, 12)
        payload = _read_exact(f, count * rows * cols, path, 16)
        extra = f.read(1)
        if extra:
            raise IdxTruncated(path, 16 + count * rows * cols,
                               "trailing bytes after image payload")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def load_idx_labels(path) -> np.ndarray:
    """Raw uint8 label vector from an IDX1 file."""
    with _open_maybe_gz(path) as f:
        magic = _read_be32(f, path, 0)
        if magic != IDX_LABEL_MAGIC:
            raise IdxBadMagic(path, 0, f"magic 0x{magic:08X}, want 0x{IDX_LABEL_MAGIC:08X}")
        count = _read_be32(f, path, 4)
        payload = _read_exact(f, count, path, 8)
        extra = f.read(1)
        if extra:
            raise IdxTruncated(path, 8 + count, "trailing bytes after label payload")
    return np.frombuffer(payload, dtype=np.uint8)


def load_idx(images_path, labels_path) -> Dataset:
    """Parse an IDX image/label pair into a normalized Dataset."""
    images = load_idx_images(images_path)
    labels = load_idx_labels(labels_path)
    if len(images) != len(labels):
        raise IdxCountMismatch(
            labels_path, 4,
            f"label count {len(labels)} != image count {len(images)}")
    flat = images.reshape(len(images), -1).astype(np.float32) / np.float32(255.0)
    return Dataset(flat, labels.astype(np.int64),
                   num_classes=int(labels.max()) + 1 if len(labels) else 1)


def subset(ds: Dataset, count: int, seed: int) -> Dataset:
    """Deterministic subsample of ``count`` rows via a named shuffle stream."""
    if count > len(ds):
        raise ValueError(f"subset of {count} from {len(ds)} samples")
    if count < 1:
        raise ValueError("subset must keep at least one sample")
    perm = fisher_yates_permutation(RandomStream(seed, "subset"), len(ds))
    idx = perm[:count]
    return Dataset(ds.features[idx].copy(), ds.labels[idx].copy(), ds.num_classes)


# -- synthetic datasets ----------------------------------------------------

def synth_xor(n: int, noise_sigma: float, seed: int) -> Dataset:
    """Four gaussian clusters at (+-1, +-1); class is the sign product.

    Not linearly separable for any noise level: the raw-pixel baseline
    stays near chance while kernel features solve it.
    """
    if n < 4:
        raise ValueError("need at least 4 samples")
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be non-negative")
    st = RandomStream(seed, "xor")
    quadrant = (st.uniform01_array(n) * 4.0).astype(np.int64)
    cx = np.where(quadrant % 2 == 0, 1.0, -1.0)
    cy = np.where(quadrant // 2 == 0, 1.0, -1.0)
    noise = st.gaussian_array(2 * n).reshape(n, 2) * noise_sigma
    x = np.stack([cx, cy], axis=1) + noise
    labels = (cx * cy < 0).astype(np.int64)
    return Dataset(x.astype(np.float32), labels, num_classes=2)


def synth_blobs(n: int, num_classes: int, d: int, separation: float,
                seed: int) -> Dataset:
    """``num_classes`` spherical gaussian clusters with unit noise, centers
    at distance ``separation`` from the origin in random directions."""
    if n < num_classes or num_classes < 2 or d < 1:
        raise ValueError("need n >= num_classes >= 2 and d >= 1")
    if separation <= 0.0:
        raise ValueError("separation must be positive")
    st = RandomStream(seed, "blobs")
    centers = st.gaussian_array(num_classes * d).reshape(num_classes, d)
    norms = np.sqrt((centers * centers).sum(axis=1, keepdims=True))
    centers = centers / norms * separation
    labels = (st.uniform01_array(n) * num_classes).astype(np.int64)
    points = st.gaussian_array(n * d).reshape(n, d) + centers[labels]
    return Dataset(points.astype(np.float32), labels, num_classes=num_classes)


# -- binary records ----------------------------------------------------------

_DTYPE_MAGIC = {
    np.dtype(np.float32): _MAGIC_F32,
    np.dtype(np.float64): _MAGIC_F64,
    np.dtype(np.int32): _MAGIC_I32,
}
_MAGIC_DTYPE = {v: k for k, v in _DTYPE_MAGIC.items()}


def write_matrix_record(f, arr: np.ndarray) -> None:
    arr = np.ascontiguousarray(arr)
    magic = _DTYPE_MAGIC.get(arr.dtype)
    if magic is None:
        raise ValueError(f"unsupported record dtype {arr.dtype}")
    if arr.ndim != 2:
        raise ValueError("records hold 2-D matrices")
    f.write(magic)
    f.write(struct.pack("<II", arr.shape[0], arr.shape[1]))
    f.write(arr.tobytes())


def read_matrix_record(f) -> np.ndarray:
    magic = f.read(8)
    dtype = _MAGIC_DTYPE.get(magic)
    if dtype is None:
        raise ValueError(f"unknown record magic {magic!r}")
    rows, cols = struct.unpack("<II", f.read(8))
    data = f.read(rows * cols * dtype.itemsize)
    if len(data) != rows * cols * dtype.itemsize:
        raise ValueError("truncated matrix record")
    return np.frombuffer(data, dtype=dtype).reshape(rows, cols).copy()


def write_matrix(path, arr: np.ndarray) -> None:
    """Standalone matrix dump (the `features` command output format)."""
    with open(path, "wb") as f:
        write_matrix_record(f, arr)


def read_matrix(path) -> np.ndarray:
    with open(path, "rb") as f:
        return read_matrix_record(f)


def save_dataset(path, ds: Dataset) -> None:
    """Bit-exact dataset dump: features record, labels record, class count."""
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        write_matrix_record(f, ds.features)
        write_matrix_record(f, ds.labels.astype(np.int32)[:, None])
        f.write(struct.pack("<I", ds.num_classes))


def load_dataset(path) -> Dataset:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != DATASET_MAGIC:
            raise ValueError(f"{path}: not a dataset dump (magic {magic!r})")
        features = read_matrix_record(f)
        labels = read_matrix_record(f)[:, 0].astype(np.int64)
        num_classes = struct.unpack("<I", f.read(4))[0]
    return Dataset(features, labels, num_classes)
