"""IDX container parsing/writing (the MNIST on-disk format).

Big-endian headers: magic 0x00000803 + (count, rows, cols) for image
files, magic 0x00000801 + count for label files, then raw uint8 payload.
Each failure mode (wrong magic, truncation, count mismatch) is reported
distinctly."""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import IdxCountMismatchError, IdxMagicError, IdxTruncatedError

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801


@dataclass
class DatasetSource:
    images_path: str
    labels_path: str
    limit: int | None = None
    normalize: bool = True  # pixel/255 into [0,1]


def _read_exact(fh, count, path, what):
    data = fh.read(count)
    if len(data) != count:
        raise IdxTruncatedError(f"{path}: truncated while reading {what}")
    return data


def read_idx_images(path):
    with open(path, "rb") as fh:
        magic, count, rows, cols = struct.unpack(">IIII", _read_exact(fh, 16, path, "header"))
        if magic != IMAGE_MAGIC:
            raise IdxMagicError(
                f"{path}: magic 0x{magic:08x}, expected image magic 0x{IMAGE_MAGIC:08x}"
            )
        payload = _read_exact(fh, count * rows * cols, path, f"{count} images")
    return np.frombuffer(payload, dtype=np.uint8).reshape(count, rows, cols)


def read_idx_labels(path):
    with open(path, "rb") as fh:
        magic, count = struct.unpack(">II", _read_exact(fh, 8, path, "header"))
        if magic != LABEL_MAGIC:
            raise IdxMagicError(
                f"{path}: magic 0x{magic:08x}, expected label magic 0x{LABEL_MAGIC:08x}"
            )
        payload = _read_exact(fh, count, path, f"{count} labels")
    return np.frombuffer(payload, dtype=np.uint8)


def load_dataset(source):
    """Returns (images, labels): images float64 (n,1,rows,cols) scaled to
    [0,1] when source.normalize, labels int64 (n,)."""
    raw = read_idx_images(source.images_path)
    labels = read_idx_labels(source.labels_path)
    if len(raw) != len(labels):
        raise IdxCountMismatchError(
            f"{source.images_path} has {len(raw)} images but "
            f"{source.labels_path} has {len(labels)} labels"
        )
    if source.limit is not None:
        raw = raw[: source.limit]
        labels = labels[: source.limit]
    images = raw.astype(np.float64)[:, None, :, :]
    if source.normalize:
        images /= 255.0
    return images, labels.astype(np.int64)


def write_idx_images(path, images):
    images = np.asarray(images, dtype=np.uint8)
    n, rows, cols = images.shape
    with open(path, "wb") as fh:
        fh.write(struct.pack(">IIII", IMAGE_MAGIC, n, rows, cols))
        fh.write(images.tobytes())


def write_idx_labels(path, labels):
    labels = np.asarray(labels, dtype=np.uint8)
    with open(path, "wb") as fh:
        fh.write(struct.pack(">II", LABEL_MAGIC, len(labels)))
        fh.write(labels.tobytes())
