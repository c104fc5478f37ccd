"""
MNIST IDX reader.

Data format (big endian):
    u32  | Magic (0x00000803 images, 0x00000801 labels)
    u32  | Item count
    u32  | Row count     (images only)
    u32  | Column count  (images only)
    u8[] | Payload, row-wise
"""
import gzip
import logging
import os
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from quantguard.errors import IdxFormatError

logger = logging.getLogger(__name__)

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801

MNIST_FILES = {
    "train": ("train-images-idx3-ubyte", "train-labels-idx1-ubyte"),
    "test": ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"),
}
MNIST_COUNTS = {"train": 60000, "test": 10000}

_MAGIC_NAMES = {IMAGES_MAGIC: "images", LABELS_MAGIC: "labels"}


@dataclass(frozen=True)
class RawDataset:
    """Labeled images in the raw 8-bit pixel domain."""

    images: np.ndarray  # uint8 [N, rows, cols]
    labels: np.ndarray  # uint8 [N]
    split: str

    def __post_init__(self):
        if self.images.shape[0] != self.labels.shape[0]:
            raise IdxFormatError(
                f"image count {self.images.shape[0]} != label count {self.labels.shape[0]}"
            )
        if self.images.dtype != np.uint8:
            raise IdxFormatError(f"images must be uint8 intensities, got {self.images.dtype}")
        if self.labels.size and int(self.labels.max()) > 9:
            raise IdxFormatError(f"label {int(self.labels.max())} outside [0, 9]")
        if self.split not in MNIST_FILES:
            raise IdxFormatError(f"unknown split '{self.split}'")
        self.images.setflags(write=False)
        self.labels.setflags(write=False)

    def __len__(self):
        return self.labels.shape[0]

    @property
    def pixels_per_image(self):
        return int(np.prod(self.images.shape[1:]))

    def subset(self, indices):
        indices = np.asarray(indices)
        return RawDataset(self.images[indices].copy(), self.labels[indices].copy(), self.split)


def _read_bytes(path):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"IDX file not found at: {path}")
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as f:
        return f.read()


def read_idx(path, expected_magic):
    """Parse one IDX file and return its payload as a uint8 array."""
    raw = _read_bytes(path)
    if len(raw) < 8:
        raise IdxFormatError(f"{path}: truncated header, expected at least 8 bytes, got {len(raw)}")
    magic, count = struct.unpack(">II", raw[:8])
    if magic != expected_magic:
        found = _MAGIC_NAMES.get(magic, "unknown")
        raise IdxFormatError(
            f"{path}: magic 0x{magic:08x} ({found}) where 0x{expected_magic:08x} "
            f"({_MAGIC_NAMES[expected_magic]}) was expected"
        )
    if magic == IMAGES_MAGIC:
        if len(raw) < 16:
            raise IdxFormatError(f"{path}: truncated header, expected 16 bytes, got {len(raw)}")
        rows, cols = struct.unpack(">II", raw[8:16])
        dims, offset = (count, rows, cols), 16
    else:
        dims, offset = (count,), 8

    expected = offset + int(np.prod(dims))
    if len(raw) != expected:
        raise IdxFormatError(f"{path}: expected {expected} bytes, got {len(raw)}")
    return np.frombuffer(raw, dtype=np.uint8, offset=offset).reshape(dims).copy()


def load_idx(images_path, labels_path, split):
    images = read_idx(images_path, IMAGES_MAGIC)
    labels = read_idx(labels_path, LABELS_MAGIC)
    if images.shape[0] != labels.shape[0]:
        raise IdxFormatError(
            f"count mismatch: {images_path} holds {images.shape[0]} images, "
            f"{labels_path} holds {labels.shape[0]} labels"
        )
    logger.info("Loaded %d %s items from %s", images.shape[0], split, Path(images_path).name)
    return RawDataset(images, labels, split)


def resolve_data_dir(data_dir=None):
    data_dir = data_dir or os.environ.get("QG_DATA_DIR")
    if not data_dir:
        raise FileNotFoundError("MNIST location unknown: set data_dir in the config or QG_DATA_DIR")
    return Path(data_dir)


def _locate(directory, name):
    for candidate in (name, name + ".gz"):
        if (directory / candidate).exists():
            return directory / candidate
    # some mirrors use a dot before idx
    dotted = name.replace("-idx", ".idx")
    for candidate in (dotted, dotted + ".gz"):
        if (directory / candidate).exists():
            return directory / candidate
    return directory / name


def load_mnist(split, data_dir=None):
    directory = resolve_data_dir(data_dir)
    images_name, labels_name = MNIST_FILES[split]
    return load_idx(_locate(directory, images_name), _locate(directory, labels_name), split)


def mnist_available(data_dir=None):
    try:
        directory = resolve_data_dir(data_dir)
    except FileNotFoundError:
        return False
    return all(
        _locate(directory, name).exists() for pair in MNIST_FILES.values() for name in pair
    )
