"""Synthetic blobs, IDX image files, and QFV1 feature files.

QFV1 layout (little-endian)::

    b"QFV1", u32 rows, u32 dim, f64 rows*dim (row-major)
    optional: b"LBLS", i64 labels[rows]
"""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadMagicError,
    ConfigurationError,
    CountMismatchError,
    DimensionOverflowError,
    TruncatedFileError,
    VersionError,
)
from .io import atomic_write_bytes

FEATURE_MAGIC = b"QFV1"
LABEL_TAG = b"LBLS"
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801
_U32_MAX = 2**32 - 1


@dataclass
class SyntheticSpec:
    n_classes: int = 10
    samples_per_class: int = 200
    input_dim: int = 8
    class_center_scale: float = 3.0
    noise_sigma: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_classes < 2:
            raise ConfigurationError("need at least two classes")
        if self.samples_per_class < 1 or self.input_dim < 1:
            raise ConfigurationError("samples_per_class and input_dim must be positive")
        if self.class_center_scale <= 0 or self.noise_sigma < 0:
            raise ConfigurationError("center scale must be > 0 and noise >= 0")


def generate_blobs(spec: SyntheticSpec) -> tuple[np.ndarray, np.ndarray]:
    """Gaussian class blobs, class-major order. Deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    centers = rng.standard_normal((spec.n_classes, spec.input_dim)) * spec.class_center_scale
    labels = np.repeat(np.arange(spec.n_classes), spec.samples_per_class)
    noise = rng.standard_normal((len(labels), spec.input_dim)) * spec.noise_sigma
    return centers[labels] + noise, labels


def stratified_split(labels, train_fraction: float = 0.7, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled split; returns sorted (train_idx, test_idx)."""
    labels = np.asarray(labels)
    if not 0 < train_fraction < 1:
        raise ConfigurationError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        cut = int(round(train_fraction * len(idx)))
        train.append(idx[:cut])
        test.append(idx[cut:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))


def class_disjoint_split(labels) -> tuple[np.ndarray, np.ndarray]:
    """Train on the lower half of the class ids, hold out the upper half."""
    labels = np.asarray(labels)
    classes = np.unique(labels)
    held = np.isin(labels, classes[len(classes) // 2 :])
    return np.flatnonzero(~held), np.flatnonzero(held)


def _read_idx(path, magic: int) -> tuple[tuple[int, ...], bytes]:
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise TruncatedFileError(f"{path}: missing IDX header")
    (found,) = struct.unpack(">I", raw[:4])
    if found != magic:
        raise BadMagicError(f"{path}: magic 0x{found:08x}, expected 0x{magic:08x}")
    ndim = magic & 0xFF
    header = 4 + 4 * ndim
    if len(raw) < header:
        raise TruncatedFileError(f"{path}: truncated IDX dimensions")
    dims = struct.unpack(f">{ndim}I", raw[4:header])
    size = int(np.prod(dims, dtype=np.int64))
    if len(raw) - header < size:
        raise TruncatedFileError(f"{path}: expected {size} data bytes, found {len(raw) - header}")
    return dims, raw[header : header + size]


def load_idx(images_path, labels_path) -> tuple[np.ndarray, np.ndarray]:
    """Read an IDX image/label pair; pixels are flattened and scaled to [0, 1]."""
    img_dims, img_bytes = _read_idx(images_path, IDX_IMAGE_MAGIC)
    lbl_dims, lbl_bytes = _read_idx(labels_path, IDX_LABEL_MAGIC)
    if img_dims[0] != lbl_dims[0]:
        raise CountMismatchError(f"{img_dims[0]} images but {lbl_dims[0]} labels")
    pixels = np.frombuffer(img_bytes, dtype=np.uint8).reshape(img_dims[0], -1)
    labels = np.frombuffer(lbl_bytes, dtype=np.uint8).astype(np.int64)
    return pixels.astype(np.float64) / 255.0, labels


def feature_bytes(matrix, labels=None) -> bytes:
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2:
        raise ConfigurationError("feature matrix must be 2-D")
    rows, dim = matrix.shape
    if rows > _U32_MAX or dim > _U32_MAX:
        raise DimensionOverflowError(f"shape {matrix.shape} does not fit u32 header fields")
    parts = [FEATURE_MAGIC, struct.pack("<2I", rows, dim), np.ascontiguousarray(matrix, dtype="<f8").tobytes()]
    if labels is not None:
        labels = np.asarray(labels)
        if labels.shape != (rows,):
            raise ConfigurationError(f"need {rows} labels, got shape {labels.shape}")
        parts += [LABEL_TAG, labels.astype("<i8").tobytes()]
    return b"".join(parts)


def features_from_bytes(raw: bytes) -> tuple[np.ndarray, np.ndarray | None]:
    if raw[:4] != FEATURE_MAGIC:
        raise VersionError(f"feature file magic {raw[:4]!r}, expected {FEATURE_MAGIC!r}")
    if len(raw) < 12:
        raise TruncatedFileError("feature header truncated")
    rows, dim = struct.unpack("<2I", raw[4:12])
    end = 12 + 8 * rows * dim
    if len(raw) < end:
        raise TruncatedFileError(f"expected {end} bytes for {rows}x{dim} features, found {len(raw)}")
    matrix = np.frombuffer(raw[12:end], dtype="<f8").astype(np.float64).reshape(rows, dim)
    rest = raw[end:]
    if not rest:
        return matrix, None
    if rest[:4] != LABEL_TAG:
        raise VersionError("unknown trailing block in feature file")
    if len(rest) != 4 + 8 * rows:
        raise TruncatedFileError("label block length does not match row count")
    return matrix, np.frombuffer(rest[4:], dtype="<i8").astype(np.int64)


def save_features(path, matrix, labels=None) -> None:
    atomic_write_bytes(path, feature_bytes(matrix, labels))


def load_features(path) -> tuple[np.ndarray, np.ndarray | None]:
    with open(path, "rb") as fh:
        return features_from_bytes(fh.read())
