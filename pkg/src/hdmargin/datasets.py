"""Dataset loading and preprocessing.

Supports the big-endian IDX container used by the MNIST-family image sets,
the whitespace text layout of the UCI HAR feature files, and a seeded
generator of linearly separable instances for tests.
"""

from __future__ import annotations

import gzip
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .encoding import normalize_l2
from .prototypes import LabeledSet

IDX_IMAGE_MAGIC = 2051
IDX_LABEL_MAGIC = 2049

HAR_FEATURES = 561


class DatasetError(ValueError):
    """Base class for dataset parsing failures."""


class IdxMagicError(DatasetError):
    pass


class IdxTruncatedError(DatasetError):
    pass


class IdxCountMismatchError(DatasetError):
    pass


class HarFormatError(DatasetError):
    pass


@dataclass
class RawDataset:
    name: str
    train_x: np.ndarray
    train_y: np.ndarray
    test_x: np.ndarray
    test_y: np.ndarray

    @property
    def input_dim(self) -> int:
        return self.train_x.shape[1]

    @property
    def n_classes(self) -> int:
        return int(max(self.train_y.max(), self.test_y.max())) + 1


def _read_bytes(path) -> bytes:
    path = Path(path)
    if path.suffix == ".gz" or (not path.exists() and path.with_name(path.name + ".gz").exists()):
        gz = path if path.suffix == ".gz" else path.with_name(path.name + ".gz")
        with gzip.open(gz, "rb") as f:
            return f.read()
    with open(path, "rb") as f:
        return f.read()


def load_idx_images(path) -> np.ndarray:
    """Parse an IDX image file into an (N, rows*cols) matrix scaled to [0, 1]."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the magic field")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != IDX_IMAGE_MAGIC:
        raise IdxMagicError(f"{path}: bad magic {magic:#x}, "
                            f"expected {IDX_IMAGE_MAGIC}")
    if len(raw) < 16:
        raise IdxTruncatedError(f"{path}: missing dimension fields")
    count, rows, cols = struct.unpack(">III", raw[4:16])
    expected = 16 + count * rows * cols
    if len(raw) < expected:
        raise IdxTruncatedError(f"{path}: expected {expected} bytes, "
                                f"got {len(raw)}")
    if len(raw) > expected:
        raise DatasetError(f"{path}: {len(raw) - expected} trailing bytes")
    pixels = np.frombuffer(raw, dtype=np.uint8, offset=16)
    return pixels.reshape(count, rows * cols).astype(np.float64) / 255.0


def load_idx_labels(path) -> np.ndarray:
    """Parse an IDX label file into an int vector."""
    raw = _read_bytes(path)
    if len(raw) < 4:
        raise IdxTruncatedError(f"{path}: file shorter than the magic field")
    (magic,) = struct.unpack(">I", raw[:4])
    if magic != IDX_LABEL_MAGIC:
        raise IdxMagicError(f"{path}: bad magic {magic:#x}, "
                            f"expected {IDX_LABEL_MAGIC}")
    if len(raw) < 8:
        raise IdxTruncatedError(f"{path}: missing count field")
    (count,) = struct.unpack(">I", raw[4:8])
    if len(raw) < 8 + count:
        raise IdxTruncatedError(f"{path}: expected {8 + count} bytes, "
                                f"got {len(raw)}")
    if len(raw) > 8 + count:
        raise DatasetError(f"{path}: {len(raw) - 8 - count} trailing bytes")
    return np.frombuffer(raw, dtype=np.uint8, offset=8).astype(np.int64)


def write_idx_images(images01: np.ndarray, rows: int, cols: int) -> bytes:
    """Serialize a [0, 1]-scaled image matrix back to IDX bytes.

    Inverse of :func:`load_idx_images`: loading then writing a file
    reproduces it bit for bit.
    """
    images01 = np.asarray(images01, dtype=np.float64)
    if images01.ndim != 2 or images01.shape[1] != rows * cols:
        raise ValueError(f"expected (N, {rows * cols}) matrix, "
                         f"got {images01.shape}")
    pixels = np.clip(np.round(images01 * 255.0), 0, 255).astype(np.uint8)
    header = struct.pack(">IIII", IDX_IMAGE_MAGIC, len(images01), rows, cols)
    return header + pixels.tobytes()


def write_idx_labels(labels: np.ndarray) -> bytes:
    labels = np.asarray(labels)
    if labels.min(initial=0) < 0 or labels.max(initial=0) > 255:
        raise ValueError("labels must fit in a byte")
    return struct.pack(">II", IDX_LABEL_MAGIC, len(labels)) + \
        labels.astype(np.uint8).tobytes()


_IDX_FILES = {
    "train_x": "train-images-idx3-ubyte",
    "train_y": "train-labels-idx1-ubyte",
    "test_x": "t10k-images-idx3-ubyte",
    "test_y": "t10k-labels-idx1-ubyte",
}


def load_idx_dir(data_dir, name: str = "mnist") -> RawDataset:
    """Load a dataset stored as the four canonical IDX files (optionally .gz)."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {data_dir}")
    parts = {}
    for key, fname in _IDX_FILES.items():
        loader = load_idx_images if key.endswith("_x") else load_idx_labels
        parts[key] = loader(data_dir / fname)
    for split in ("train", "test"):
        nx, ny = len(parts[f"{split}_x"]), len(parts[f"{split}_y"])
        if nx != ny:
            raise IdxCountMismatchError(
                f"{split} split: {nx} images but {ny} labels")
    return RawDataset(name, parts["train_x"], parts["train_y"],
                      parts["test_x"], parts["test_y"])


def _read_float_matrix(path, expected_cols: int) -> np.ndarray:
    """Whitespace-separated float matrix with precise format diagnostics."""
    try:
        data = np.loadtxt(path, dtype=np.float64, ndmin=2)
    except ValueError:
        data = None
    if data is None:
        with open(path) as f:
            for lineno, line in enumerate(f, start=1):
                tokens = line.split()
                if not tokens:
                    continue
                if len(tokens) != expected_cols:
                    raise HarFormatError(
                        f"{path}:{lineno}: ragged row with {len(tokens)} "
                        f"fields, expected {expected_cols}")
                for tok in tokens:
                    try:
                        float(tok)
                    except ValueError:
                        raise HarFormatError(
                            f"{path}:{lineno}: non-numeric token {tok!r}") from None
        raise HarFormatError(f"{path}: unparseable content")
    if data.shape[1] != expected_cols:
        raise HarFormatError(f"{path}: rows have {data.shape[1]} fields, "
                             f"expected {expected_cols}")
    return data


def load_har(data_dir) -> RawDataset:
    """Load the UCI HAR feature files; labels are shifted from 1..6 to 0..5."""
    data_dir = Path(data_dir)
    if not data_dir.is_dir():
        raise FileNotFoundError(f"dataset directory not found: {data_dir}")

    def find(name):
        for candidate in (data_dir / name,
                          data_dir / name.split("_")[1].split(".")[0] / name):
            if candidate.exists():
                return candidate
        raise FileNotFoundError(f"missing HAR file {name} under {data_dir}")

    parts = {}
    for split in ("train", "test"):
        x = _read_float_matrix(find(f"X_{split}.txt"), HAR_FEATURES)
        y_raw = _read_float_matrix(find(f"y_{split}.txt"), 1).ravel()
        y = y_raw.astype(np.int64)
        if not np.array_equal(y, y_raw) or y.min() < 1 or y.max() > 6:
            raise HarFormatError(f"y_{split}.txt: labels must be integers 1..6")
        parts[split] = (x, y - 1)
    return RawDataset("har", parts["train"][0], parts["train"][1],
                      parts["test"][0], parts["test"][1])


def load_dataset(name: str, data_dir) -> RawDataset:
    name = name.lower()
    if name in ("mnist", "fashion"):
        return load_idx_dir(data_dir, name)
    if name == "har":
        return load_har(data_dir)
    raise ValueError(f"unknown dataset {name!r}; expected mnist, fashion, or har")


def preprocess(raw: RawDataset) -> RawDataset:
    """Scale every point to unit L2 norm (zero points stay zero)."""
    return RawDataset(raw.name, normalize_l2(raw.train_x), raw.train_y,
                      normalize_l2(raw.test_x), raw.test_y)


def make_separable(n_per_class: int, dim: int, margin: float, seed: int,
                   return_direction: bool = False):
    """Two unit-variance Gaussian clouds with a guaranteed linear separation.

    Cloud centers sit at +/- margin/2 along a random unit direction u; samples
    violating ``y * <x, u> >= margin / 4`` are rejected and redrawn, so the
    output is separable by construction.
    """
    if not margin > 0:
        raise ValueError(f"margin must be positive, got {margin}")
    if n_per_class < 1:
        raise ValueError(f"n_per_class must be >= 1, got {n_per_class}")
    rng = np.random.default_rng(seed)
    u = rng.standard_normal(dim)
    u /= np.linalg.norm(u)
    points = np.empty((2 * n_per_class, dim))
    labels = np.r_[np.ones(n_per_class, dtype=np.int64),
                   -np.ones(n_per_class, dtype=np.int64)]
    for i, y in enumerate(labels):
        center = (y * margin / 2.0) * u
        while True:
            x = center + rng.standard_normal(dim)
            if y * float(x @ u) >= margin / 4.0:
                points[i] = x
                break
    ls = LabeledSet(points, labels)
    return (ls, u) if return_direction else ls
