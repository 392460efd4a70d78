"""Shared fixtures: synthetic IDX datasets and optional real-data discovery."""

import os
from pathlib import Path

import numpy as np
import pytest

from hdmargin.datasets import RawDataset, write_idx_images, write_idx_labels

IDX_NAMES = {
    "train_x": "train-images-idx3-ubyte",
    "train_y": "train-labels-idx1-ubyte",
    "test_x": "t10k-images-idx3-ubyte",
    "test_y": "t10k-labels-idx1-ubyte",
}


def make_blob_images(n_per_class, n_classes, rows, cols, seed, noise=0.12,
                     base_seed=None):
    """Per-class base images plus pixel noise; learnable but not trivial.

    ``base_seed`` fixes the class patterns so that train and test splits
    drawn with different ``seed`` values share the same classes.
    """
    base_rng = np.random.default_rng(seed if base_seed is None else base_seed)
    bases = base_rng.uniform(0.0, 1.0, size=(n_classes, rows * cols))
    rng = np.random.default_rng(seed)
    xs, ys = [], []
    for c in range(n_classes):
        pts = bases[c] + noise * rng.standard_normal((n_per_class, rows * cols))
        xs.append(np.clip(pts, 0.0, 1.0))
        ys.append(np.full(n_per_class, c, dtype=np.int64))
    x = np.concatenate(xs)
    y = np.concatenate(ys)
    order = rng.permutation(len(x))
    return x[order], y[order]


def write_idx_dataset(data_dir, train_x01, train_y, test_x01, test_y,
                      rows, cols):
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    (data_dir / IDX_NAMES["train_x"]).write_bytes(
        write_idx_images(train_x01, rows, cols))
    (data_dir / IDX_NAMES["train_y"]).write_bytes(write_idx_labels(train_y))
    (data_dir / IDX_NAMES["test_x"]).write_bytes(
        write_idx_images(test_x01, rows, cols))
    (data_dir / IDX_NAMES["test_y"]).write_bytes(write_idx_labels(test_y))
    return data_dir


@pytest.fixture
def tiny_idx_dir(tmp_path):
    """3-class, 6x6 synthetic image dataset written as canonical IDX files."""
    train_x, train_y = make_blob_images(30, 3, 6, 6, seed=7)
    test_x, test_y = make_blob_images(10, 3, 6, 6, seed=8, base_seed=7)
    return write_idx_dataset(tmp_path / "data", train_x, train_y,
                             test_x, test_y, 6, 6)


def mnist_data_dir():
    """Directory with the canonical MNIST IDX files, or None if unavailable."""
    candidates = []
    env = os.environ.get("MNIST_DATA_DIR")
    if env:
        candidates.append(Path(env))
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "mnist")
    for cand in candidates:
        if all((cand / name).exists() or (cand / (name + ".gz")).exists()
               for name in IDX_NAMES.values()):
            return cand
    return None


def require_mnist():
    path = mnist_data_dir()
    if path is None:
        pytest.skip(
            "MNIST IDX files not available (this environment has no dataset "
            "network access); set MNIST_DATA_DIR to run this criterion")
    return path


@pytest.fixture(scope="session")
def digits_dataset():
    """Bundled scikit-learn handwritten digits as a RawDataset (8x8, 10 classes)."""
    sklearn_datasets = pytest.importorskip("sklearn.datasets")
    bunch = sklearn_datasets.load_digits()
    x = bunch.data / 16.0
    y = bunch.target.astype(np.int64)
    rng = np.random.default_rng(1234)
    order = rng.permutation(len(x))
    x, y = x[order], y[order]
    n_train = 1200
    return RawDataset("digits", x[:n_train], y[:n_train],
                      x[n_train:], y[n_train:])
