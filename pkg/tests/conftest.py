import gzip
import struct
from pathlib import Path

import numpy as np
import pytest

from layerlens import rbm

REPO_ROOT = Path(__file__).resolve().parents[1]
DATA_DIR = REPO_ROOT / "data"
MNIST_IMAGES = DATA_DIR / "mnist10k-images-idx3-ubyte.gz"
MNIST_LABELS = DATA_DIR / "mnist10k-labels-idx1-ubyte.gz"


def make_idx_images(images, path, compress=False):
    """Write (M, rows, cols) uint8 arrays in the IDX image layout."""
    images = np.asarray(images, dtype=np.uint8)
    m, rows, cols = images.shape
    payload = struct.pack(">IIII", 0x00000803, m, rows, cols) + images.tobytes()
    if compress:
        payload = gzip.compress(payload)
    Path(path).write_bytes(payload)
    return path


def make_idx_labels(labels, path, compress=False):
    labels = np.asarray(labels, dtype=np.uint8)
    payload = struct.pack(">II", 0x00000801, labels.size) + labels.tobytes()
    if compress:
        payload = gzip.compress(payload)
    Path(path).write_bytes(payload)
    return path


def random_params(n_visible, n_hidden, rng, scale=1.0):
    return rbm.RbmParams(
        weights=rng.normal(0.0, scale, size=(n_visible, n_hidden)),
        visible_bias=rng.normal(0.0, scale, size=n_visible),
        hidden_bias=rng.normal(0.0, scale, size=n_hidden),
    )


def zero_params(n_visible, n_hidden):
    return rbm.RbmParams(
        weights=np.zeros((n_visible, n_hidden)),
        visible_bias=np.zeros(n_visible),
        hidden_bias=np.zeros(n_hidden),
    )


@pytest.fixture(scope="session")
def mnist10k():
    from layerlens import data

    return data.load_idx(MNIST_IMAGES, MNIST_LABELS, name="mnist10k")
