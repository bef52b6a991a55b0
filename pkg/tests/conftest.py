import os
from pathlib import Path

import pytest

import mckernel.dataio as dataio

_MNIST_BASES = {
    "train_images": "train-images-idx3-ubyte",
    "train_labels": "train-labels-idx1-ubyte",
    "test_images": "t10k-images-idx3-ubyte",
    "test_labels": "t10k-labels-idx1-ubyte",
}


def mnist_dir() -> Path:
    return Path(os.environ.get("MCK_MNIST_DIR",
                               Path(__file__).parent / "data" / "mnist"))


def _find(base: str) -> Path | None:
    d = mnist_dir()
    for name in (base, base + ".gz"):
        p = d / name
        if p.is_file():
            return p
    return None


def mnist_available() -> bool:
    return all(_find(b) is not None for b in _MNIST_BASES.values())


requires_mnist = pytest.mark.skipif(
    not mnist_available(),
    reason="MNIST IDX files not found; set MCK_MNIST_DIR or place the four "
           "standard files under tests/data/mnist/ (gzipped accepted)")


@pytest.fixture(scope="session")
def mnist_train() -> dataio.Dataset:
    if not mnist_available():
        pytest.skip("MNIST files not available")
    return dataio.load_idx(_find(_MNIST_BASES["train_images"]),
                           _find(_MNIST_BASES["train_labels"]))


@pytest.fixture(scope="session")
def mnist_test() -> dataio.Dataset:
    if not mnist_available():
        pytest.skip("MNIST files not available")
    return dataio.load_idx(_find(_MNIST_BASES["test_images"]),
                           _find(_MNIST_BASES["test_labels"]))
