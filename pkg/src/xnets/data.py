"""Datasets: the CIFAR-10 binary batches and a seeded synthetic task."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import CorruptFileError, DatasetNotFoundError

RECORD_BYTES = 1 + 3 * 32 * 32
CIFAR10_MEAN = (0.4914, 0.4822, 0.4465)
CIFAR10_STD = (0.2470, 0.2435, 0.2616)
TRAIN_FILES = tuple(f"data_batch_{i}.bin" for i in range(1, 6))
TEST_FILES = ("test_batch.bin",)


@dataclass
class Dataset:
    images: np.ndarray  # [N, C, H, W]
    labels: np.ndarray  # [N] int64
    num_classes: int
    split: str = "train"

    def __post_init__(self):
        if len(self.images) != len(self.labels):
            raise ValueError(f"{len(self.images)} images but {len(self.labels)} labels")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError("labels outside [0, num_classes)")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def shape(self) -> tuple:
        return tuple(self.images.shape[1:])

    def subset(self, n: int) -> "Dataset":
        return Dataset(self.images[:n], self.labels[:n], self.num_classes, self.split)

    def astype(self, dtype) -> "Dataset":
        return Dataset(self.images.astype(dtype), self.labels, self.num_classes, self.split)


def read_cifar10_batch(path) -> tuple[np.ndarray, np.ndarray]:
    """Raw ``(uint8 images [N,3,32,32], labels [N])`` from one binary batch file."""
    path = Path(path)
    if not path.is_file():
        raise DatasetNotFoundError(f"{path} not found")
    raw = np.fromfile(path, dtype=np.uint8)
    if raw.size == 0 or raw.size % RECORD_BYTES:
        raise CorruptFileError(f"{path}: {raw.size} bytes is not a multiple of {RECORD_BYTES}")
    rec = raw.reshape(-1, RECORD_BYTES)
    labels = rec[:, 0].astype(np.int64)
    if labels.max() > 9:
        raise CorruptFileError(f"{path}: label byte {labels.max()} outside [0, 9]")
    return rec[:, 1:].reshape(-1, 3, 32, 32), labels


def load_cifar10(
    path,
    split: str = "train",
    limit: Optional[int] = None,
    standardize: bool = True,
    mean: Sequence[float] = CIFAR10_MEAN,
    std: Sequence[float] = CIFAR10_STD,
    dtype=np.float64,
) -> Dataset:
    """Load CIFAR-10 from the binary distribution.

    ``path`` is a directory holding ``data_batch_{1..5}.bin`` / ``test_batch.bin``
    or a single batch file. Pixels are scaled to ``[0, 1]`` and, with
    ``standardize``, shifted and scaled per channel by ``mean`` / ``std``.
    """
    path = Path(path)
    if path.is_file():
        files = [path]
    elif path.is_dir():
        names = TRAIN_FILES if split == "train" else TEST_FILES
        files = [path / n for n in names]
        missing = [f for f in files if not f.is_file()]
        if missing:
            raise DatasetNotFoundError(f"missing CIFAR-10 files: {', '.join(str(m) for m in missing)}")
    else:
        raise DatasetNotFoundError(f"{path} not found")
    images, labels, total = [], [], 0
    for f in files:
        x, y = read_cifar10_batch(f)
        images.append(x)
        labels.append(y)
        total += len(y)
        if limit is not None and total >= limit:
            break
    x = np.concatenate(images)[:limit].astype(dtype) / 255.0
    y = np.concatenate(labels)[:limit]
    if standardize:
        m = np.asarray(mean, dtype=dtype)[None, :, None, None]
        s = np.asarray(std, dtype=dtype)[None, :, None, None]
        x = (x - m) / s
    return Dataset(x, y, 10, split)


def synthetic_dataset(
    n_samples: int,
    n_classes: int,
    image_shape: Sequence[int] = (3, 8, 8),
    seed: int = 0,
    split: str = "train",
    noise: float = 1.0,
) -> Dataset:
    """Gaussian blobs around one random mean image per class.

    Class means are fixed by ``seed`` alone, so ``split="train"`` and
    ``split="test"`` draw different samples from the same classes.
    """
    if n_samples < 1 or n_classes < 1:
        raise ValueError("n_samples and n_classes must be >= 1")
    means_ss, train_ss, test_ss = np.random.SeedSequence(seed).spawn(3)
    means = np.random.Generator(np.random.PCG64(means_ss)).normal(size=(n_classes, *image_shape))
    rng = np.random.Generator(np.random.PCG64(train_ss if split == "train" else test_ss))
    labels = rng.permutation(np.arange(n_samples) % n_classes).astype(np.int64)
    images = means[labels] + noise * rng.normal(size=(n_samples, *image_shape))
    return Dataset(images, labels, n_classes, split)
