"""SGD training loop, evaluation and multi-seed summaries."""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .data import Dataset
from .errors import DivergenceError, InvalidSpecError, NumericError
from .model import Network, build_network, predict, softmax_cross_entropy

log = logging.getLogger(__name__)

METRIC_COLUMNS = ("epoch", "train_loss", "train_acc", "test_loss", "test_acc", "wall_seconds")
PRECISIONS = {"f64": np.float64, "f32": np.float32}


@dataclass
class TrainConfig:
    epochs: int = 10
    batch_size: int = 64
    learning_rate: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    seed: int = 0
    precision: str = "f64"
    lr_decay: bool = True  # x0.1 at 50% and 75% of the epochs
    augment: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise InvalidSpecError("epochs must be >= 0 and batch_size >= 1")
        if self.learning_rate < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise InvalidSpecError("learning_rate, momentum and weight_decay must be >= 0")
        if self.precision not in PRECISIONS:
            raise InvalidSpecError(f"precision must be one of {sorted(PRECISIONS)}")

    @property
    def dtype(self):
        return PRECISIONS[self.precision]

    def lr_at(self, epoch: int) -> float:
        lr = self.learning_rate
        if self.lr_decay:
            if epoch >= max(1, int(0.5 * self.epochs)):
                lr *= 0.1
            if epoch >= max(1, int(0.75 * self.epochs)):
                lr *= 0.1
        return lr


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_acc: float
    test_loss: float
    test_acc: float
    wall_seconds: float


class SGD:
    """Momentum SGD with coupled weight decay, updating parameters in place."""

    def __init__(self, net: Network, momentum: float, weight_decay: float):
        self.net = net
        self.momentum = momentum
        self.weight_decay = weight_decay
        self.velocity = {id(m.params[i]): np.zeros_like(m.params[i]) for m, i in net.parameters()}

    def step(self, lr: float) -> None:
        for m, i in self.net.parameters():
            p, g = m.params[i], m.grads[i]
            if self.weight_decay and m.decay[i]:
                g = g + self.weight_decay * p
            v = self.velocity[id(p)]
            v *= self.momentum
            v += g
            p -= lr * v


def _augment(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    # pad-4 random crop + horizontal flip
    b, _, h, w = x.shape
    xp = np.pad(x, ((0, 0), (0, 0), (4, 4), (4, 4)))
    dy = rng.integers(0, 9, size=b)
    dx = rng.integers(0, 9, size=b)
    flip = rng.random(b) < 0.5
    out = np.empty_like(x)
    for i in range(b):
        crop = xp[i, :, dy[i]:dy[i] + h, dx[i]:dx[i] + w]
        out[i] = crop[:, :, ::-1] if flip[i] else crop
    return out


def evaluate(net: Network, data: Dataset, batch_size: int = 256) -> tuple[float, float]:
    """Return ``(accuracy, mean loss)`` on ``data``."""
    logits = predict(net, data.images, batch_size)
    loss, _ = softmax_cross_entropy(logits, data.labels)
    acc = float((logits.argmax(axis=1) == data.labels).mean())
    return acc, loss


def train(
    arch: Sequence[dict],
    train_data: Dataset,
    config: TrainConfig,
    test_data: Optional[Dataset] = None,
    net: Optional[Network] = None,
) -> tuple[Network, list[EpochMetrics]]:
    """Train ``arch`` from scratch with softmax cross-entropy and momentum SGD.

    ``config.seed`` fixes weight initialisation and batch order; graph seeds
    live in the architecture. Without augmentation, identical inputs give
    bitwise-identical weights and metrics.
    """
    dtype = config.dtype
    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    if net is None:
        net = build_network(arch, init_ss, dtype=dtype)
    shuffle_rng = np.random.Generator(np.random.PCG64(shuffle_ss))
    opt = SGD(net, config.momentum, config.weight_decay)
    x_all = train_data.images.astype(dtype, copy=False)
    y_all = train_data.labels
    test = test_data.astype(dtype) if test_data is not None else None
    history = []
    start = time.perf_counter()
    for epoch in range(config.epochs):
        lr = config.lr_at(epoch)
        order = shuffle_rng.permutation(len(y_all))
        loss_sum, correct = 0.0, 0
        for lo in range(0, len(order), config.batch_size):
            idx = order[lo:lo + config.batch_size]
            xb, yb = x_all[idx], y_all[idx]
            if config.augment:
                xb = _augment(xb, shuffle_rng)
            try:
                logits = net.forward(xb)
            except NumericError as exc:
                raise DivergenceError(epoch, float("nan")) from exc
            loss, grad = softmax_cross_entropy(logits, yb)
            if not np.isfinite(loss):
                raise DivergenceError(epoch, loss)
            net.backward(grad.astype(dtype, copy=False))
            opt.step(lr)
            loss_sum += loss * len(idx)
            correct += int((logits.argmax(axis=1) == yb).sum())
        train_loss = loss_sum / len(y_all)
        train_acc = correct / len(y_all)
        try:
            test_acc, test_loss = evaluate(net, test) if test is not None else (float("nan"),) * 2
        except NumericError as exc:
            raise DivergenceError(epoch, train_loss) from exc
        if not np.isfinite(train_loss) or (test is not None and not np.isfinite(test_loss)):
            raise DivergenceError(epoch, train_loss)
        m = EpochMetrics(epoch + 1, train_loss, train_acc, test_loss, test_acc,
                         time.perf_counter() - start)
        log.info("epoch %d lr=%g train_loss=%.4f train_acc=%.4f test_acc=%.4f",
                 m.epoch, lr, m.train_loss, m.train_acc, m.test_acc)
        history.append(m)
    return net, history


def write_metrics_csv(history: Sequence[EpochMetrics], path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=METRIC_COLUMNS)
        writer.writeheader()
        for m in history:
            writer.writerow(asdict(m))


def summarize(values: Sequence[float]) -> dict:
    arr = np.asarray(values, dtype=float)
    return {
        "mean": float(arr.mean()),
        "stddev": float(arr.std(ddof=1)) if len(arr) > 1 else 0.0,
        "min": float(arr.min()),
        "max": float(arr.max()),
        "n": int(len(arr)),
    }


def multi_seed_report(
    arch: Sequence[dict],
    train_data: Dataset,
    config: TrainConfig,
    seeds: Sequence[int],
    test_data: Optional[Dataset] = None,
) -> dict:
    """Final accuracy statistics over independent runs, one per seed.

    Uses test accuracy when ``test_data`` is given, else train accuracy.
    Diverged seeds are listed under ``"failures"`` and excluded from the
    statistics.
    """
    if len(seeds) < 2:
        raise InvalidSpecError("multi_seed_report needs at least two seeds")
    finals, failures = {}, {}
    for s in seeds:
        cfg = TrainConfig(**{**asdict(config), "seed": int(s)})
        try:
            net, hist = train(arch, train_data, cfg, test_data)
        except DivergenceError as exc:
            failures[int(s)] = str(exc)
            continue
        if hist:
            last = hist[-1]
            finals[int(s)] = last.test_acc if test_data is not None else last.train_acc
        else:
            data = test_data if test_data is not None else train_data
            finals[int(s)] = evaluate(net, data.astype(cfg.dtype))[0]
    report = summarize(list(finals.values())) if finals else {}
    report["per_seed"] = finals
    report["failures"] = failures
    return report
