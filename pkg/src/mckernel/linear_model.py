"""Softmax classifier head and deterministic mini-batch SGD trainer.

The model is ``softmax(W x + b)`` over either raw inputs or the random
feature expansion.  Training minimizes mean cross-entropy plus an
optional L2 term ``l2_lambda * |W|_F^2``; at two classes with a single
logit the objective reduces exactly to the binary logistic loss
``log(1 + exp(-y f(x)))``.

Determinism contract: given the data, the feature-map seed and the
config, the per-epoch metric history is a pure function.  Weights start
at zero (the objective is convex, so no random init is needed), epoch
shuffles come from a named stream, and batches are visited in shuffle
order.  Features are computed on the fly per batch as unnormalized
cos/sin pairs; the feature map's 1/sqrt(D) scale is a constant the
weights absorb, and published caption learning rates assume the raw
pairs.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import dataio, fastfood
from .dataio import Dataset
from .detrand import RandomStream, fisher_yates_permutation
from .fastfood import FastfoodBlock, FeatureMapSpec

MODEL_MAGIC = b"MCKMODL1"


@dataclass
class TrainConfig:
    learning_rate: float
    batch_size: int
    epochs: int
    l2_lambda: float = 0.0
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0.0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch size must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be non-negative")
        if self.l2_lambda < 0.0:
            raise ValueError("l2_lambda must be non-negative")


class SoftmaxModel:
    """Weight matrix W (C x F) and bias b (C), float64."""

    def __init__(self, w: np.ndarray, b: np.ndarray):
        w = np.asarray(w, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        if w.ndim != 2 or b.shape != (w.shape[0],):
            raise ValueError("W must be (C, F) and b length C")
        self.w = w
        self.b = b

    @classmethod
    def zeros(cls, num_classes: int, num_features: int) -> "SoftmaxModel":
        if num_classes < 2:
            raise ValueError("need at least two classes")
        return cls(np.zeros((num_classes, num_features)), np.zeros(num_classes))

    @property
    def num_classes(self) -> int:
        return self.w.shape[0]

    @property
    def num_features(self) -> int:
        return self.w.shape[1]


def _softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    np.exp(z, out=z)
    z /= z.sum(axis=1, keepdims=True)
    return z


def forward(model: SoftmaxModel, x: np.ndarray) -> np.ndarray:
    """Class probabilities for one feature vector (stable softmax)."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.num_features,):
        raise ValueError(
            f"feature length {x.shape} does not match model F={model.num_features}")
    return _softmax_rows((model.w @ x + model.b)[None, :])[0]


def forward_batch(model: SoftmaxModel, x: np.ndarray) -> np.ndarray:
    logits = x @ model.w.T + model.b
    return _softmax_rows(np.asarray(logits, dtype=np.float64))


def _check_labels(labels: np.ndarray, num_classes: int) -> None:
    if len(labels) and (labels.min() < 0 or labels.max() >= num_classes):
        raise ValueError(f"labels must lie in [0, {num_classes})")


def loss(model: SoftmaxModel, x: np.ndarray, labels: np.ndarray,
         l2_lambda: float = 0.0) -> float:
    """Mean cross-entropy over the batch plus l2_lambda * |W|_F^2."""
    labels = np.asarray(labels)
    _check_labels(labels, model.num_classes)
    probs = forward_batch(model, x)
    picked = probs[np.arange(len(labels)), labels]
    ce = float(-np.log(np.maximum(picked, 1e-300)).mean())
    if l2_lambda:
        ce += l2_lambda * float((model.w * model.w).sum())
    return ce


def gradients(model: SoftmaxModel, x: np.ndarray, labels: np.ndarray,
              l2_lambda: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Analytic (dW, db) of the regularized batch objective."""
    labels = np.asarray(labels)
    _check_labels(labels, model.num_classes)
    x = np.asarray(x, dtype=np.float64)
    m = x.shape[0]
    delta = forward_batch(model, x)
    delta[np.arange(m), labels] -= 1.0
    delta /= m
    dw = delta.T @ x
    if l2_lambda:
        dw += 2.0 * l2_lambda * model.w
    return dw, delta.sum(axis=0)


def sgd_step(model: SoftmaxModel, x: np.ndarray, labels: np.ndarray,
             config: TrainConfig) -> SoftmaxModel:
    """One update W <- W - lr dW, b <- b - lr db; mutates and returns model."""
    if len(labels) == 0:
        raise ValueError("batch must be non-empty")
    dw, db = gradients(model, x, labels, config.l2_lambda)
    model.w -= config.learning_rate * dw
    model.b -= config.learning_rate * db
    return model


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    test_acc: float


@dataclass
class RunMetrics:
    records: list[EpochRecord] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        buf.write("epoch,train_loss,test_acc\n")
        for r in self.records:
            buf.write(f"{r.epoch},{r.train_loss!r},{r.test_acc!r}\n")
        return buf.getvalue()

    def save_csv(self, path) -> None:
        with open(path, "w", encoding="utf-8") as f:
            f.write(self.to_csv())


class _Featurizer:
    """Batch feature provider: identity for the raw baseline, otherwise
    on-the-fly unnormalized cos/sin pairs from the expansion blocks."""

    def __init__(self, spec: FeatureMapSpec | None,
                 blocks: list[FastfoodBlock] | None = None):
        self.spec = spec
        if spec is not None and blocks is None:
            blocks = fastfood.build_blocks(spec)
        self.blocks = blocks

    def dim(self, raw_dim: int) -> int:
        if self.spec is None:
            return raw_dim
        return fastfood.feature_dim(self.spec)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if self.spec is None:
            return x
        return fastfood.feature_map_batch(self.spec, self.blocks, x,
                                          normalize=False)


def train(spec: FeatureMapSpec | None, train_ds: Dataset, test_ds: Dataset,
          config: TrainConfig) -> tuple[SoftmaxModel, RunMetrics]:
    """Mini-batch SGD over shuffled epochs; returns model and per-epoch metrics.

    Each epoch draws a fresh deterministic shuffle from the stream
    ("shuffle", epoch) keyed by ``config.shuffle_seed``, walks it in
    mini-batches of ``config.batch_size`` (last batch at its true size),
    and records the epoch's mean train loss and the test accuracy.
    """
    if spec is not None and spec.input_dim != train_ds.dim:
        raise ValueError(
            f"spec input_dim {spec.input_dim} != dataset dim {train_ds.dim}")
    if train_ds.dim != test_ds.dim:
        raise ValueError("train and test dimensions differ")
    featurize = _Featurizer(spec)
    model = SoftmaxModel.zeros(train_ds.num_classes, featurize.dim(train_ds.dim))
    metrics = RunMetrics()
    n = len(train_ds.labels)
    for epoch in range(config.epochs):
        order = fisher_yates_permutation(
            RandomStream(config.shuffle_seed, "shuffle", epoch), n)
        total = 0.0
        batches = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = featurize(train_ds.features[idx])
            yb = train_ds.labels[idx]
            total += loss(model, xb, yb, config.l2_lambda)
            sgd_step(model, xb, yb, config)
            batches += 1
        acc, _ = _evaluate_featurized(model, featurize, test_ds)
        metrics.records.append(EpochRecord(epoch, total / batches, acc))
    return model, metrics


def _evaluate_featurized(model: SoftmaxModel, featurize: _Featurizer,
                         ds: Dataset, chunk: int = 512) -> tuple[float, float]:
    _check_labels(ds.labels, model.num_classes)
    hits = 0
    total_loss = 0.0
    n = len(ds.labels)
    for start in range(0, n, chunk):
        x = featurize(ds.features[start:start + chunk])
        y = ds.labels[start:start + chunk]
        probs = forward_batch(model, x)
        hits += int((probs.argmax(axis=1) == y).sum())
        picked = probs[np.arange(len(y)), y]
        total_loss += float(-np.log(np.maximum(picked, 1e-300)).sum())
    return hits / n, total_loss / n


def evaluate(model: SoftmaxModel, spec: FeatureMapSpec | None,
             ds: Dataset) -> tuple[float, float]:
    """Argmax accuracy and mean unregularized loss over a dataset."""
    return _evaluate_featurized(model, _Featurizer(spec), ds)


# -- checkpoints -----------------------------------------------------------

def save_model(path, model: SoftmaxModel, spec: FeatureMapSpec | None) -> None:
    """Single-file checkpoint: magic, spec config text, then W and b records."""
    config = fastfood.spec_to_config(spec) if spec is not None else "kernel=none\n"
    payload = config.encode("utf-8")
    with open(path, "wb") as f:
        f.write(MODEL_MAGIC)
        f.write(len(payload).to_bytes(4, "little"))
        f.write(payload)
        dataio.write_matrix_record(f, model.w)
        dataio.write_matrix_record(f, model.b[None, :])


def load_model(path) -> tuple[SoftmaxModel, FeatureMapSpec | None]:
    with open(path, "rb") as f:
        magic = f.read(8)
        if magic != MODEL_MAGIC:
            raise ValueError(f"{path}: not a model checkpoint (magic {magic!r})")
        size = int.from_bytes(f.read(4), "little")
        config = f.read(size).decode("utf-8")
        w = dataio.read_matrix_record(f)
        b = dataio.read_matrix_record(f)[0]
    spec = None if "kernel=none" in config else fastfood.spec_from_config(config)
    return SoftmaxModel(w, b), spec
