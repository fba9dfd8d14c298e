"""Training and inference for the alignment model."""
from __future__ import annotations

import json
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from ..corpus import RelationLabel
from .encode import EncodedTable
from .model import AlignmentModel, Batch, batch_loss, forward_batch, gradients, make_batch

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    epochs: int = 50
    split: tuple = (0.6, 0.1, 0.3)
    learning_rate: float = 1e-3
    batch_size: int = 32
    hidden: int = 100
    seed: int = 0

    def __post_init__(self):
        self.split = tuple(float(x) for x in self.split)
        if len(self.split) != 3 or abs(sum(self.split) - 1.0) > 1e-9 or min(self.split) < 0:
            raise ValueError(f"split fractions must be three nonnegatives summing to 1, got {self.split}")


@dataclass
class PairExample:
    key: str
    left: EncodedTable
    right: EncodedTable
    label: Optional[int] = None

    @property
    def shape(self) -> tuple[int, int]:
        return self.left.width, self.right.width


def split_dataset(examples: Sequence[PairExample], fractions=(0.6, 0.1, 0.3), seed: int = 0):
    """Seeded train/validation/test split; independent of the input order."""
    ordered = sorted(examples, key=lambda e: e.key)
    perm = np.random.default_rng(seed).permutation(len(ordered))
    n = len(ordered)
    n_train = int(round(fractions[0] * n))
    n_val = int(round(fractions[1] * n))
    parts = (perm[:n_train], perm[n_train:n_train + n_val], perm[n_train + n_val:])
    return tuple([ordered[i] for i in sorted(p)] for p in parts)


def buckets(examples: Sequence[PairExample]) -> dict:
    """Group examples by (left width, right width), keys sorted for stability."""
    out = defaultdict(list)
    for e in sorted(examples, key=lambda e: e.key):
        out[e.shape].append(e)
    return dict(sorted(out.items()))


def batches(examples: Sequence[PairExample], batch_size: int, rng=None) -> list[Batch]:
    """Length-bucketed batches; shuffled within and across buckets when ``rng`` is given."""
    out = []
    for _, group in buckets(examples).items():
        order = rng.permutation(len(group)) if rng is not None else np.arange(len(group))
        for s in range(0, len(group), batch_size):
            chunk = [group[i] for i in order[s:s + batch_size]]
            labels = None if chunk[0].label is None else [e.label for e in chunk]
            out.append(make_batch([(e.left, e.right) for e in chunk], labels, [e.key for e in chunk]))
    if rng is not None:
        out = [out[i] for i in rng.permutation(len(out))]
    return out


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for k in sorted(params):
            g = grads[k]
            self.m[k] = self.beta1 * self.m[k] + (1 - self.beta1) * g
            self.v[k] = self.beta2 * self.v[k] + (1 - self.beta2) * g * g
            params[k] -= self.lr * (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)


@dataclass
class EpochMetrics:
    epoch: int
    train_loss: float
    train_accuracy: float
    val_loss: float
    val_accuracy: float


@dataclass
class TrainResult:
    model: AlignmentModel
    history: list = field(default_factory=list)
    best_epoch: int = 0

    def write_history(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for m in self.history:
                fh.write(json.dumps(asdict(m), sort_keys=True) + "\n")


def evaluate_loss(model: AlignmentModel, examples: Sequence[PairExample], batch_size: int = 64):
    """Mean loss and accuracy over labeled examples."""
    total, correct, n = 0.0, 0, 0
    for b in batches(examples, batch_size):
        total += batch_loss(model, b) * b.size
        probs = forward_batch(model, b).probs
        correct += int(np.sum(np.argmax(probs, axis=1) == b.labels))
        n += b.size
    return total / n, correct / n


def train(train_set: Sequence[PairExample], val_set: Sequence[PairExample], config: TrainConfig,
          word_dim: int, node_dim: int, mode: str = "type", model: AlignmentModel = None) -> TrainResult:
    """Mini-batch Adam; keeps the parameters with the lowest validation loss."""
    if not train_set:
        raise ValueError("empty training split")
    if not val_set:
        raise ValueError("empty validation split")
    model = model or AlignmentModel.initialize(word_dim, node_dim, config.hidden, mode, config.seed)
    opt = Adam(model.params, lr=config.learning_rate)
    best = (np.inf, model.copy(), 0)
    history = []
    for epoch in range(1, config.epochs + 1):
        rng = np.random.default_rng([config.seed, epoch])
        for b in batches(train_set, config.batch_size, rng):
            _, grads, _ = gradients(model, b)
            opt.step(model.params, grads)
        tr_loss, tr_acc = evaluate_loss(model, train_set)
        va_loss, va_acc = evaluate_loss(model, val_set)
        history.append(EpochMetrics(epoch, tr_loss, tr_acc, va_loss, va_acc))
        log.info("epoch %d train %.4f/%.3f val %.4f/%.3f", epoch, tr_loss, tr_acc, va_loss, va_acc)
        if va_loss < best[0]:
            best = (va_loss, model.copy(), epoch)
    return TrainResult(best[1], history, best[2])


@dataclass
class Prediction:
    key: str
    label: RelationLabel
    probabilities: np.ndarray
    attention: np.ndarray


def predict_examples(model: AlignmentModel, examples: Sequence[PairExample], batch_size: int = 64) -> list[Prediction]:
    """Predictions in input order."""
    by_key = {}
    for b in batches(examples, batch_size):
        trace = forward_batch(model, b)
        for k, key in enumerate(b.keys):
            p = trace.probs[k]
            # np.argmax returns the first maximum: equivalent < subPartOf < none
            by_key[key] = Prediction(key, RelationLabel(int(np.argmax(p))), p, trace.attention[k])
    return [by_key[e.key] for e in examples]


def predict(model: AlignmentModel, left: EncodedTable, right: EncodedTable) -> Prediction:
    return predict_examples(model, [PairExample(f"{left.table_id}|{right.table_id}", left, right)])[0]
