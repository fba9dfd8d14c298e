"""Recurrent table-pair classifier with column-by-column attention.

For a pair (left, right) the columns are read as ``left + [delimiter] + right``:

* forward direction: one LSTM encodes the left columns; a second LSTM reads
  the delimiter and the right columns starting from the first one's final
  cell state (conditional encoding);
* backward direction: mirror image, encoding the right table reversed first
  and conditioning the reversed left table on it;
* attention, following the word-by-word entailment attention of Rocktaschel
  et al. (2016): every forward right-column state ``h_t`` attends over the
  left-column states ``Y``::

      M_t     = tanh(Y Wy^T + (h_t Wh^T + r_{t-1} Wr^T))
      alpha_t = softmax(M_t w)
      r_t     = alpha_t^T Y + tanh(r_{t-1} Wt^T)

* the final representation ``tanh(r_N Wp^T + [h_N_fwd; h_N_bwd] Wx^T)`` feeds
  a 3-way softmax (equivalent, subPartOf, none).

All arrays are float64.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .. import autodiff as ad
from .encode import COMPONENTS, EncodedTable, canonical_mode

FORMAT_VERSION = 1
N_CLASSES = 3
LSTM_CELLS = ("fwd_first", "fwd_second", "bwd_first", "bwd_second")


class NonFiniteGradient(FloatingPointError):
    pass


@dataclass
class AlignmentModel:
    params: dict
    hidden: int
    word_dim: int
    node_dim: int
    mode: str
    seed: int = 0

    @classmethod
    def initialize(cls, word_dim: int, node_dim: int, hidden: int = 100, mode: str = "type", seed: int = 0):
        rng = np.random.default_rng(seed)
        k = hidden

        def glorot(rows, cols):
            s = np.sqrt(6.0 / (rows + cols))
            return rng.uniform(-s, s, size=(rows, cols))

        p = {
            "proj_desc": glorot(k, word_dim),
            "proj_val": glorot(k, node_dim),
            "proj_type": glorot(k, node_dim),
            "proj_bias": np.zeros(k),
            "delimiter": rng.uniform(-0.1, 0.1, size=k),
        }
        for cell in LSTM_CELLS:
            p[f"{cell}_W"] = glorot(4 * k, 2 * k)
            b = np.zeros(4 * k)
            b[k:2 * k] = 1.0  # forget gate
            p[f"{cell}_b"] = b
        p.update({
            "att_Wy": glorot(k, k),
            "att_Wh": glorot(k, k),
            "att_Wr": glorot(k, k),
            "att_w": glorot(1, k),
            "att_Wt": glorot(k, k),
            "out_Wp": glorot(k, k),
            "out_Wx": glorot(k, 2 * k),
            "cls_W": glorot(N_CLASSES, k),
            "cls_b": np.zeros(N_CLASSES),
        })
        return cls(p, hidden, word_dim, node_dim, canonical_mode(mode), seed)

    def copy(self) -> "AlignmentModel":
        return AlignmentModel({k: v.copy() for k, v in self.params.items()}, self.hidden,
                              self.word_dim, self.node_dim, self.mode, self.seed)

    # -- persistence -----------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": "tablenet-align",
            "version": FORMAT_VERSION,
            "hidden": self.hidden,
            "word_dim": self.word_dim,
            "node_dim": self.node_dim,
            "mode": self.mode,
            "seed": self.seed,
            "params": {
                k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(self.params.items())
            },
        }

    @classmethod
    def from_json(cls, obj) -> "AlignmentModel":
        if obj.get("version") != FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {obj.get('version')}")
        params = {k: np.asarray(v["data"], dtype=float).reshape(v["shape"]) for k, v in obj["params"].items()}
        return cls(params, obj["hidden"], obj["word_dim"], obj["node_dim"], obj["mode"], obj.get("seed", 0))

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_json(), fh)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "AlignmentModel":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


@dataclass
class Batch:
    """Pairs sharing the same left and right widths."""

    left: dict  # component -> (B, n_left, dim)
    right: dict  # component -> (B, n_right, dim)
    labels: np.ndarray = None
    keys: list = field(default_factory=list)

    @property
    def size(self) -> int:
        return next(iter(self.left.values())).shape[0]


def make_batch(pairs, labels=None, keys=()) -> Batch:
    """Stack ``(EncodedTable, EncodedTable)`` pairs of equal widths."""
    names = list(pairs[0][0].parts)
    left = {n: np.stack([p[0].parts[n] for p in pairs]) for n in names}
    right = {n: np.stack([p[1].parts[n] for p in pairs]) for n in names}
    lab = None if labels is None else np.asarray(labels, dtype=int)
    return Batch(left, right, lab, list(keys))


@dataclass
class Trace:
    logits: ad.Tensor
    probs: np.ndarray
    attention: np.ndarray  # (B, n_right, n_left)


def _lstm_step(x, h, c, W, b, k):
    z = ad.linear(ad.concat([x, h], axis=-1), W) + b
    i = ad.sigmoid(z[:, 0:k])
    f = ad.sigmoid(z[:, k:2 * k])
    o = ad.sigmoid(z[:, 2 * k:3 * k])
    g = ad.tanh(z[:, 3 * k:4 * k])
    c = f * c + i * g
    h = o * ad.tanh(c)
    return h, c


def _project(parts: dict, P: dict, mode: str):
    x = None
    for name in COMPONENTS[mode]:
        if name in parts:
            term = ad.linear(ad.Tensor(parts[name]), P[f"proj_{name}"])
            x = term if x is None else x + term
    return x + P["proj_bias"]


def build_graph(model: AlignmentModel, batch: Batch, P: dict) -> Trace:
    """Record the forward computation for a batch on parameter tensors ``P``."""
    k = model.hidden
    B = batch.size
    xl = _project(batch.left, P, model.mode)
    xr = _project(batch.right, P, model.mode)
    n_left, n_right = xl.shape[1], xr.shape[1]
    if n_left == 0 or n_right == 0:
        raise ValueError("empty schema")
    zeros = ad.Tensor(np.zeros((B, k)))
    delim = zeros + P["delimiter"]

    def run(cell, steps, h, c):
        states = []
        for x in steps:
            h, c = _lstm_step(x, h, c, P[f"{cell}_W"], P[f"{cell}_b"], k)
            states.append(h)
        return states, h, c

    left_steps = [xl[:, t, :] for t in range(n_left)]
    right_steps = [xr[:, t, :] for t in range(n_right)]

    # forward: left, then delimiter + right conditioned on the left cell state
    Y, _, c_left = run("fwd_first", left_steps, zeros, zeros)
    right_states, h_fwd, _ = run("fwd_second", [delim] + right_steps, zeros, c_left)
    right_states = right_states[1:]

    # backward: right reversed, then delimiter + left reversed
    _, _, c_right = run("bwd_first", right_steps[::-1], zeros, zeros)
    _, h_bwd, _ = run("bwd_second", [delim] + left_steps[::-1], zeros, c_right)

    Ys = ad.stack(Y, axis=1)  # (B, n_left, k)
    WyY = ad.linear(Ys, P["att_Wy"])
    r = zeros
    alphas = []
    for h_t in right_states:
        q = ad.linear(h_t, P["att_Wh"]) + ad.linear(r, P["att_Wr"])
        M = ad.tanh(WyY + ad.expand_dims(q, 1))
        energy = ad.linear(M, P["att_w"])[:, :, 0]
        alpha = ad.softmax(energy, axis=-1)
        alphas.append(alpha.value)
        r = ad.reduce_sum(ad.expand_dims(alpha, -1) * Ys, axis=1) + ad.tanh(ad.linear(r, P["att_Wt"]))

    final = ad.tanh(ad.linear(r, P["out_Wp"]) + ad.linear(ad.concat([h_fwd, h_bwd], axis=-1), P["out_Wx"]))
    logits = ad.linear(final, P["cls_W"]) + P["cls_b"]
    z = logits.value - logits.value.max(axis=1, keepdims=True)
    probs = np.exp(z) / np.exp(z).sum(axis=1, keepdims=True)
    return Trace(logits, probs, np.stack(alphas, axis=1))


def _tensors(model: AlignmentModel) -> dict:
    return {k: ad.Tensor(v, name=k) for k, v in model.params.items()}


def forward_batch(model: AlignmentModel, batch: Batch) -> Trace:
    return build_graph(model, batch, _tensors(model))


def forward(model: AlignmentModel, left: EncodedTable, right: EncodedTable):
    """Class probabilities and attention matrix (right columns x left columns)."""
    trace = forward_batch(model, make_batch([(left, right)]))
    return trace.probs[0], trace.attention[0]


def loss(probabilities, label: int, eps: float = 1e-12) -> float:
    """Cross-entropy of one distribution; probabilities below eps are clamped."""
    p = float(np.asarray(probabilities)[int(label)])
    return -float(np.log(max(p, eps)))


def batch_loss(model: AlignmentModel, batch: Batch) -> float:
    return _loss_tensor(model, batch, _tensors(model))[0].value.item()


def _loss_tensor(model, batch, P):
    trace = build_graph(model, batch, P)
    nll = ad.neg(ad.mean(ad.pick(ad.log_softmax(trace.logits, axis=-1), batch.labels)))
    return nll, trace


def gradients(model: AlignmentModel, batch: Batch):
    """Mean cross-entropy over the batch and its gradient for every block."""
    if batch.labels is None or batch.size == 0:
        raise ValueError("gradients need a nonempty labeled batch")
    P = _tensors(model)
    nll, trace = _loss_tensor(model, batch, P)
    nll.backward()
    grads = {}
    for name, t in P.items():
        g = np.zeros_like(t.value) if t.grad is None else t.grad
        if not np.all(np.isfinite(g)):
            raise NonFiniteGradient(f"non-finite gradient in parameter block {name!r}")
        grads[name] = g
    return float(nll.value), grads, trace
