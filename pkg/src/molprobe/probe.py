"""MLP probes over frozen embeddings: numpy forward/backward plus Adam.

The probe is the measuring instrument of the whole toolkit, so it is kept
free of framework dependencies: dense layers with ReLU, manual
backpropagation (verified against finite differences in the test suite),
and a by-the-book Adam. Training is bit-deterministic for a given (seed,
data order).

Loss heads by ``task_kind``: regression uses MSE on a linear output;
binary_classification a single logit with sigmoid cross-entropy; multiclass
a softmax over ``classes`` logits.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics
from .encoder import EmbeddingMatrix, load_embeddings, save_embeddings, _glorot

LOGGER = logging.getLogger(__name__)

TASK_KINDS = ("regression", "binary_classification", "multiclass")


class GradientError(RuntimeError):
    pass


@dataclass(frozen=True)
class ProbeConfig:
    hidden_layers: int = 1
    width: int = 600
    epochs: int = 100
    learning_rate: float = 1e-3
    batch_size: int = 256
    seed: int = 0
    task_kind: str = "regression"
    classes: int = 2

    def __post_init__(self) -> None:
        if not 0 <= self.hidden_layers <= 3:
            raise ValueError("hidden_layers must be in [0, 3]")
        if self.hidden_layers > 0 and not 100 <= self.width <= 1200:
            raise ValueError("width must be in [100, 1200]")
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.task_kind not in TASK_KINDS:
            raise ValueError(f"unknown task_kind {self.task_kind!r}")
        if self.task_kind == "multiclass" and self.classes < 2:
            raise ValueError("multiclass needs at least 2 classes")


@dataclass
class ProbeModel:
    weights: list = field(repr=False)
    biases: list = field(repr=False)
    task_kind: str = "regression"

    def copy(self) -> "ProbeModel":
        return ProbeModel(
            weights=[w.copy() for w in self.weights],
            biases=[b.copy() for b in self.biases],
            task_kind=self.task_kind,
        )


def output_dim_for(config: ProbeConfig) -> int:
    return config.classes if config.task_kind == "multiclass" else 1


def build_probe(config: ProbeConfig, input_dim: int, output_dim: int | None = None) -> ProbeModel:
    """Glorot-initialised dense stack: input -> width^hidden_layers -> output."""
    if input_dim < 1:
        raise ValueError("input_dim must be >= 1")
    if output_dim is None:
        output_dim = output_dim_for(config)
    if output_dim < 1:
        raise ValueError("output_dim must be >= 1")
    dims = [input_dim] + [config.width] * config.hidden_layers + [output_dim]
    rng = np.random.default_rng(config.seed)
    weights = [_glorot(rng, dims[i], dims[i + 1]) for i in range(len(dims) - 1)]
    biases = [np.zeros(dims[i + 1]) for i in range(len(dims) - 1)]
    return ProbeModel(weights=weights, biases=biases, task_kind=config.task_kind)


def _forward(model: ProbeModel, x: np.ndarray):
    acts = [x]
    pre = []
    h = x
    last = len(model.weights) - 1
    for i, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = h @ w + b
        pre.append(z)
        h = np.maximum(z, 0.0) if i < last else z
        acts.append(h)
    return pre, acts


def predict(model: ProbeModel, x: np.ndarray) -> np.ndarray:
    """Raw model outputs: regression values or logits, shape (n, out_dim)."""
    x = np.asarray(x, dtype=np.float64)
    return _forward(model, x)[1][-1]


def _head_loss_grad(model: ProbeModel, out: np.ndarray, y: np.ndarray):
    n = out.shape[0]
    if model.task_kind == "regression":
        t = np.asarray(y, dtype=np.float64).reshape(out.shape)
        diff = out - t
        return float(np.mean(diff * diff)), 2.0 * diff / diff.size
    if model.task_kind == "binary_classification":
        z = out[:, 0]
        t = np.asarray(y, dtype=np.float64).reshape(z.shape)
        loss = float(
            np.mean(np.maximum(z, 0.0) - t * z + np.log1p(np.exp(-np.abs(z))))
        )
        sig = 1.0 / (1.0 + np.exp(-z))
        return loss, ((sig - t) / n)[:, None]
    # multiclass
    t = np.asarray(y).astype(np.int64).reshape(-1)
    zmax = out.max(axis=1, keepdims=True)
    ez = np.exp(out - zmax)
    p = ez / ez.sum(axis=1, keepdims=True)
    lse = zmax[:, 0] + np.log(ez.sum(axis=1))
    loss = float(np.mean(lse - out[np.arange(n), t]))
    grad = p.copy()
    grad[np.arange(n), t] -= 1.0
    return loss, grad / n


def compute_loss(model: ProbeModel, x: np.ndarray, y: np.ndarray) -> float:
    out = predict(model, x)
    return _head_loss_grad(model, out, y)[0]


def loss_and_gradients(model: ProbeModel, x: np.ndarray, y: np.ndarray):
    """Loss plus gradients as (weight list, bias list) mirroring the model."""
    x = np.asarray(x, dtype=np.float64)
    pre, acts = _forward(model, x)
    loss, dz = _head_loss_grad(model, acts[-1], y)
    grad_w = [None] * len(model.weights)
    grad_b = [None] * len(model.biases)
    for i in range(len(model.weights) - 1, -1, -1):
        grad_w[i] = acts[i].T @ dz
        grad_b[i] = dz.sum(axis=0)
        if not np.isfinite(grad_w[i]).all() or not np.isfinite(grad_b[i]).all():
            raise GradientError(f"non-finite gradient in layer {i}")
        if i > 0:
            dz = (dz @ model.weights[i].T) * (pre[i - 1] > 0.0)
    return loss, (grad_w, grad_b)


@dataclass
class AdamState:
    m_w: list
    v_w: list
    m_b: list
    v_b: list
    step: int = 0

    @classmethod
    def for_model(cls, model: ProbeModel) -> "AdamState":
        return cls(
            m_w=[np.zeros_like(w) for w in model.weights],
            v_w=[np.zeros_like(w) for w in model.weights],
            m_b=[np.zeros_like(b) for b in model.biases],
            v_b=[np.zeros_like(b) for b in model.biases],
        )


def adam_step(
    model: ProbeModel,
    state: AdamState,
    grads,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
):
    """One bias-corrected Adam update, in place; returns (model, state)."""
    grad_w, grad_b = grads
    for i, g in enumerate(grad_w):
        if not np.isfinite(g).all():
            raise GradientError(f"non-finite gradient for layer {i} weights")
    for i, g in enumerate(grad_b):
        if not np.isfinite(g).all():
            raise GradientError(f"non-finite gradient for layer {i} biases")
    state.step += 1
    t = state.step
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for params, gs, ms, vs in (
        (model.weights, grad_w, state.m_w, state.v_w),
        (model.biases, grad_b, state.m_b, state.v_b),
    ):
        for p, g, m, v in zip(params, gs, ms, vs):
            m *= beta1
            m += (1.0 - beta1) * g
            v *= beta2
            v += (1.0 - beta2) * g * g
            p -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return model, state


@dataclass
class TrainResult:
    model: ProbeModel
    history: list  # (train_loss, valid_loss) per epoch
    best_epoch: int
    best_valid_loss: float


def train_probe(model: ProbeModel, train, valid, config: ProbeConfig) -> TrainResult:
    """Mini-batch Adam for ``config.epochs``; keeps the best-validation snapshot.

    ``train`` and ``valid`` are (features, targets) pairs. Epoch losses in the
    history are full-split evaluations after each epoch, not running batch
    means, so they are directly comparable across epochs.
    """
    x_tr, y_tr = train
    x_va, y_va = valid
    x_tr = np.asarray(x_tr, dtype=np.float64)
    x_va = np.asarray(x_va, dtype=np.float64)
    if x_tr.shape[0] == 0 or x_va.shape[0] == 0:
        raise ValueError("train and valid splits must be non-empty")
    if not np.isfinite(x_tr).all() or not np.isfinite(x_va).all():
        raise ValueError("non-finite features")
    rng = np.random.default_rng(config.seed)
    state = AdamState.for_model(model)
    history = []
    best = None
    best_epoch = -1
    best_loss = np.inf
    n = x_tr.shape[0]
    for epoch in range(config.epochs):
        perm = rng.permutation(n)
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            _, grads = loss_and_gradients(model, x_tr[idx], y_tr[idx])
            adam_step(model, state, grads, config.learning_rate)
        tl = compute_loss(model, x_tr, y_tr)
        vl = compute_loss(model, x_va, y_va)
        history.append((tl, vl))
        if vl < best_loss:
            best_loss = vl
            best_epoch = epoch
            best = model.copy()
    return TrainResult(
        model=best, history=history, best_epoch=best_epoch, best_valid_loss=best_loss
    )


def evaluate_probe(model: ProbeModel, test, task_kind: str | None = None) -> dict:
    """Score set on held-out data; binary adds ROC-AUC (None if single-class)."""
    kind = task_kind or model.task_kind
    x, y = test
    out = predict(model, np.asarray(x, dtype=np.float64))
    if kind == "regression":
        return {"mse": metrics.mse(out.reshape(-1), np.asarray(y, dtype=np.float64).reshape(-1))}
    if kind == "binary_classification":
        z = out[:, 0]
        auc = metrics.roc_auc(z, np.asarray(y))
        if auc is None:
            LOGGER.info("test split has a single class, AUC excluded")
        return {"cross_entropy": metrics.cross_entropy(z, y), "roc_auc": auc}
    return {"cross_entropy": metrics.cross_entropy(out, np.asarray(y))}


def aggregate_scores(per_seed: list[dict]) -> dict:
    """Mean and population std per metric across seeds; None scores drop out.

    Std uses the population convention (divide by the number of seeds), which
    for three seeds {0.6, 0.7, 0.8} gives 0.0816.
    """
    keys = sorted({k for d in per_seed for k in d})
    out = {}
    for k in keys:
        vals = [d[k] for d in per_seed if d.get(k) is not None]
        dropped = sum(1 for d in per_seed if k in d and d[k] is None)
        if dropped:
            LOGGER.info("metric %s: %d undefined seed scores excluded", k, dropped)
        if not vals:
            out[k] = {"mean": None, "std": None, "n": 0}
            continue
        arr = np.asarray(vals, dtype=np.float64)
        out[k] = {"mean": float(arr.mean()), "std": float(arr.std()), "n": len(vals)}
    return out


def write_history_json(result: TrainResult, path) -> None:
    doc = {
        "best_epoch": result.best_epoch,
        "best_valid_loss": result.best_valid_loss,
        "history": [{"train": t, "valid": v} for t, v in result.history],
    }
    Path(path).write_text(json.dumps(doc, sort_keys=True, indent=1) + "\n")


# -- snapshot storage (reuses the embedding container format) -----------------


def save_probe(model: ProbeModel, path) -> None:
    flat = np.concatenate(
        [w.reshape(-1) for w in model.weights] + [b.reshape(-1) for b in model.biases]
    )
    meta = {
        "task_kind": model.task_kind,
        "weight_shapes": [list(w.shape) for w in model.weights],
    }
    save_embeddings(
        EmbeddingMatrix(
            values=flat[None, :],
            level="graph",
            layer_index=len(model.weights),
            alignment=np.zeros(1, dtype=np.int64),
            provenance=json.dumps(meta, sort_keys=True),
        ),
        path,
    )


def load_probe(path) -> ProbeModel:
    m = load_embeddings(path)
    meta = json.loads(m.provenance)
    flat = m.values[0]
    weights = []
    biases = []
    off = 0
    for shape in meta["weight_shapes"]:
        size = shape[0] * shape[1]
        weights.append(flat[off : off + size].reshape(shape).copy())
        off += size
    for shape in meta["weight_shapes"]:
        size = shape[1]
        biases.append(flat[off : off + size].copy())
        off += size
    if off != flat.shape[0]:
        raise ValueError("probe snapshot size mismatch")
    return ProbeModel(weights=weights, biases=biases, task_kind=meta["task_kind"])
