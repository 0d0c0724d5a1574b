"""Softmax cross-entropy, Adam, and the full-batch training loop."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import ForwardContext, ModelParams, backward, forward, init_params, model_kind

LR_GRID = (1e-3, 1e-2, 1e-1)
WD_GRID = (0.0, 1e-5, 5e-4)


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, loss: float):
        super().__init__(f"non-finite loss {loss} at epoch {epoch}")
        self.epoch = epoch
        self.loss = loss


def _mask_index(mask, n: int) -> np.ndarray:
    idx = np.asarray(mask)
    if idx.dtype == bool:
        idx = np.flatnonzero(idx)
    idx = idx.astype(np.int64)
    if idx.size == 0:
        raise ValueError("mask is empty")
    if idx.min() < 0 or idx.max() >= n:
        raise IndexError("mask index out of range")
    return idx


def cross_entropy(logits, labels, mask) -> tuple[float, np.ndarray]:
    """Mean -log softmax over masked rows, and its gradient w.r.t. the logits."""
    logits = np.asarray(logits, dtype=np.float64)
    idx = _mask_index(mask, logits.shape[0])
    Z = logits[idx]
    Z = Z - Z.max(axis=1, keepdims=True)
    logsum = np.log(np.exp(Z).sum(axis=1))
    y = np.asarray(labels)[idx]
    m = idx.shape[0]
    loss = float(np.mean(logsum - Z[np.arange(m), y]))
    probs = np.exp(Z - logsum[:, None])
    probs[np.arange(m), y] -= 1.0
    G = np.zeros_like(logits)
    G[idx] = probs / m
    return loss, G


def accuracy(logits, labels, mask) -> float:
    # np.argmax returns the first maximum, i.e. the lowest class index on ties
    logits = np.asarray(logits)
    idx = _mask_index(mask, logits.shape[0])
    return float(np.mean(np.argmax(logits[idx], axis=1) == np.asarray(labels)[idx]))


@dataclass
class TrainConfig:
    lr: float = 1e-2
    weight_decay: float = 0.0
    epochs: int = 1000
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError("lr must be positive")
        if self.weight_decay < 0:
            raise ValueError("weight_decay must be nonnegative")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(state: AdamState, params: dict, grads: dict, cfg: TrainConfig) -> None:
    """In-place Adam update of ``params``; weight decay is added to the gradient (L2 style)."""
    state.t += 1
    b1, b2 = cfg.adam_beta1, cfg.adam_beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, theta in params.items():
        g = grads[name]
        if cfg.weight_decay:
            g = g + cfg.weight_decay * theta
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(theta)
            state.v[name] = np.zeros_like(theta)
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        theta -= cfg.lr * (m / c1) / (np.sqrt(v / c2) + cfg.adam_eps)


@dataclass
class RunResult:
    test_accuracy: float
    val_accuracy: float
    best_epoch: int
    loss_trace: list[float]
    val_trace: list[float] = field(default_factory=list)


def train_run(kind: str, ctx: ForwardContext, labels, split, cfg: TrainConfig,
              params: ModelParams | None = None, *, num_classes: int | None = None,
              hidden: int = 64) -> RunResult:
    """Full-batch Adam on ``split.train``; report test accuracy at the best validation epoch.

    Epochs are numbered from 1 and evaluated after their update. Test accuracy is only
    computed when validation strictly improves, so ties keep the earliest epoch. With an
    empty validation set the last epoch is reported. ``params=None`` initialises from
    ``cfg.seed``.
    """
    kind = model_kind(kind)
    labels = np.asarray(labels)
    if params is None:
        C = int(labels.max()) + 1 if num_classes is None else num_classes
        params = init_params(kind, ctx.X.shape[1], C, cfg.seed, hidden=hidden,
                             system=ctx.system, kernel=ctx.kernel)
    else:
        params = params.copy()
    arrays = params.arrays()
    state = AdamState()
    has_val = len(split.val) > 0
    best_val, best_test, best_epoch = -1.0, float("nan"), 0
    losses, vals = [], []
    logits = forward(kind, params, ctx)
    for epoch in range(1, cfg.epochs + 1):
        loss, G = cross_entropy(logits, labels, split.train)
        if not np.isfinite(loss):
            raise TrainingDiverged(epoch, loss)
        losses.append(loss)
        adam_step(state, arrays, backward(kind, params, ctx, G), cfg)

        logits = forward(kind, params, ctx)
        if not np.all(np.isfinite(logits)):
            raise TrainingDiverged(epoch, float("nan"))
        if has_val:
            va = accuracy(logits, labels, split.val)
            vals.append(va)
            if va > best_val:
                best_val, best_epoch = va, epoch
                best_test = accuracy(logits, labels, split.test)
        elif epoch == cfg.epochs:
            best_val, best_epoch = float("nan"), epoch
            best_test = accuracy(logits, labels, split.test)
    return RunResult(test_accuracy=best_test, val_accuracy=best_val,
                     best_epoch=best_epoch, loss_trace=losses, val_trace=vals)
