"""Adam training with the stepped learning-rate decay, mini-batching,
validation-loss early stopping and the 4-fold cross-validation loop.

Every stochastic choice derives from the config seed (batch order reseeds
as seed+epoch), so a (config, dataset) pair reproduces its history and final
parameters bit for bit.
"""

from __future__ import annotations

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from .data import CdgdWindow
from .tensor import Tape, add_n, backward, cross_entropy, scale

__all__ = [
    "AdamState",
    "CrossValResult",
    "EpochStats",
    "TrainConfig",
    "TrainHistory",
    "adam_step",
    "cross_validate",
    "evaluate_windows",
    "history_to_csv",
    "lr_schedule",
    "train_fold",
]


@dataclass(frozen=True)
class TrainConfig:
    seed: int
    epochs: int = 1000
    batch_size: int = 200
    lr0: float = 0.01
    lr_decay: tuple[tuple[int, float], ...] = ((500, 0.001), (750, 0.0002))
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 50
    folds: int = 4

    def __post_init__(self):
        epochs_at = [e for e, _ in self.lr_decay]
        if epochs_at != sorted(set(epochs_at)):
            raise ValueError(f"decay epochs must be strictly increasing, got {epochs_at}")
        if self.patience < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "epochs": self.epochs,
            "batch_size": self.batch_size,
            "lr0": self.lr0,
            "lr_decay": [list(p) for p in self.lr_decay],
            "beta1": self.beta1,
            "beta2": self.beta2,
            "eps": self.eps,
            "patience": self.patience,
            "folds": self.folds,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        if "lr_decay" in d:
            d["lr_decay"] = tuple((int(e), float(lr)) for e, lr in d["lr_decay"])
        return cls(**d)


def lr_schedule(epoch: int, config: TrainConfig) -> float:
    """Piecewise-constant rate; each decay applies from its epoch onward."""
    if epoch < 0:
        raise ValueError(f"epoch must be >= 0, got {epoch}")
    lr = config.lr0
    for at, value in config.lr_decay:
        if epoch >= at:
            lr = value
    return lr


class AdamState:
    """First/second moment accumulators, one pair per named parameter."""

    def __init__(self):
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}
        self.t = 0


def adam_step(params, grads: dict[str, np.ndarray], state: AdamState, lr: float, config: TrainConfig) -> None:
    """One bias-corrected Adam update, in place on the parameter tensors."""
    state.t += 1
    b1, b2 = config.beta1, config.beta2
    bc1 = 1.0 - b1**state.t
    bc2 = 1.0 - b2**state.t
    for name, p in params:
        g = grads[name]
        if g.shape != p.data.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter {name} shape {p.data.shape}")
        if name not in state.m:
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        p.data -= lr * (m / bc1) / (np.sqrt(v / bc2) + config.eps)


@dataclass
class EpochStats:
    epoch: int
    loss: float
    val_accuracy: float
    val_loss: float
    lr: float
    seconds: float


@dataclass
class TrainHistory:
    rows: list[EpochStats] = field(default_factory=list)
    best_epoch: int = -1

    def __len__(self):
        return len(self.rows)


def evaluate_windows(model, windows: list[CdgdWindow]) -> tuple[float, float]:
    """(mean cross-entropy, accuracy) without touching any tape."""
    total, correct = 0.0, 0
    for w in windows:
        probs = model.predict_proba(w.values)
        total -= np.log(max(probs[w.label.code], 1e-12))
        if int(np.argmax(probs)) == w.label.code:
            correct += 1
    n = len(windows)
    return total / n, correct / n


def _batch_loss(model, batch: list[CdgdWindow]):
    losses = [cross_entropy(model.forward(w.values), w.label.code) for w in batch]
    return scale(add_n(losses), 1.0 / len(losses))


def train_fold(model, train_windows: list[CdgdWindow], val_windows: list[CdgdWindow], config: TrainConfig) -> TrainHistory:
    """Train until the epoch cap or `patience` epochs without a validation-loss
    improvement; the model is left holding the best-validation parameters."""
    if not train_windows:
        raise ValueError("empty training set")
    if not val_windows:
        raise ValueError("empty validation set")
    params = model.parameters()
    state = AdamState()
    history = TrainHistory()
    best_loss = np.inf
    best_snapshot = None
    stale = 0
    n = len(train_windows)
    for epoch in range(config.epochs):
        started = time.perf_counter()
        lr = lr_schedule(epoch, config)
        order = np.random.default_rng(config.seed + epoch).permutation(n)
        loss_sum = 0.0
        for lo in range(0, n, config.batch_size):
            batch = [train_windows[i] for i in order[lo:lo + config.batch_size]]
            with Tape() as tape:
                loss = _batch_loss(model, batch)
                backward(tape, loss)
            grads = {
                name: (p.grad if p.grad is not None else np.zeros_like(p.data)) for name, p in params
            }
            adam_step(params, grads, state, lr, config)
            loss_sum += loss.item() * len(batch)
        val_loss, val_acc = evaluate_windows(model, val_windows)
        history.rows.append(
            EpochStats(epoch, loss_sum / n, val_acc, val_loss, lr, time.perf_counter() - started)
        )
        if val_loss < best_loss:
            best_loss = val_loss
            best_snapshot = {name: p.data.copy() for name, p in params}
            history.best_epoch = epoch
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                break
    if best_snapshot is not None:
        for name, p in params:
            p.data[...] = best_snapshot[name]
    return history


@dataclass
class CrossValResult:
    fold_histories: list[TrainHistory]
    fold_val_accuracies: list[float]
    best_fold: int
    best_model: object
    best_val_accuracy: float

    def mean_curves(self) -> dict[str, list[float]]:
        """Arithmetic fold means per epoch, over the shortest common length."""
        n = min(len(h) for h in self.fold_histories)
        loss = [float(np.mean([h.rows[e].loss for h in self.fold_histories])) for e in range(n)]
        acc = [float(np.mean([h.rows[e].val_accuracy for h in self.fold_histories])) for e in range(n)]
        return {"loss": loss, "val_accuracy": acc}


def cross_validate(make_model, windows: list[CdgdWindow], plan, config: TrainConfig) -> CrossValResult:
    """Train one model per fold, validating on the held-out fold; the model
    with the best validation accuracy (ties to the lowest fold index) wins."""
    histories = []
    accuracies = []
    best = (-1.0, 0, None)
    for fold_index, fold in enumerate(plan.folds):
        val_set = set(fold)
        train_windows = [windows[i] for i in plan.train_indices if i not in val_set]
        val_windows = [windows[i] for i in fold]
        model = make_model(fold_index)
        history = train_fold(model, train_windows, val_windows, config)
        histories.append(history)
        _, val_acc = evaluate_windows(model, val_windows)
        accuracies.append(val_acc)
        if val_acc > best[0]:
            best = (val_acc, fold_index, model)
    return CrossValResult(histories, accuracies, best[1], best[2], best[0])


def history_to_csv(fold_histories: list[TrainHistory], path) -> None:
    """Export per-epoch traces as epoch,fold,loss,val_accuracy,lr."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["epoch", "fold", "loss", "val_accuracy", "lr"])
        for fold, history in enumerate(fold_histories):
            for row in history.rows:
                writer.writerow([row.epoch, fold, repr(row.loss), repr(row.val_accuracy), repr(row.lr)])
