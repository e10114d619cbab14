"""Two-layer softmax classifier over frozen embeddings.

forward(x) = softmax(relu(x W1 + b1) W2 + b2), trained with mini-batch
Adam on cross-entropy. Training never mutates the input model; it returns
a new one, which keeps weight-transfer provenance checkable bit-for-bit.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ArgumentError, NumericError

LOG_CLAMP = 1e-12


@dataclass(frozen=True)
class ClassifierModel:
    W1: np.ndarray  # d x h
    b1: np.ndarray  # h
    W2: np.ndarray  # h x c
    b2: np.ndarray  # c
    seed: int = 0
    profile_name: str = ""

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            arr = np.asarray(getattr(self, name), dtype=np.float64)
            if not np.isfinite(arr).all():
                raise ArgumentError(f"non-finite values in {name}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.W1.shape[1] != self.b1.shape[0] or self.W2.shape[0] != self.W1.shape[1]:
            raise ArgumentError("hidden dimensions disagree")
        if self.W2.shape[1] != self.b2.shape[0]:
            raise ArgumentError("output dimensions disagree")
        if self.c < 2:
            raise ArgumentError(f"class count must be >= 2, got {self.c}")
        if self.h < 1:
            raise ArgumentError("hidden size must be >= 1")

    @property
    def d(self) -> int:
        return self.W1.shape[0]

    @property
    def h(self) -> int:
        return self.W1.shape[1]

    @property
    def c(self) -> int:
        return self.W2.shape[1]

    def to_dict(self) -> dict:
        return {
            "d": self.d,
            "h": self.h,
            "c": self.c,
            "W1": self.W1.ravel().tolist(),
            "b1": self.b1.tolist(),
            "W2": self.W2.ravel().tolist(),
            "b2": self.b2.tolist(),
            "seed": self.seed,
            "profile_name": self.profile_name,
        }

    @staticmethod
    def from_dict(data: dict) -> "ClassifierModel":
        d, h, c = data["d"], data["h"], data["c"]
        return ClassifierModel(
            W1=np.array(data["W1"], dtype=np.float64).reshape(d, h),
            b1=np.array(data["b1"], dtype=np.float64),
            W2=np.array(data["W2"], dtype=np.float64).reshape(h, c),
            b2=np.array(data["b2"], dtype=np.float64),
            seed=data.get("seed", 0),
            profile_name=data.get("profile_name", ""),
        )

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), sort_keys=True))

    @staticmethod
    def load(path: str | Path) -> "ClassifierModel":
        return ClassifierModel.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 3e-5
    epsilon: float = 1e-6
    batch_size: int = 64
    epochs: int = 10
    beta1: float = 0.9
    beta2: float = 0.999
    shuffle_seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ArgumentError("learning_rate must be positive")
        if not (0 <= self.beta1 < 1 and 0 <= self.beta2 < 1):
            raise ArgumentError("betas must lie in [0, 1)")
        if self.epsilon <= 0:
            raise ArgumentError("epsilon must be positive")
        if self.batch_size < 1 or self.epochs < 1:
            raise ArgumentError("batch_size and epochs must be >= 1")


@dataclass(frozen=True)
class TrainHistory:
    epoch_losses: tuple[float, ...]
    final_loss: float
    steps: int  # total Adam updates performed


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=(fan_in, fan_out))


def init_classifier(d: int, h: int, c: int, seed: int) -> ClassifierModel:
    """Uniform Glorot weights, zero biases; W1 is drawn before W2."""
    if d < 1 or h < 1:
        raise ArgumentError("d and h must be >= 1")
    if c < 2:
        raise ArgumentError("class count must be >= 2")
    rng = np.random.default_rng(seed)
    return ClassifierModel(
        W1=_glorot(rng, d, h),
        b1=np.zeros(h),
        W2=_glorot(rng, h, c),
        b2=np.zeros(c),
        seed=seed,
    )


def _check_batch(model: ClassifierModel, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch, dtype=np.float64)
    if batch.ndim != 2 or batch.shape[1] != model.d:
        raise ArgumentError(
            f"batch must be m x {model.d}, got shape {batch.shape}"
        )
    return batch


def _softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - logits.max(axis=1, keepdims=True)
    exps = np.exp(shifted)
    return exps / exps.sum(axis=1, keepdims=True)


def forward(model: ClassifierModel, batch: np.ndarray) -> np.ndarray:
    """Class probabilities for each row; rows sum to 1."""
    batch = _check_batch(model, batch)
    hidden = np.maximum(0.0, batch @ model.W1 + model.b1)
    return _softmax(hidden @ model.W2 + model.b2)


def cross_entropy(probs: np.ndarray, targets: np.ndarray) -> float:
    """Mean negative log-probability of the target class, clamped at 1e-12."""
    probs = np.asarray(probs, dtype=np.float64)
    targets = np.asarray(targets, dtype=np.int64)
    if probs.ndim != 2 or targets.shape != (probs.shape[0],):
        raise ArgumentError("need m x c probabilities and m targets")
    if targets.size and (targets.min() < 0 or targets.max() >= probs.shape[1]):
        raise ArgumentError("target class out of range")
    picked = probs[np.arange(probs.shape[0]), targets]
    return float(-np.mean(np.log(np.maximum(picked, LOG_CLAMP))))


def _loss_and_grads(model, X, y):
    """Cross-entropy plus analytic gradients for all four parameters."""
    m = X.shape[0]
    z1 = X @ model.W1 + model.b1
    hidden = np.maximum(0.0, z1)
    probs = _softmax(hidden @ model.W2 + model.b2)
    loss = cross_entropy(probs, y)
    dlogits = probs.copy()
    dlogits[np.arange(m), y] -= 1.0
    dlogits /= m
    gW2 = hidden.T @ dlogits
    gb2 = dlogits.sum(axis=0)
    dhidden = (dlogits @ model.W2.T) * (z1 > 0.0)
    gW1 = X.T @ dhidden
    gb1 = dhidden.sum(axis=0)
    return loss, (gW1, gb1, gW2, gb2)


def train(
    model: ClassifierModel, X: np.ndarray, y: np.ndarray, cfg: TrainConfig
) -> tuple[ClassifierModel, TrainHistory]:
    """Mini-batch Adam on cross-entropy with per-epoch shuffling.

    Deterministic for fixed (model, X, y, cfg). Raises NumericError with
    the epoch index if the loss stops being finite.
    """
    X = _check_batch(model, X)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[0] == 0:
        raise ArgumentError("empty training data")
    if y.shape != (X.shape[0],):
        raise ArgumentError("one target per row required")
    if y.min() < 0 or y.max() >= model.c:
        raise ArgumentError("target class out of range")

    params = [
        np.array(model.W1), np.array(model.b1),
        np.array(model.W2), np.array(model.b2),
    ]
    first = [np.zeros_like(p) for p in params]
    second = [np.zeros_like(p) for p in params]
    shuffle_rng = np.random.default_rng(cfg.shuffle_seed)
    n = X.shape[0]
    step = 0
    epoch_losses = []
    current = model
    for epoch in range(cfg.epochs):
        order = shuffle_rng.permutation(n)
        epoch_total = 0.0
        for start in range(0, n, cfg.batch_size):
            batch_idx = order[start : start + cfg.batch_size]
            with np.errstate(over="ignore", invalid="ignore"):
                loss, grads = _loss_and_grads(current, X[batch_idx], y[batch_idx])
                if not np.isfinite(loss):
                    raise NumericError(f"non-finite loss at epoch {epoch}")
                epoch_total += loss * len(batch_idx)
                step += 1
                for i, grad in enumerate(grads):
                    first[i] = cfg.beta1 * first[i] + (1 - cfg.beta1) * grad
                    second[i] = cfg.beta2 * second[i] + (1 - cfg.beta2) * grad**2
                    m_hat = first[i] / (1 - cfg.beta1**step)
                    v_hat = second[i] / (1 - cfg.beta2**step)
                    params[i] = params[i] - cfg.learning_rate * m_hat / (
                        np.sqrt(v_hat) + cfg.epsilon
                    )
            if not all(np.isfinite(p).all() for p in params):
                raise NumericError(f"non-finite parameter update at epoch {epoch}")
            current = replace(
                model, W1=params[0], b1=params[1], W2=params[2], b2=params[3]
            )
        epoch_losses.append(epoch_total / n)
    history = TrainHistory(
        epoch_losses=tuple(epoch_losses),
        final_loss=epoch_losses[-1],
        steps=step,
    )
    return current, history


def predict(model: ClassifierModel, X: np.ndarray) -> np.ndarray:
    """Row-wise argmax of forward; ties break to the lowest class index."""
    return np.argmax(forward(model, X), axis=1)


def transfer_init(
    source: ClassifierModel, new_class_count: int, seed: int
) -> ClassifierModel:
    """Carry the hidden layer, re-draw the output layer for a new label space.

    W1/b1 are copied bit-exactly; W2/b2 are freshly initialized for
    `new_class_count` classes. This mirrors replacing a classifier head
    when moving from pseudo-classes to real classes.
    """
    if new_class_count < 2:
        raise ArgumentError("class count must be >= 2")
    rng = np.random.default_rng(seed)
    return ClassifierModel(
        W1=np.array(source.W1),
        b1=np.array(source.b1),
        W2=_glorot(rng, source.h, new_class_count),
        b2=np.zeros(new_class_count),
        seed=seed,
        profile_name=source.profile_name,
    )
