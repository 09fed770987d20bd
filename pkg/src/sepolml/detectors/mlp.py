"""Softmax multilayer perceptron trained with momentum mini-batch SGD."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..dataset import N_LABELS
from .base import NonFiniteLoss, Standardizer, TrainedModel, check_degenerate, one_hot


@dataclass(frozen=True)
class MLPConfig:
    hidden: tuple[int, ...] = (64,)
    activation: str = "relu"
    epochs: int = 200
    batch: int = 16
    lr: float = 0.01
    momentum: float = 0.9
    seed: int = 42

    def __post_init__(self):
        if self.activation != "relu":
            raise ValueError("only relu is supported")
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))


def init_params(sizes, rng: np.random.Generator) -> list[tuple[np.ndarray, np.ndarray]]:
    """Glorot-uniform weights, zero biases."""
    params = []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        params.append((rng.uniform(-limit, limit, size=(fan_in, fan_out)), np.zeros(fan_out)))
    return params


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, X):
    """Activations of every layer; the last entry is the softmax output."""
    acts = [X]
    h = X
    for i, (W, b) in enumerate(params):
        z = h @ W + b
        h = softmax(z) if i == len(params) - 1 else np.maximum(z, 0.0)
        acts.append(h)
    return acts


def loss_and_grads(params, X, y):
    """Mean cross-entropy over the batch and its gradient for every (W, b)."""
    acts = forward(params, X)
    probs = acts[-1]
    n = len(X)
    loss = -float(np.mean(np.log(np.clip(probs[np.arange(n), y], 1e-300, None))))
    delta = (probs - one_hot(y, probs.shape[1])) / n
    grads = [None] * len(params)
    for i in range(len(params) - 1, -1, -1):
        W, _ = params[i]
        grads[i] = (acts[i].T @ delta, delta.sum(axis=0))
        if i > 0:
            delta = (delta @ W.T) * (acts[i] > 0)
    return loss, grads


class MLP(TrainedModel):
    kind = "mlp"

    def __init__(self, params, standardizer: Standardizer, label_set, training_seed, config: MLPConfig):
        super().__init__(len(standardizer.mean), label_set, training_seed)
        self.params = [(np.asarray(W, dtype=np.float64), np.asarray(b, dtype=np.float64)) for W, b in params]
        self.standardizer = standardizer
        self.config = config

    def _scores(self, X):
        return forward(self.params, self.standardizer.transform(X))[-1]

    def to_dict(self):
        cfg = {**self.config.__dict__, "hidden": list(self.config.hidden)}
        return {
            **self._header(),
            "config": cfg,
            "layers": [{"W": W.tolist(), "b": b.tolist()} for W, b in self.params],
            "standardizer": self.standardizer.to_dict(),
        }

    @classmethod
    def from_dict(cls, d):
        cfg = dict(d["config"])
        cfg["hidden"] = tuple(cfg["hidden"])
        m = cls(
            [(np.array(layer["W"]), np.array(layer["b"])) for layer in d["layers"]],
            Standardizer.from_dict(d["standardizer"]), d["label_set"], d["training_seed"],
            MLPConfig(**cfg),
        )
        m.degenerate = d.get("degenerate", False)
        return m


def train_mlp(X, y, cfg: MLPConfig = MLPConfig()) -> MLP:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    std = Standardizer.fit(X)
    Z = std.transform(X)
    rng = np.random.default_rng(cfg.seed)
    params = init_params([Z.shape[1], *cfg.hidden, N_LABELS], rng)
    velocity = [(np.zeros_like(W), np.zeros_like(b)) for W, b in params]
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(Z))
        for start in range(0, len(Z), cfg.batch):
            batch = order[start:start + cfg.batch]
            loss, grads = loss_and_grads(params, Z[batch], y[batch])
            if not np.isfinite(loss):
                raise NonFiniteLoss(f"loss became {loss} at epoch {epoch}, batch offset {start}")
            new_params, new_velocity = [], []
            for (W, b), (vW, vb), (gW, gb) in zip(params, velocity, grads):
                vW = cfg.momentum * vW - cfg.lr * gW
                vb = cfg.momentum * vb - cfg.lr * gb
                new_params.append((W + vW, b + vb))
                new_velocity.append((vW, vb))
            params, velocity = new_params, new_velocity
    model = MLP(params, std, np.unique(y), cfg.seed, cfg)
    model.degenerate = check_degenerate(X, y)
    return model


def gradient_check(params, X, y, eps: float = 1e-4) -> float:
    """Largest relative error between analytic and central-difference gradients.

    The error for each weight matrix or bias vector is
    ``||analytic - numeric|| / max(||analytic||, ||numeric||, 1e-12)``.
    """
    params = [(W.copy(), b.copy()) for W, b in params]
    _, grads = loss_and_grads(params, X, y)
    worst = 0.0
    for layer, (gW, gb) in enumerate(grads):
        for slot, analytic in ((0, gW), (1, gb)):
            target = params[layer][slot]
            numeric = np.zeros_like(target)
            for idx in np.ndindex(target.shape):
                old = target[idx]
                target[idx] = old + eps
                plus, _ = loss_and_grads(params, X, y)
                target[idx] = old - eps
                minus, _ = loss_and_grads(params, X, y)
                target[idx] = old
                numeric[idx] = (plus - minus) / (2 * eps)
            scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
            worst = max(worst, float(np.linalg.norm(analytic - numeric) / scale))
    return worst
