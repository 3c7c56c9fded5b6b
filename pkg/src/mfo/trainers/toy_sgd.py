"""A real, tiny training loop: 2-8-4 tanh perceptron with momentum SGD on Gaussian blobs."""

from __future__ import annotations

import math

import numpy as np

from ..validation import check_int
from .base import Trainer

CENTERS = np.array([[3.0, 3.0], [-3.0, 3.0], [-3.0, -3.0], [3.0, -3.0]])


def sgd_momentum_step(theta, velocity, grad, lr, momentum, weight_decay):
    """``v <- mu v - lr (g + wd theta)``; ``theta <- theta + v``. Returns new arrays."""
    velocity = momentum * velocity - lr * (grad + weight_decay * theta)
    return theta + velocity, velocity


def make_blobs(n_points, seed, std=1.0):
    rng = np.random.default_rng(seed)
    y = np.arange(n_points) % len(CENTERS)
    rng.shuffle(y)
    X = CENTERS[y] + std * rng.standard_normal((n_points, 2))
    return X, y


class ToySGDTrainer(Trainer):
    kind = "toy_sgd"
    required = ("l", "w", "m", "b")

    def __init__(self, n_points=2000, n_holdout=500, hidden=8, data_seed=0):
        self.n_points = check_int(n_points, "n_points", minimum=2)
        self.n_holdout = check_int(n_holdout, "n_holdout", minimum=1)
        if self.n_holdout >= self.n_points:
            raise ValueError("n_holdout must be smaller than n_points")
        self.hidden = check_int(hidden, "hidden", minimum=1)
        self.data_seed = int(data_seed)
        X, y = make_blobs(self.n_points, self.data_seed)
        n_train = self.n_points - self.n_holdout
        self.X_train, self.y_train = X[:n_train], y[:n_train]
        self.X_val, self.y_val = X[n_train:], y[n_train:]
        self.n_classes = len(CENTERS)
        d, h, c = 2, self.hidden, self.n_classes
        self._shapes = [(d, h), (h,), (h, c), (c,)]
        self.n_params = sum(int(np.prod(s)) for s in self._shapes)

    def steps_per_epoch(self, config):
        return math.ceil(len(self.X_train) / int(config["b"]))

    def _unpack(self, theta):
        out, i = [], 0
        for shape in self._shapes:
            n = int(np.prod(shape))
            out.append(theta[i:i + n].reshape(shape))
            i += n
        return out

    def _init_state(self, state):
        rng = np.random.default_rng([state.seed, 0])
        parts = []
        for shape in self._shapes:
            if len(shape) == 2:
                parts.append(rng.standard_normal(shape).ravel() / math.sqrt(shape[0]))
            else:
                parts.append(np.zeros(shape))
        state.arrays["theta"] = np.concatenate(parts)
        state.arrays["velocity"] = np.zeros(self.n_params)
        state.scalars["diverged"] = False

    def loss_and_grad(self, theta, X, y):
        W1, b1, W2, b2 = self._unpack(theta)
        h = np.tanh(X @ W1 + b1)
        logits = h @ W2 + b2
        logits = logits - logits.max(axis=1, keepdims=True)
        p = np.exp(logits)
        p /= p.sum(axis=1, keepdims=True)
        n = len(y)
        loss = -np.mean(np.log(p[np.arange(n), y] + 1e-300))
        d_logits = p
        d_logits[np.arange(n), y] -= 1.0
        d_logits /= n
        dW2 = h.T @ d_logits
        db2 = d_logits.sum(axis=0)
        dh = (d_logits @ W2.T) * (1.0 - h * h)
        dW1 = X.T @ dh
        db1 = dh.sum(axis=0)
        return loss, np.concatenate([dW1.ravel(), db1, dW2.ravel(), db2])

    def _train_steps(self, state, lrs):
        cfg = state.config
        momentum, wd, b = 1.0 - cfg["m"], cfg["w"], int(cfg["b"])
        theta, velocity = state.arrays["theta"], state.arrays["velocity"]
        order = np.random.default_rng([state.seed, state.epochs_trained + 1]).permutation(len(self.X_train))
        with np.errstate(all="ignore"):
            for i, lr in enumerate(lrs):
                if state.scalars["diverged"]:
                    break
                idx = order[i * b:(i + 1) * b]
                loss, grad = self.loss_and_grad(theta, self.X_train[idx], self.y_train[idx])
                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    state.scalars["diverged"] = True
                    break
                theta, velocity = sgd_momentum_step(theta, velocity, grad, lr, momentum, wd)
                if not np.all(np.isfinite(theta)):
                    state.scalars["diverged"] = True
        state.arrays["theta"], state.arrays["velocity"] = theta, velocity

    def evaluate(self, state):
        if state.scalars["diverged"]:
            return 0.0
        W1, b1, W2, b2 = self._unpack(state.arrays["theta"])
        with np.errstate(all="ignore"):
            logits = np.tanh(self.X_val @ W1 + b1) @ W2 + b2
        if not np.all(np.isfinite(logits)):
            return 0.0
        return float(np.mean(logits.argmax(axis=1) == self.y_val))

    def to_spec(self):
        return {"kind": self.kind, "n_points": self.n_points, "n_holdout": self.n_holdout,
                "hidden": self.hidden, "data_seed": self.data_seed}
