"""Gaussian-output multilayer perceptron trained on weighted Gaussian NLL."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core import (
    SIGMA_FLOOR,
    DegenerateUncertainty,
    DivergedTraining,
    NotFitted,
    ProbabilisticPrediction,
    ShapeMismatch,
)
from .data import Standardizer, train_val_split


@dataclass(frozen=True)
class MlpConfig:
    hidden_layer_sizes: tuple = (64, 32)
    learning_rate: float = 0.00125
    batch_size: int = 32
    max_epochs: int = 500
    patience: int = 50
    weight_decay: float = 1e-4
    val_fraction: float = 0.2
    seed: int = 0

    def __post_init__(self):
        if not self.hidden_layer_sizes or any(h < 1 for h in self.hidden_layer_sizes):
            raise ValueError("hidden_layer_sizes must be a non-empty list of positive ints")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1 or self.patience < 0:
            raise ValueError("batch_size and max_epochs must be >= 1, patience >= 0")
        object.__setattr__(self, "hidden_layer_sizes", tuple(int(h) for h in self.hidden_layer_sizes))


def softplus(s):
    return np.logaddexp(0.0, s)


def softplus_inv(v):
    v = np.asarray(v, dtype=float)
    return v + np.log(-np.expm1(-v))


def sigmoid(s):
    return 0.5 * (1.0 + np.tanh(0.5 * s))


def gaussian_nll(mu, sigma, y, w=None) -> float:
    """Weighted mean of ``log(sigma^2)/2 + (y - mu)^2 / (2 sigma^2)``."""
    mu, sigma, y = (np.asarray(a, dtype=float).ravel() for a in (mu, sigma, y))
    w = np.ones_like(y) if w is None else np.asarray(w, dtype=float).ravel()
    if not (mu.shape == sigma.shape == y.shape == w.shape):
        raise ShapeMismatch("mu, sigma, y and w must have equal lengths")
    if np.any(~(sigma >= SIGMA_FLOOR)):
        raise DegenerateUncertainty(f"sigma must be >= {SIGMA_FLOOR}")
    terms = np.log(sigma**2) / 2 + (y - mu) ** 2 / (2 * sigma**2)
    return float(np.mean(w * terms))


class Network:
    """Parameter layout of a tanh MLP with a two-output (mu, s) head.

    All weights and biases live in one flat vector; ``unpack`` returns
    ``[(W1, b1), ..., (W_out, b_out)]`` views into it.
    """

    def __init__(self, n_inputs: int, hidden: Sequence[int]):
        sizes = [n_inputs, *hidden, 2]
        self.shapes = [((a, b), (b,)) for a, b in zip(sizes[:-1], sizes[1:])]
        self.size = sum(a * b + b for (a, b), _ in self.shapes)

    def unpack(self, theta):
        layers, pos = [], 0
        for (a, b), _ in self.shapes:
            W = theta[pos:pos + a * b].reshape(a, b)
            pos += a * b
            layers.append((W, theta[pos:pos + b]))
            pos += b
        return layers

    def init(self, rng) -> np.ndarray:
        theta = np.zeros(self.size)
        layers = self.unpack(theta)
        for i, (W, _) in enumerate(layers):
            limit = np.sqrt(6.0 / sum(W.shape))
            if i == len(layers) - 1:
                limit *= 0.1
            W[...] = rng.uniform(-limit, limit, size=W.shape)
        return theta

    def forward(self, theta, x):
        layers = self.unpack(theta)
        acts = [x]
        h = x
        for W, b in layers[:-1]:
            h = np.tanh(h @ W + b)
            acts.append(h)
        W, b = layers[-1]
        out = h @ W + b
        return out[:, 0], out[:, 1], acts

    def predict(self, theta, x):
        mu, s, _ = self.forward(theta, x)
        return mu, softplus(s) + SIGMA_FLOOR

    def loss_and_grad(self, theta, x, y, w, weight_decay=0.0):
        """Weighted NLL (plus L2 on weight matrices) and its gradient."""
        layers = self.unpack(theta)
        mu, s, acts = self.forward(theta, x)
        sigma = softplus(s) + SIGMA_FLOOR
        r = y - mu
        n = y.size
        loss = np.mean(w * (np.log(sigma) + r**2 / (2 * sigma**2)))
        d_mu = -w * r / sigma**2 / n
        d_s = w * (1.0 / sigma - r**2 / sigma**3) * sigmoid(s) / n
        delta = np.column_stack([d_mu, d_s])

        grad = np.zeros_like(theta)
        glayers = self.unpack(grad)
        for i in range(len(layers) - 1, -1, -1):
            W, _ = layers[i]
            gW, gb = glayers[i]
            gW[...] = acts[i].T @ delta
            gb[...] = delta.sum(axis=0)
            if i > 0:
                delta = (delta @ W.T) * (1.0 - acts[i] ** 2)
        if weight_decay:
            for (W, _), (gW, _) in zip(layers, glayers):
                loss += 0.5 * weight_decay * np.sum(W**2)
                gW += weight_decay * W
        return loss, grad


class Adam:
    def __init__(self, size, lr, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(size)
        self.v = np.zeros(size)
        self.t = 0

    def step(self, theta, grad):
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        theta -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)


class GaussianMLP:
    """MLP base learner predicting a Gaussian mean and standard deviation.

    Inputs are standardized on the training rows; targets stay in their
    natural units. A ``val_fraction`` share of the rows is held out for early
    stopping and the parameters of the best validation epoch are kept.
    """

    def __init__(self, config: MlpConfig = MlpConfig()):
        self.config = config
        self.theta_ = None

    def fit(self, x, y, sample_weight=None):
        cfg = self.config
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, 1)
        y = np.asarray(y, dtype=float).ravel()
        n = x.shape[0]
        if y.size != n:
            raise ShapeMismatch(f"{n} rows vs {y.size} targets")
        w = np.ones(n) if sample_weight is None else np.asarray(sample_weight, dtype=float).ravel()
        if w.size != n:
            raise ShapeMismatch(f"{w.size} weights for {n} rows")
        rng = np.random.default_rng(cfg.seed)

        self.scaler_ = Standardizer.fit(x)
        z = self.scaler_.transform(x)
        if n >= 10:
            tr, va = train_val_split(n, cfg.val_fraction, seed=cfg.seed)
        else:
            tr, va = np.arange(n), np.arange(0)

        net = Network(x.shape[1], cfg.hidden_layer_sizes)
        theta = net.init(rng)
        head_b = net.unpack(theta)[-1][1]
        wt = w[tr] if w[tr].sum() > 0 else np.ones(tr.size)
        y_mean = np.average(y[tr], weights=wt)
        y_std = np.sqrt(np.average((y[tr] - y_mean) ** 2, weights=wt))
        head_b[0] = y_mean
        head_b[1] = softplus_inv(max(y_std, 1e-3))

        opt = Adam(net.size, cfg.learning_rate)
        best_theta, best_val, since_best = theta.copy(), np.inf, 0
        history = []
        epoch = 0
        for epoch in range(1, cfg.max_epochs + 1):
            order = tr[rng.permutation(tr.size)]
            total = 0.0
            for lo in range(0, order.size, cfg.batch_size):
                b = order[lo:lo + cfg.batch_size]
                loss, grad = net.loss_and_grad(theta, z[b], y[b], w[b], cfg.weight_decay)
                if not np.isfinite(loss) or not np.all(np.isfinite(grad)):
                    raise DivergedTraining(epoch)
                total += loss * b.size
                opt.step(theta, grad)
            train_nll = total / tr.size
            if va.size:
                mu, sig = net.predict(theta, z[va])
                val_nll = gaussian_nll(mu, sig, y[va], w[va])
                if not np.isfinite(val_nll):
                    raise DivergedTraining(epoch)
            else:
                val_nll = train_nll
            history.append((train_nll, val_nll))
            if val_nll < best_val:
                best_val, best_theta, since_best = val_nll, theta.copy(), 0
            else:
                since_best += 1
                if since_best >= cfg.patience:
                    break

        self.network_ = net
        self.theta_ = best_theta
        self.n_features_ = x.shape[1]
        self.n_epochs_ = epoch
        self.history_ = np.array(history)
        self.train_nll_ = float(history[-1][0])
        self.val_nll_ = float(best_val)
        self._val = (z[va], y[va])
        return self

    def predict(self, x) -> ProbabilisticPrediction:
        if self.theta_ is None:
            raise NotFitted("MLP is not fitted")
        x = np.asarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(-1, self.n_features_) if x.size else x.reshape(0, self.n_features_)
        if x.shape[1] != self.n_features_:
            raise ShapeMismatch(f"expected {self.n_features_} features, got {x.shape[1]}")
        mu, sigma = self.network_.predict(self.theta_, self.scaler_.transform(x))
        return ProbabilisticPrediction(mu, sigma)

    def validation_rmse(self) -> float:
        """RMSE on the held-out early-stopping rows, for ordering modalities."""
        zv, yv = self._val
        if yv.size == 0:
            return float("nan")
        mu, _ = self.network_.predict(self.theta_, zv)
        return float(np.sqrt(np.mean((mu - yv) ** 2)))
