"""Independent oracles and fixture writers shared by several test modules."""

import math

import numpy as np

from uaboost.core import normalize_weights
from uaboost.data import PARKINSONS_COLUMNS
from uaboost.mlp import Network


def write_fake_parkinsons(path, n=30, n_subjects=6, seed=0, columns=PARKINSONS_COLUMNS):
    rng = np.random.default_rng(seed)
    lines = [",".join(columns)]
    for i in range(n):
        row = []
        for c in columns:
            if c == "subject#":
                row.append(str(1 + i % n_subjects))
            elif c == "total_UPDRS":
                row.append(f"{rng.uniform(5, 55):.4f}")
            else:
                row.append(f"{rng.uniform(0, 1):.6f}")
        lines.append(",".join(row))
    path.write_text("\n".join(lines) + "\n")
    return path


def brute_force_ij(counts, tree_preds):
    """Direct double loop over training samples and trees."""
    B, N = counts.shape
    t_bar = math.fsum(tree_preds) / B
    v_hat = 0.0
    for i in range(N):
        n_bar = math.fsum(counts[:, i]) / B
        cov = math.fsum((counts[b, i] - n_bar) * (tree_preds[b] - t_bar) for b in range(B)) / B
        v_hat += cov * cov
    correction = N / B**2 * math.fsum((t - t_bar) ** 2 for t in tree_preds)
    return v_hat, v_hat - correction


def relative_gradient_error(net, theta, x, y, w, weight_decay, h=1e-5):
    _, analytic = net.loss_and_grad(theta, x, y, w, weight_decay)
    numeric = np.empty_like(theta)
    for i in range(theta.size):
        tp, tm = theta.copy(), theta.copy()
        tp[i] += h
        tm[i] -= h
        numeric[i] = (net.loss_and_grad(tp, x, y, w, weight_decay)[0]
                      - net.loss_and_grad(tm, x, y, w, weight_decay)[0]) / (2 * h)
    return np.linalg.norm(analytic - numeric) / max(np.linalg.norm(analytic), np.linalg.norm(numeric))


def random_network_case(seed):
    rng = np.random.default_rng(seed)
    n_layers = int(rng.integers(1, 4))
    hidden = [int(rng.integers(1, 9)) for _ in range(n_layers - 1)] or [int(rng.integers(1, 9))]
    n_in = int(rng.integers(1, 6))
    net = Network(n_in, hidden)
    theta = rng.normal(scale=0.7, size=net.size)
    x = rng.normal(size=(12, n_in))
    y = rng.normal(scale=2, size=12)
    w = normalize_weights(rng.uniform(0, 3, size=12))
    return net, theta, x, y, w
