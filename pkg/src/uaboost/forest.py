"""Weighted random-forest regressor with infinitesimal-jackknife uncertainty."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional, Union

import numba
import numpy as np

from .core import (
    SIGMA_FLOOR,
    InsufficientData,
    NotFitted,
    ProbabilisticPrediction,
    ShapeMismatch,
)


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 300
    min_samples_leaf: int = 5
    max_depth: Optional[int] = None
    max_features: Union[float, str] = 1.0 / 3.0
    seed: int = 0
    n_jobs: int = 1

    def __post_init__(self):
        if self.n_trees < 2:
            raise ValueError("n_trees must be >= 2 for the jackknife covariance")
        if self.min_samples_leaf < 1:
            raise ValueError("min_samples_leaf must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive")
        if self.max_features != "all" and not 0 < float(self.max_features) <= 1:
            raise ValueError("max_features must be a fraction in (0, 1] or 'all'")

    def n_split_features(self, n_features: int) -> int:
        if self.max_features == "all":
            return n_features
        return max(1, int(float(self.max_features) * n_features))


@numba.njit(nogil=True, cache=True)
def _build_tree(x, y, sw, cnt, max_features, min_leaf, max_depth, seed):
    np.random.seed(seed)
    n_features = x.shape[1]
    idx = np.flatnonzero(cnt > 0)
    n_in = idx.size
    cap = 2 * n_in + 1
    feature = np.full(cap, -1, dtype=np.int64)
    threshold = np.zeros(cap)
    left = np.full(cap, -1, dtype=np.int64)
    right = np.full(cap, -1, dtype=np.int64)
    value = np.zeros(cap)
    buf = np.empty(n_in, dtype=np.int64)

    stack = np.empty((cap, 4), dtype=np.int64)  # start, end, depth, node
    stack[0, 0] = 0
    stack[0, 1] = n_in
    stack[0, 2] = 0
    stack[0, 3] = 0
    top = 1
    n_nodes = 1
    while top > 0:
        top -= 1
        start, end, depth, node = stack[top, 0], stack[top, 1], stack[top, 2], stack[top, 3]
        w_tot = 0.0
        wy_tot = 0.0
        c_tot = 0
        y_min = np.inf
        y_max = -np.inf
        for p in range(start, end):
            i = idx[p]
            w_tot += sw[i]
            wy_tot += sw[i] * y[i]
            c_tot += cnt[i]
            y_min = min(y_min, y[i])
            y_max = max(y_max, y[i])
        value[node] = wy_tot / w_tot
        if c_tot < 2 * min_leaf or (max_depth >= 0 and depth >= max_depth) or y_min == y_max:
            continue

        n = end - start
        seg = idx[start:end]
        perm = np.random.permutation(n_features)
        best_proxy = -np.inf
        best_f = -1
        best_t = 0.0
        visited = 0
        for fi in range(n_features):
            if visited >= max_features:
                break
            f = perm[fi]
            vals = np.empty(n)
            for p in range(n):
                vals[p] = x[seg[p], f]
            order = np.argsort(vals, kind="mergesort")
            if vals[order[0]] == vals[order[n - 1]]:
                continue
            visited += 1
            wl = 0.0
            wyl = 0.0
            cl = 0
            for p in range(n - 1):
                i = seg[order[p]]
                wl += sw[i]
                wyl += sw[i] * y[i]
                cl += cnt[i]
                a = vals[order[p]]
                b = vals[order[p + 1]]
                if a == b or cl < min_leaf or c_tot - cl < min_leaf:
                    continue
                wr = w_tot - wl
                if wl <= 0.0 or wr <= 0.0:
                    continue
                wyr = wy_tot - wyl
                proxy = wyl * wyl / wl + wyr * wyr / wr
                if proxy > best_proxy:
                    best_proxy = proxy
                    best_f = f
                    t = 0.5 * (a + b)
                    best_t = a if t >= b else t
        if best_f < 0:
            continue

        n_left = 0
        for p in range(start, end):
            if x[idx[p], best_f] <= best_t:
                buf[n_left] = idx[p]
                n_left += 1
        k = n_left
        for p in range(start, end):
            if x[idx[p], best_f] > best_t:
                buf[k] = idx[p]
                k += 1
        for p in range(n):
            idx[start + p] = buf[p]

        feature[node] = best_f
        threshold[node] = best_t
        left[node] = n_nodes
        right[node] = n_nodes + 1
        stack[top, 0] = start
        stack[top, 1] = start + n_left
        stack[top, 2] = depth + 1
        stack[top, 3] = n_nodes
        stack[top + 1, 0] = start + n_left
        stack[top + 1, 1] = end
        stack[top + 1, 2] = depth + 1
        stack[top + 1, 3] = n_nodes + 1
        top += 2
        n_nodes += 2
    return (feature[:n_nodes].copy(), threshold[:n_nodes].copy(), left[:n_nodes].copy(),
            right[:n_nodes].copy(), value[:n_nodes].copy())


@numba.njit(nogil=True, cache=True)
def _predict_tree(x, feature, threshold, left, right, value):
    out = np.empty(x.shape[0])
    for r in range(x.shape[0]):
        node = 0
        while feature[node] >= 0:
            if x[r, feature[node]] <= threshold[node]:
                node = left[node]
            else:
                node = right[node]
        out[r] = value[node]
    return out


@dataclass(frozen=True)
class RegressionTree:
    """Flat array form of a fitted CART tree; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size

    @property
    def n_leaves(self) -> int:
        return int(np.sum(self.feature < 0))

    def predict(self, x) -> np.ndarray:
        x = np.ascontiguousarray(x, dtype=float)
        return _predict_tree(x, self.feature, self.threshold, self.left, self.right, self.value)

    def apply_leaf_counts(self, x, counts) -> np.ndarray:
        """Total bootstrap count of training rows ``x`` per node they reach as a leaf."""
        x = np.ascontiguousarray(x, dtype=float)
        totals = np.zeros(self.n_nodes, dtype=np.int64)
        for r in range(x.shape[0]):
            node = 0
            while self.feature[node] >= 0:
                node = self.left[node] if x[r, self.feature[node]] <= self.threshold[node] else self.right[node]
            totals[node] += counts[r]
        return totals


def fit_tree(x, y, sample_weight, counts, max_features, min_samples_leaf=5, max_depth=None, seed=0) -> RegressionTree:
    """Grow one tree on rows weighted by ``counts * sample_weight``."""
    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    counts = np.ascontiguousarray(counts, dtype=np.int64)
    sw = counts.astype(float) if sample_weight is None else counts * np.asarray(sample_weight, dtype=float)
    arrays = _build_tree(x, y, sw, counts, int(max_features), int(min_samples_leaf),
                         -1 if max_depth is None else int(max_depth), int(seed))
    return RegressionTree(*arrays)


def bootstrap_counts(n: int, n_trees: int, seed: int):
    """Per-tree bootstrap inclusion counts and split-sampling seeds."""
    children = np.random.SeedSequence(seed).spawn(n_trees)
    counts = np.empty((n_trees, n), dtype=np.int64)
    tree_seeds = np.empty(n_trees, dtype=np.int64)
    for b, child in enumerate(children):
        rng = np.random.default_rng(child)
        counts[b] = np.bincount(rng.integers(0, n, size=n), minlength=n)
        tree_seeds[b] = int(rng.integers(0, 2**31 - 1))
    return counts, tree_seeds


def ij_variance_from_trees(counts: np.ndarray, tree_preds: np.ndarray, bias_correction: bool = True,
                           floor: bool = True) -> np.ndarray:
    """Bias-corrected infinitesimal-jackknife variance of the forest mean.

    Parameters
    ----------
    counts : ndarray of shape (n_trees, n_train)
        Bootstrap inclusion counts.
    tree_preds : ndarray of shape (n_trees, n_query)
        Per-tree predictions at the query points.

    bias_correction : bool
        Subtract the Monte-Carlo noise term ``n_train / n_trees**2 * sum_b (t_b - t_mean)**2``.
    floor : bool
        Clip negative estimates to zero.

    Returns
    -------
    ndarray of shape (n_query,)
    """
    n_trees, n_train = counts.shape
    c = counts - counts.mean(axis=0)
    t = tree_preds - tree_preds.mean(axis=0)
    out = np.empty(tree_preds.shape[1])
    for lo in range(0, out.size, 256):
        cov = c.T @ t[:, lo:lo + 256] / n_trees
        out[lo:lo + 256] = np.sum(cov**2, axis=0)
    if bias_correction:
        out -= n_train / n_trees**2 * np.sum(t**2, axis=0)
    return np.maximum(out, 0.0) if floor else out


class RandomForest:
    """Bagged CART regressor whose sigma comes from the infinitesimal jackknife.

    Boosting weights scale each sample's contribution to the split criterion
    and leaf means; bootstrap resampling is unaffected by them.
    """

    def __init__(self, config: ForestConfig = ForestConfig()):
        self.config = config
        self.trees_ = None

    def fit(self, x, y, sample_weight=None, bootstrap=None):
        x = np.ascontiguousarray(x, dtype=float)
        y = np.ascontiguousarray(y, dtype=float).ravel()
        n = x.shape[0]
        if y.size != n:
            raise ShapeMismatch(f"{n} rows vs {y.size} targets")
        if n < 2:
            raise InsufficientData("a forest needs at least two samples")
        if sample_weight is not None:
            sample_weight = np.asarray(sample_weight, dtype=float).ravel()
            if sample_weight.size != n:
                raise ShapeMismatch(f"{sample_weight.size} weights for {n} rows")
        cfg = self.config
        counts, seeds = bootstrap_counts(n, cfg.n_trees, cfg.seed)
        if bootstrap is not None:
            counts = np.asarray(bootstrap, dtype=np.int64)
            if counts.shape != (cfg.n_trees, n):
                raise ShapeMismatch(f"bootstrap counts must have shape {(cfg.n_trees, n)}")
        k = cfg.n_split_features(x.shape[1])

        def grow(b):
            return fit_tree(x, y, sample_weight, counts[b], k, cfg.min_samples_leaf, cfg.max_depth, seeds[b])

        if cfg.n_jobs > 1:
            with ThreadPoolExecutor(cfg.n_jobs) as pool:
                trees = list(pool.map(grow, range(cfg.n_trees)))
        else:
            trees = [grow(b) for b in range(cfg.n_trees)]
        self.trees_ = trees
        self.bootstrap_counts_ = counts
        self.n_features_ = x.shape[1]
        self._train_x = x
        self._train_y = y
        return self

    def _check(self, x) -> np.ndarray:
        if self.trees_ is None:
            raise NotFitted("forest is not fitted")
        x = np.ascontiguousarray(x, dtype=float)
        if x.ndim == 1:
            x = x.reshape(1, -1)
        if x.shape[1] != self.n_features_:
            raise ShapeMismatch(f"expected {self.n_features_} features, got {x.shape[1]}")
        return x

    def tree_predictions(self, x) -> np.ndarray:
        x = self._check(x)
        return np.vstack([t.predict(x) for t in self.trees_]) if x.shape[0] else np.empty((len(self.trees_), 0))

    def predict_mean(self, x) -> np.ndarray:
        return self.tree_predictions(x).mean(axis=0)

    def ij_variances(self, x) -> np.ndarray:
        return ij_variance_from_trees(self.bootstrap_counts_, self.tree_predictions(x))

    def ij_variance(self, x_query) -> float:
        return float(self.ij_variances(np.asarray(x_query, dtype=float).reshape(1, -1))[0])

    def predict(self, x) -> ProbabilisticPrediction:
        preds = self.tree_predictions(x)
        var = ij_variance_from_trees(self.bootstrap_counts_, preds)
        return ProbabilisticPrediction(preds.mean(axis=0), np.sqrt(var) + SIGMA_FLOOR)

    def oob_prediction(self) -> np.ndarray:
        """Out-of-bag mean prediction per training row (NaN if always in bag)."""
        preds = self.tree_predictions(self._train_x)
        oob = self.bootstrap_counts_ == 0
        n_oob = oob.sum(axis=0)
        with np.errstate(invalid="ignore"):
            return np.where(n_oob > 0, (preds * oob).sum(axis=0) / n_oob, np.nan)

    def validation_rmse(self) -> float:
        """Out-of-bag RMSE, a leakage-free score for ordering modalities."""
        oob = self.oob_prediction()
        ok = np.isfinite(oob)
        return float(np.sqrt(np.mean((oob[ok] - self._train_y[ok]) ** 2)))
