"""Shared domain types, the base-learner protocol and the two fusion rules."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Protocol, Sequence, runtime_checkable

import numpy as np

SIGMA_FLOOR = 1e-6
WEIGHT_FLOOR = 1e-6


class UABoostError(Exception):
    """Base class for all library errors."""


class InvalidWeight(UABoostError, ValueError):
    pass


class ShapeMismatch(UABoostError, ValueError):
    pass


class DegenerateUncertainty(UABoostError, ValueError):
    pass


class NotFitted(UABoostError, RuntimeError):
    pass


class InsufficientData(UABoostError, ValueError):
    pass


class InvalidScore(UABoostError, ValueError):
    pass


class MissingModality(UABoostError, KeyError):
    pass


class DivergedTraining(UABoostError, RuntimeError):
    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")


class SchemaError(UABoostError, ValueError):
    def __init__(self, missing: Sequence[str], message: str = ""):
        self.missing = list(missing)
        super().__init__(message or f"missing columns: {', '.join(self.missing)}")


class ParseError(UABoostError, ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class EnsembleMode(str, enum.Enum):
    VANILLA = "vanilla"
    UA = "ua"
    UA_WEIGHTED = "ua-weighted"

    @classmethod
    def parse(cls, value: "str | EnsembleMode") -> "EnsembleMode":
        if isinstance(value, cls):
            return value
        return cls(str(value).lower())

    def __str__(self) -> str:
        return self.value


@dataclass(frozen=True)
class ModalityMatrix:
    """Feature matrix of a single modality, ``N`` rows by ``d`` columns."""

    modality_id: str
    values: np.ndarray
    feature_names: tuple = field(default=())

    def __post_init__(self):
        values = np.array(self.values, dtype=float)
        if values.ndim == 1:
            values = values.reshape(-1, 1)
        if values.ndim != 2 or values.shape[1] < 1:
            raise ShapeMismatch(f"{self.modality_id}: expected a 2-D matrix, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError(f"{self.modality_id}: matrix contains NaN or Inf")
        names = tuple(self.feature_names) or tuple(f"{self.modality_id}_{i}" for i in range(values.shape[1]))
        if len(names) != values.shape[1]:
            raise ShapeMismatch(f"{self.modality_id}: {len(names)} feature names for {values.shape[1]} columns")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "feature_names", names)

    @property
    def n_samples(self) -> int:
        return self.values.shape[0]

    @property
    def n_features(self) -> int:
        return self.values.shape[1]

    def take(self, indices) -> "ModalityMatrix":
        return ModalityMatrix(self.modality_id, self.values[np.asarray(indices)], self.feature_names)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self) -> int:
        return self.n_samples


@dataclass(frozen=True)
class ProbabilisticPrediction:
    """Per-sample Gaussian predictions: means and standard deviations."""

    means: np.ndarray
    sigmas: np.ndarray

    def __post_init__(self):
        means = np.array(self.means, dtype=float).ravel()
        sigmas = np.array(self.sigmas, dtype=float).ravel()
        if means.shape != sigmas.shape:
            raise ShapeMismatch(f"{means.size} means vs {sigmas.size} sigmas")
        if not np.all(np.isfinite(means)):
            raise ValueError("means must be finite")
        if np.any(~(sigmas >= SIGMA_FLOOR)):
            raise DegenerateUncertainty(f"sigmas must be >= {SIGMA_FLOOR}")
        means.setflags(write=False)
        sigmas.setflags(write=False)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "sigmas", sigmas)

    def __len__(self) -> int:
        return self.means.size

    def take(self, indices) -> "ProbabilisticPrediction":
        idx = np.asarray(indices)
        return ProbabilisticPrediction(self.means[idx], self.sigmas[idx])


@runtime_checkable
class BaseLearner(Protocol):
    """Anything fitted on one modality that predicts a Gaussian per sample.

    ``fit`` takes features, targets and per-sample loss weights and returns the
    fitted learner; ``predict`` raises :class:`NotFitted` before ``fit``.
    """

    def fit(self, x, y, sample_weight=None) -> "BaseLearner": ...

    def predict(self, x) -> ProbabilisticPrediction: ...


def normalize_weights(raw, weight_floor: float = WEIGHT_FLOOR) -> np.ndarray:
    """Rescale raw per-sample weights to mean one with a lower floor.

    The result is ``max(c * raw, weight_floor)`` with the scale ``c`` chosen
    so the mean is exactly one, so every output weight respects the floor and
    normalizing an already-normalized vector returns it unchanged.

    Parameters
    ----------
    raw : array-like of shape (n_samples,)
        Nonnegative raw weights, e.g. squared residuals or predicted sigmas.
    weight_floor : float
        Lower bound on every output weight.

    Returns
    -------
    ndarray of shape (n_samples,) with mean 1.
    """
    w = np.array(raw, dtype=float).ravel()
    if w.size == 0:
        raise InvalidWeight("weights must be non-empty")
    if not np.all(np.isfinite(w)):
        raise InvalidWeight("weights must be finite")
    if np.any(w < 0):
        raise InvalidWeight("weights must be nonnegative")
    if not 0 <= weight_floor < 1:
        raise InvalidWeight("weight_floor must lie in [0, 1)")
    n = w.size
    if not np.any(w > 0):
        return np.ones(n)
    w = w / w.max()  # avoids overflow of the scale for tiny (e.g. subnormal) raw weights
    r = np.sort(w)
    tail = np.cumsum(r[::-1])[::-1]  # tail[s] = sum of r[s:]
    c = n / tail[0]
    for s in range(n):
        if r[s] <= 0:
            continue
        c = (n - s * weight_floor) / tail[s]
        if r[s] * c >= weight_floor:
            break
    return np.maximum(c * w, weight_floor)


def _stack(preds: Sequence[ProbabilisticPrediction]):
    if len(preds) == 0:
        raise ShapeMismatch("need at least one prediction")
    sizes = {len(p) for p in preds}
    if len(sizes) != 1:
        raise ShapeMismatch(f"predictions have different lengths: {sorted(sizes)}")
    means = np.vstack([p.means for p in preds])
    sigmas = np.vstack([p.sigmas for p in preds])
    return means, sigmas


def fuse_mean(preds: Sequence[ProbabilisticPrediction]) -> np.ndarray:
    """Plain average of the predicted means across learners."""
    means, _ = _stack(preds)
    return means.mean(axis=0)


def fuse_inverse_uncertainty(preds: Sequence[ProbabilisticPrediction]) -> np.ndarray:
    """Average of predicted means weighted by ``1 / sigma`` of each learner."""
    means, sigmas = _stack(preds)
    if np.any(~(sigmas >= SIGMA_FLOOR)):
        raise DegenerateUncertainty(f"sigmas must be >= {SIGMA_FLOOR}")
    # relative weights keep the ratio exact when all sigmas are equal
    inv = sigmas.min(axis=0) / sigmas
    fused = (inv * means).sum(axis=0) / inv.sum(axis=0)
    # guard against rounding just outside the convex hull
    return np.clip(fused, means.min(axis=0), means.max(axis=0))
