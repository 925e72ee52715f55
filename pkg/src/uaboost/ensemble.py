"""Sequential boosting across modality-wise base learners."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Mapping, Sequence

import numpy as np

from .core import (
    BaseLearner,
    EnsembleMode,
    InvalidScore,
    MissingModality,
    ProbabilisticPrediction,
    ShapeMismatch,
    fuse_inverse_uncertainty,
    fuse_mean,
    normalize_weights,
)

LearnerFactory = Callable[[str], BaseLearner]


@dataclass(frozen=True)
class BoostChain:
    mode: EnsembleMode
    stages: tuple  # ((modality_id, fitted learner), ...)
    order_scores: Mapping[str, float] = field(default_factory=dict)

    @property
    def order(self) -> list:
        return [mid for mid, _ in self.stages]

    def with_mode(self, mode) -> "BoostChain":
        """Same learners under another fusion rule (UA vs UA-weighted)."""
        return replace(self, mode=EnsembleMode.parse(mode))


@dataclass(frozen=True)
class StageRecord:
    modality_id: str
    weights: np.ndarray  # weights the stage was trained with
    train_prediction: ProbabilisticPrediction
    next_raw_weights: np.ndarray | None  # None for the last stage


@dataclass(frozen=True)
class StageTrace:
    stages: tuple

    @property
    def n_derivations(self) -> int:
        return sum(s.next_raw_weights is not None for s in self.stages)


def rank_modalities(individual_scores: Mapping[str, float]) -> list:
    """Modality ids by ascending RMSE, ties broken by id."""
    if not individual_scores:
        raise InvalidScore("no scores to rank")
    for mid, score in individual_scores.items():
        if not math.isfinite(score):
            raise InvalidScore(f"score for {mid!r} is not finite: {score}")
    return sorted(individual_scores, key=lambda m: (individual_scores[m], m))


def raw_weights(mode, train_pred: ProbabilisticPrediction, y) -> np.ndarray:
    mode = EnsembleMode.parse(mode)
    y = np.asarray(y, dtype=float).ravel()
    if y.size != len(train_pred):
        raise ShapeMismatch(f"{len(train_pred)} predictions vs {y.size} targets")
    if mode is EnsembleMode.VANILLA:
        return (y - train_pred.means) ** 2
    return np.array(train_pred.sigmas)


def derive_weights(mode, train_pred: ProbabilisticPrediction, y) -> np.ndarray:
    """Loss weights for the next stage: squared residuals (vanilla) or sigmas (UA)."""
    return normalize_weights(raw_weights(mode, train_pred, y))


def _check_inputs(datasets, y, order):
    n = np.asarray(y).size
    missing = [m for m in order if m not in datasets]
    if missing:
        raise MissingModality(f"missing modalities: {missing}")
    if len(set(order)) != len(order) or not order:
        raise ValueError("order must list each modality exactly once")
    for m in order:
        if len(datasets[m]) != n:
            raise ShapeMismatch(f"modality {m!r} has {len(datasets[m])} rows, targets have {n}")


def boost_fit(mode, datasets: Mapping[str, object], y, learner_factory: LearnerFactory,
              order: Sequence[str], order_scores=None, first_stage: BaseLearner | None = None):
    """Train one learner per modality in ``order``, each weighted by its predecessor.

    Parameters
    ----------
    mode : EnsembleMode or str
    datasets : mapping of modality id to feature matrix
    y : array-like of shape (n_samples,)
    learner_factory : callable
        ``learner_factory(modality_id)`` returns an unfitted learner.
    order : sequence of modality ids, best individual performer first
    order_scores : mapping, optional
        Scores that produced ``order``; stored on the chain.
    first_stage : fitted learner, optional
        Reuse an already fitted uniform-weight learner for the first modality.

    Returns
    -------
    (BoostChain, StageTrace)
    """
    mode = EnsembleMode.parse(mode)
    order = list(order)
    y = np.asarray(y, dtype=float).ravel()
    _check_inputs(datasets, y, order)
    weights = np.ones(y.size)
    stages, records = [], []
    for j, mid in enumerate(order):
        x = np.asarray(datasets[mid], dtype=float)
        try:
            if j == 0 and first_stage is not None:
                learner = first_stage
            else:
                learner = learner_factory(mid).fit(x, y, weights)
        except Exception as exc:
            exc.stage = j
            exc.modality_id = mid
            raise
        train_pred = learner.predict(x)
        raw = raw_weights(mode, train_pred, y) if j + 1 < len(order) else None
        records.append(StageRecord(mid, weights, train_pred, raw))
        stages.append((mid, learner))
        if raw is not None:
            weights = normalize_weights(raw)
    chain = BoostChain(mode, tuple(stages), dict(order_scores or {}))
    return chain, StageTrace(tuple(records))


def predict(chain: BoostChain, datasets: Mapping[str, object]):
    """Fused point prediction plus each stage's Gaussian prediction."""
    per_modality = {}
    n = None
    for mid, learner in chain.stages:
        if mid not in datasets:
            raise MissingModality(f"missing modality {mid!r}")
        pred = learner.predict(np.asarray(datasets[mid], dtype=float))
        if n is not None and len(pred) != n:
            raise ShapeMismatch(f"modality {mid!r} has {len(pred)} rows, expected {n}")
        n = len(pred)
        per_modality[mid] = pred
    preds = list(per_modality.values())
    if chain.mode is EnsembleMode.UA_WEIGHTED:
        fused = fuse_inverse_uncertainty(preds)
    else:
        fused = fuse_mean(preds)
    return fused, per_modality
