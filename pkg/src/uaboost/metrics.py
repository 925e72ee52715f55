"""Evaluation metrics: RMSE, interval width and coverage, calibration, entropy."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.stats import norm

from .core import InsufficientData, ProbabilisticPrediction, ShapeMismatch

NOMINAL_LEVELS = tuple(round(0.1 * i, 1) for i in range(1, 10))
KDE_GRID_POINTS = 256


@dataclass(frozen=True)
class IntervalSpec:
    """Symmetric interval ``mu +/- delta_multiplier * sigma``."""

    delta_multiplier: float = 1.0

    def __post_init__(self):
        if not self.delta_multiplier > 0:
            raise ValueError("delta_multiplier must be positive")


@dataclass(frozen=True)
class CalibrationCurve:
    nominal_levels: np.ndarray
    observed_fractions: np.ndarray

    def rows(self):
        return list(zip(self.nominal_levels.tolist(), self.observed_fractions.tolist()))


@dataclass(frozen=True)
class EntropySummary:
    per_sample_entropies: np.ndarray
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    mean_entropy: float


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float

    def __str__(self) -> str:
        return f"{self.mean:.2f} ± {self.std:.2f}"


@dataclass
class MetricsReport:
    """Run statistics keyed by metric path.

    Keys are slash-separated, e.g. ``rmse/ua``, ``mpiw/ua/Frequency`` or
    ``picp@2/vanilla/Amplitude``. Scalar metrics map to :class:`Stat`;
    curve-valued metrics (calibration, entropy densities) map to arrays of
    means and stds.
    """

    values: dict = field(default_factory=dict)
    n_runs: int = 0
    std_kind: str = "population"

    def __getitem__(self, key) -> Stat:
        return self.values[key]

    def keys(self):
        return self.values.keys()


def _as_pair(pred, y):
    y = np.asarray(y, dtype=float).ravel()
    if len(pred) != y.size:
        raise ShapeMismatch(f"{len(pred)} predictions vs {y.size} targets")
    if y.size == 0:
        raise InsufficientData("no samples to evaluate")
    return y


def rmse(pred, y) -> float:
    pred = np.asarray(pred, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if pred.shape != y.shape:
        raise ShapeMismatch(f"{pred.size} predictions vs {y.size} targets")
    if y.size == 0:
        raise InsufficientData("no samples to evaluate")
    return float(np.sqrt(np.mean((pred - y) ** 2)))


def mpiw(pred: ProbabilisticPrediction, spec: IntervalSpec = IntervalSpec()) -> float:
    """Mean width of the intervals ``mu +/- delta * sigma``."""
    if len(pred) == 0:
        raise InsufficientData("no samples to evaluate")
    return float(np.mean(2.0 * spec.delta_multiplier * pred.sigmas))


def picp(pred: ProbabilisticPrediction, y, spec: IntervalSpec = IntervalSpec()) -> float:
    """Percentage of targets inside ``mu +/- delta * sigma``."""
    y = _as_pair(pred, y)
    covered = np.abs(y - pred.means) <= spec.delta_multiplier * pred.sigmas
    return float(100.0 * covered.mean())


def gaussian_interval_z(level: float) -> float:
    """Half-width in sigmas of the central Gaussian interval holding ``level`` mass."""
    return float(norm.ppf(0.5 * (1.0 + level)))


def calibration_curve(pred: ProbabilisticPrediction, y, levels: Sequence[float] = NOMINAL_LEVELS) -> CalibrationCurve:
    y = _as_pair(pred, y)
    levels = np.asarray(levels, dtype=float)
    z = norm.ppf(0.5 * (1.0 + levels))
    scaled = np.abs(y - pred.means) / pred.sigmas
    observed = (scaled[None, :] <= z[:, None]).mean(axis=1)
    return CalibrationCurve(levels, observed)


def gaussian_entropy(sigmas) -> np.ndarray:
    """Differential entropy of ``N(mu, sigma^2)`` for each sigma."""
    sigmas = np.asarray(sigmas, dtype=float)
    return 0.5 * np.log(2.0 * np.pi * np.e * sigmas**2)


def silverman_bandwidth(x) -> float:
    x = np.asarray(x, dtype=float)
    std = x.std()
    q75, q25 = np.percentile(x, [75, 25])
    iqr = q75 - q25
    spread = min(std, iqr / 1.34) if iqr > 0 else std
    bw = 0.9 * spread * x.size ** (-0.2)
    if bw <= 0:
        # all points coincide; any small kernel keeps the density proper
        bw = 1e-3 * max(1.0, abs(float(x.mean())))
    return float(bw)


def gaussian_kde(x, bandwidth: float, grid: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    u = (grid[:, None] - x[None, :]) / bandwidth
    return np.exp(-0.5 * u**2).sum(axis=1) / (x.size * bandwidth * np.sqrt(2.0 * np.pi))


def predictive_entropy(pred: ProbabilisticPrediction, n_grid: int = KDE_GRID_POINTS) -> EntropySummary:
    if len(pred) == 0:
        raise InsufficientData("no samples to evaluate")
    h = gaussian_entropy(pred.sigmas)
    bw = silverman_bandwidth(h)
    grid = np.linspace(h.min() - 3 * bw, h.max() + 3 * bw, n_grid)
    return EntropySummary(h, grid, gaussian_kde(h, bw, grid), bw, float(h.mean()))


def aggregate_runs(fragments: Sequence[Mapping[str, object]]) -> MetricsReport:
    """Fieldwise mean and population standard deviation over runs.

    Each fragment maps metric keys to scalars or equal-length arrays. All
    fragments must carry the same keys and shapes.
    """
    if len(fragments) == 0:
        raise InsufficientData("need at least one run")
    keys = list(fragments[0].keys())
    out = {}
    for key in keys:
        try:
            stacked = [np.asarray(f[key], dtype=float) for f in fragments]
        except KeyError as exc:
            raise ShapeMismatch(f"run is missing metric {exc}") from None
        shapes = {a.shape for a in stacked}
        if len(shapes) != 1:
            raise ShapeMismatch(f"inconsistent shapes for {key}: {sorted(shapes)}")
        arr = np.stack(stacked)
        mean, std = arr.mean(axis=0), arr.std(axis=0)
        out[key] = Stat(float(mean), float(std)) if arr.ndim == 1 else Stat(mean, std)
    for frag in fragments[1:]:
        if set(frag.keys()) != set(keys):
            raise ShapeMismatch("runs report different metric sets")
    return MetricsReport(out, n_runs=len(fragments))
