"""Cross-validated benchmark runs, JSON reports and plot-ready tables."""

from __future__ import annotations

import csv
import datetime as _dt
import json
import logging
import zlib
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

import numpy as np

from . import ensemble
from .core import EnsembleMode, ProbabilisticPrediction, UABoostError, fuse_mean
from .data import (
    SyntheticSpec,
    default_parkinsons_path,
    generate_synthetic,
    load_parkinsons,
    make_folds,
    split_modalities,
    train_val_split,
)
from .forest import ForestConfig, RandomForest
from .metrics import (
    NOMINAL_LEVELS,
    IntervalSpec,
    aggregate_runs,
    calibration_curve,
    mpiw,
    picp,
    predictive_entropy,
    rmse,
)
from .mlp import GaussianMLP, MlpConfig

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
PICP_DELTAS = (1, 2, 3)
ALL_MODES = (EnsembleMode.VANILLA, EnsembleMode.UA, EnsembleMode.UA_WEIGHTED)
TABLE_NAMES = {"vanilla": "Vanilla Ensemble", "ua": "UA Ensemble", "ua-weighted": "UA Ensemble (weighted)"}


@dataclass
class ExperimentConfig:
    dataset: str = "synthetic"
    learner: str = "forest"
    mode: str = "all"
    folds: Optional[int] = 5
    repeats: Optional[int] = None
    seed: int = 0
    trees: int = 300
    min_samples_leaf: int = 5
    group_by_subject: bool = False
    mpiw_delta: float = 1.0
    n_samples: int = 2000
    noise: str = "heteroscedastic"
    hidden: tuple = (64, 32)
    max_epochs: int = 500
    patience: int = 50
    n_jobs: int = 1
    out: str = "results"

    def __post_init__(self):
        self.hidden = tuple(self.hidden)
        if self.learner not in ("forest", "mlp"):
            raise ValueError(f"unknown learner {self.learner!r}")
        if self.mode != "all":
            self.mode = EnsembleMode.parse(self.mode).value
        if (self.folds is None) == (self.repeats is None):
            raise ValueError("set exactly one of folds and repeats")
        if self.folds is not None and self.folds < 2:
            raise ValueError("folds must be >= 2")
        if self.repeats is not None and self.repeats < 1:
            raise ValueError("repeats must be >= 1")
        if not (self.dataset == "synthetic" or self.dataset == "parkinsons" or self.dataset.startswith("parkinsons:")):
            raise ValueError(f"unknown dataset {self.dataset!r}")
        if self.mpiw_delta <= 0:
            raise ValueError("mpiw_delta must be positive")

    @property
    def modes(self) -> list:
        return list(ALL_MODES) if self.mode == "all" else [EnsembleMode.parse(self.mode)]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hidden"] = list(self.hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)


def derive_seed(*parts) -> int:
    """Stable 32-bit seed from ints and strings."""
    ints = [p if isinstance(p, int) else zlib.crc32(str(p).encode()) for p in parts]
    return int(np.random.SeedSequence(ints).generate_state(1)[0])


def load_dataset(cfg: ExperimentConfig):
    """Modality matrices, targets and optional subject groups."""
    if cfg.dataset == "synthetic":
        ds = generate_synthetic(SyntheticSpec.uniform(cfg.noise, n_samples=cfg.n_samples, seed=cfg.seed))
        return ds.modalities, ds.y, None
    path = cfg.dataset.partition(":")[2] or default_parkinsons_path()
    records = load_parkinsons(path)
    mats, y = split_modalities(records)
    groups = np.array([r.subject_id for r in records])
    return mats, y, groups


def make_factory(cfg: ExperimentConfig, run: int):
    def factory(modality_id: str):
        seed = derive_seed(cfg.seed, "learner", run, modality_id)
        if cfg.learner == "forest":
            return RandomForest(ForestConfig(n_trees=cfg.trees, min_samples_leaf=cfg.min_samples_leaf,
                                             seed=seed, n_jobs=cfg.n_jobs))
        return GaussianMLP(MlpConfig(hidden_layer_sizes=cfg.hidden, max_epochs=cfg.max_epochs,
                                     patience=cfg.patience, seed=seed))
    return factory


def plan_runs(cfg: ExperimentConfig, n: int, groups=None):
    """List of (train, test) index pairs plus a description of the plan."""
    if cfg.folds is not None:
        fold_seed = derive_seed(cfg.seed, "folds")
        plan = make_folds(n, cfg.folds, fold_seed, groups if cfg.group_by_subject else None)
        desc = {"kind": "kfold", "k": cfg.folds, "seed": fold_seed, "group_by_subject": cfg.group_by_subject}
        return list(plan), desc
    seeds = [derive_seed(cfg.seed, "repeat", r) for r in range(cfg.repeats)]
    runs = [train_val_split(n, 0.2, s) for s in seeds]
    return runs, {"kind": "repeated-holdout", "repeats": cfg.repeats, "test_fraction": 0.2, "seeds": seeds}


def _uncertainty_metrics(frag, prefix, pred, y, delta):
    frag[f"mpiw/{prefix}"] = mpiw(pred, IntervalSpec(delta))
    for d in PICP_DELTAS:
        frag[f"picp@{d}/{prefix}"] = picp(pred, y, IntervalSpec(d))
    frag[f"calibration/{prefix}"] = calibration_curve(pred, y).observed_fractions


@dataclass
class BenchmarkResult:
    config: ExperimentConfig
    plan: dict
    fragments: list
    orders: list
    failures: list
    # (mode, stage index) -> list of test predictions, one per run
    stage_predictions: dict = field(default_factory=dict)
    stage_modalities: dict = field(default_factory=dict)

    def metrics(self) -> dict:
        keys = []
        for f in self.fragments:
            keys += [k for k in f if k not in keys]
        out = {}
        for key in keys:
            agg = aggregate_runs([{key: f[key]} for f in self.fragments if key in f])
            out[key] = agg[key]
        return out

    def report(self) -> dict:
        metrics = self.metrics()

        def enc(v):
            return v.tolist() if isinstance(v, np.ndarray) else v

        return {
            "schema_version": SCHEMA_VERSION,
            "generated_at": _dt.datetime.now(_dt.timezone.utc).isoformat(),
            "config": self.config.to_dict(),
            "fold_plan": self.plan,
            "std": "population",
            "mpiw_delta": self.config.mpiw_delta,
            "picp_deltas": list(PICP_DELTAS),
            "calibration_levels": list(NOMINAL_LEVELS),
            "orders": self.orders,
            "rmse_table": rmse_table(metrics, self.modalities),
            "metrics": {k: {"mean": enc(s.mean), "std": enc(s.std)} for k, s in metrics.items()},
            "runs": [{k: enc(v) for k, v in f.items()} for f in self.fragments],
            "failures": self.failures,
        }

    @property
    def modalities(self) -> list:
        return sorted({m for order in self.orders for m in order})


def rmse_table(metrics: dict, modalities) -> list:
    rows = []
    for m in modalities:
        rows.append(("%s" % m, f"rmse/{m}"))
    rows.append(("Unboosted average", "rmse/average"))
    rows += [(TABLE_NAMES[m.value], f"rmse/{m.value}") for m in ALL_MODES]
    return [{"model": name, "key": key, "mean": metrics[key].mean, "std": metrics[key].std}
            for name, key in rows if key in metrics]


def run_benchmark(cfg: ExperimentConfig, data=None) -> BenchmarkResult:
    """Fit individual learners and boosted chains on every run and score them.

    ``data`` may supply ``(datasets, y, groups)`` directly instead of loading
    the configured dataset.
    """
    datasets, y, groups = data if data is not None else load_dataset(cfg)
    y = np.asarray(y, dtype=float)
    runs, plan = plan_runs(cfg, y.size, groups)
    result = BenchmarkResult(cfg, plan, [], [], [])
    delta = cfg.mpiw_delta
    for r, (tr, te) in enumerate(runs):
        factory = make_factory(cfg, r)
        d_tr = {m: v.take(tr) for m, v in datasets.items()}
        d_te = {m: v.take(te) for m, v in datasets.items()}
        y_tr, y_te = y[tr], y[te]
        frag = {}
        try:
            individual = {m: factory(m).fit(d_tr[m].values, y_tr) for m in sorted(d_tr)}
        except UABoostError as exc:
            result.failures.append({"run": r, "stage": "individual", "error": f"{type(exc).__name__}: {exc}"})
            continue
        scores = {m: float(l.validation_rmse()) for m, l in individual.items()}
        order = ensemble.rank_modalities(scores)
        result.orders.append(order)
        ind_preds = {m: individual[m].predict(d_te[m].values) for m in order}
        for m in order:
            frag[f"rmse/{m}"] = rmse(ind_preds[m].means, y_te)
            _uncertainty_metrics(frag, f"individual/{m}", ind_preds[m], y_te, delta)
        frag["rmse/average"] = rmse(fuse_mean(list(ind_preds.values())), y_te)

        chains = {}
        for mode in cfg.modes:
            try:
                if mode is EnsembleMode.UA_WEIGHTED and EnsembleMode.UA in chains:
                    chains[mode] = chains[EnsembleMode.UA].with_mode(mode)
                    continue
                chains[mode], _ = ensemble.boost_fit(mode, d_tr, y_tr, factory, order, scores,
                                                     first_stage=individual[order[0]])
            except UABoostError as exc:
                log.warning("run %d mode %s failed: %s", r, mode.value, exc)
                result.failures.append({"run": r, "mode": mode.value, "stage": getattr(exc, "stage", None),
                                        "error": f"{type(exc).__name__}: {exc}"})
        for mode, chain in chains.items():
            fused, per = ensemble.predict(chain, d_te)
            frag[f"rmse/{mode.value}"] = rmse(fused, y_te)
            for j, m in enumerate(chain.order):
                _uncertainty_metrics(frag, f"{mode.value}/{m}", per[m], y_te, delta)
                summary = predictive_entropy(per[m])
                frag[f"entropy/{mode.value}/stage{j + 1}"] = summary.mean_entropy
                result.stage_predictions.setdefault((mode.value, j + 1), []).append(per[m])
                result.stage_modalities.setdefault((mode.value, j + 1), []).append(m)
        result.fragments.append(frag)
        log.info("run %d/%d done: order=%s", r + 1, len(runs), order)
    return result


def write_report(report: dict, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return path


def report_body(report: dict) -> dict:
    """Report without its timestamp, for reproducibility comparisons."""
    return {k: v for k, v in report.items() if k != "generated_at"}


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
    return path


def write_calibration_tables(curves: dict, out_dir) -> list:
    """One table per mode (ensemble-wise) and one per modality (modality-wise).

    ``curves`` maps ``(mode, modality)`` to observed fractions at the nominal
    levels 0.1..0.9. Columns are named ``<mode>/<modality>``.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    levels = list(NOMINAL_LEVELS)
    modes = sorted({k[0] for k in curves}, key=lambda m: [x.value for x in ALL_MODES].index(m)
                   if m in [x.value for x in ALL_MODES] else 99)
    mods = sorted({k[1] for k in curves})
    paths = []
    for panel, keys in [(f"ensemble_{m}", [(m, x) for x in mods]) for m in modes] + \
                       [(f"modality_{x}", [(m, x) for m in modes]) for x in mods]:
        keys = [k for k in keys if k in curves]
        header = ["nominal", "reference"] + [f"{m}/{x}" for m, x in keys]
        rows = [[lv, lv] + [float(curves[k][i]) for k in keys] for i, lv in enumerate(levels)]
        paths.append(_write_csv(out / f"calibration_{panel}.csv", header, rows))
    return paths


def calibration_curves_from_metrics(metrics: dict, modes) -> dict:
    curves = {}
    for key, stat in metrics.items():
        parts = key.split("/")
        if parts[0] == "calibration" and parts[1] in modes:
            curves[(parts[1], parts[2])] = np.asarray(stat.mean)
    return curves


def write_entropy_tables(result: BenchmarkResult, out_dir) -> list:
    """KDE grid and density per mode and stage from the pooled test predictions."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    metrics = result.metrics()
    paths = []
    summary_rows = []
    for mode in [m.value for m in result.config.modes]:
        stages = sorted(j for (m, j) in result.stage_predictions if m == mode)
        if not stages:
            continue
        cols, header = [], []
        for j in stages:
            preds = result.stage_predictions[(mode, j)]
            pooled = ProbabilisticPrediction(np.concatenate([p.means for p in preds]),
                                             np.concatenate([p.sigmas for p in preds]))
            s = predictive_entropy(pooled)
            cols += [s.grid, s.density]
            header += [f"stage{j}_entropy", f"stage{j}_density"]
            stat = metrics[f"entropy/{mode}/stage{j}"]
            mods = ";".join(sorted(set(result.stage_modalities[(mode, j)])))
            summary_rows.append([mode, j, mods, s.mean_entropy, stat.mean, stat.std])
        rows = np.column_stack(cols).tolist()
        paths.append(_write_csv(out / f"entropy_{mode}.csv", header, rows))
    paths.append(_write_csv(out / "entropy_summary.csv",
                            ["mode", "stage", "modalities", "pooled_mean_entropy", "run_mean", "run_std"],
                            summary_rows))
    return paths
