"""Dataset ingestion, modality splitting, fold planning and synthetic data."""

from __future__ import annotations

import csv
import hashlib
import logging
import os
import urllib.request
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .core import InsufficientData, ModalityMatrix, ParseError, SchemaError, ShapeMismatch

log = logging.getLogger(__name__)

DATA_DIR_ENV = "UABOOST_DATA_DIR"
PARKINSONS_FILENAME = "parkinsons_updrs.data"
PARKINSONS_URL = (
    "https://archive.ics.uci.edu/ml/machine-learning-databases/parkinsons/telemonitoring/parkinsons_updrs.data"
)
PARKINSONS_N_RECORDS = 5875

VOICE_MEASURES = (
    "Jitter(%)", "Jitter(Abs)", "Jitter:RAP", "Jitter:PPQ5", "Jitter:DDP",
    "Shimmer", "Shimmer(dB)", "Shimmer:APQ3", "Shimmer:APQ5", "Shimmer:APQ11", "Shimmer:DDA",
    "NHR", "HNR", "RPDE", "DFA", "PPE",
)
PARKINSONS_COLUMNS = ("subject#", "age", "sex", "test_time", "motor_UPDRS", "total_UPDRS") + VOICE_MEASURES

AMPLITUDE = (
    "Shimmer", "Shimmer(dB)", "Shimmer:APQ3", "Shimmer:APQ5", "Shimmer:APQ11", "Shimmer:DDA",
    "NHR", "HNR", "RPDE", "DFA",
)
FREQUENCY = ("Jitter(%)", "Jitter(Abs)", "Jitter:RAP", "Jitter:PPQ5", "Jitter:DDP", "PPE")


@dataclass(frozen=True)
class ParkinsonsRecord:
    subject_id: int
    age: float
    sex: float
    test_time: float
    motor_updrs: float
    total_updrs: float
    voice: Mapping[str, float]

    def column(self, name: str) -> float:
        if name in self.voice:
            return self.voice[name]
        fields = {"subject#": self.subject_id, "age": self.age, "sex": self.sex, "test_time": self.test_time,
                  "motor_UPDRS": self.motor_updrs, "total_UPDRS": self.total_updrs}
        try:
            return float(fields[name])
        except KeyError:
            raise SchemaError([name]) from None


def default_data_dir() -> Path:
    return Path(os.environ.get(DATA_DIR_ENV, "data"))


def default_parkinsons_path() -> Path:
    return default_data_dir() / PARKINSONS_FILENAME


def fetch_parkinsons(dest=None, url: str = PARKINSONS_URL, sha256: str | None = None,
                     timeout: float = 60.0) -> Path:
    """Download the telemonitoring file unless it already exists.

    When ``sha256`` is given the file is verified against it and removed on
    mismatch; otherwise the computed digest is logged so it can be pinned.
    """
    dest = Path(dest) if dest is not None else default_parkinsons_path()
    if not dest.exists():
        with urllib.request.urlopen(url, timeout=timeout) as resp:
            payload = resp.read()
        dest.parent.mkdir(parents=True, exist_ok=True)
        dest.write_bytes(payload)
    digest = hashlib.sha256(dest.read_bytes()).hexdigest()
    if sha256 is not None and digest != sha256.lower():
        dest.unlink()
        raise ValueError(f"checksum mismatch for {dest}: got {digest}, expected {sha256}")
    log.info("%s sha256=%s", dest, digest)
    return dest


def load_parkinsons(path) -> list[ParkinsonsRecord]:
    """Parse the UCI Parkinson's Telemonitoring CSV."""
    records = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(list(PARKINSONS_COLUMNS), "file is empty") from None
        missing = [c for c in PARKINSONS_COLUMNS if c not in header]
        if missing:
            raise SchemaError(missing)
        pos = {name: header.index(name) for name in PARKINSONS_COLUMNS}
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise ParseError(line, f"expected {len(header)} fields, got {len(row)}")
            try:
                vals = {name: float(row[i]) for name, i in pos.items()}
            except ValueError as exc:
                raise ParseError(line, str(exc)) from None
            if not all(np.isfinite(v) for v in vals.values()):
                raise ParseError(line, "non-finite value")
            if not 0.0 <= vals["total_UPDRS"] <= 199.0:
                raise ParseError(line, f"total_UPDRS {vals['total_UPDRS']} outside [0, 199]")
            records.append(ParkinsonsRecord(
                subject_id=int(vals["subject#"]), age=vals["age"], sex=vals["sex"],
                test_time=vals["test_time"], motor_updrs=vals["motor_UPDRS"],
                total_updrs=vals["total_UPDRS"], voice={m: vals[m] for m in VOICE_MEASURES},
            ))
    if records and len(records) != PARKINSONS_N_RECORDS:
        log.warning("read %d records from %s, expected %d", len(records), path, PARKINSONS_N_RECORDS)
    return records


@dataclass(frozen=True)
class ModalitySplitSpec:
    columns: Mapping[str, tuple]

    def __post_init__(self):
        cols = {k: tuple(v) for k, v in self.columns.items()}
        seen = {}
        for mid, names in cols.items():
            if not names:
                raise ValueError(f"modality {mid!r} has no columns")
            for name in names:
                if name in seen:
                    raise ValueError(f"column {name!r} listed under both {seen[name]!r} and {mid!r}")
                seen[name] = mid
        object.__setattr__(self, "columns", cols)

    @classmethod
    def parkinsons(cls) -> "ModalitySplitSpec":
        return cls({"Amplitude": AMPLITUDE, "Frequency": FREQUENCY})


def split_modalities(records: Sequence[ParkinsonsRecord], spec: ModalitySplitSpec | None = None):
    """Row-aligned modality matrices plus the ``total_UPDRS`` target."""
    spec = spec or ModalitySplitSpec.parkinsons()
    known = set(PARKINSONS_COLUMNS)
    missing = [c for names in spec.columns.values() for c in names if c not in known]
    if missing:
        raise SchemaError(missing)
    mats = {}
    for mid, names in spec.columns.items():
        values = np.array([[r.column(c) for c in names] for r in records], dtype=float).reshape(len(records), len(names))
        mats[mid] = ModalityMatrix(mid, values, names)
    y = np.array([r.total_updrs for r in records], dtype=float)
    return mats, y


@dataclass(frozen=True)
class FoldPlan:
    k: int
    assignments: np.ndarray
    seed: int

    def split(self, fold: int):
        test = np.flatnonzero(self.assignments == fold)
        train = np.flatnonzero(self.assignments != fold)
        return train, test

    def __iter__(self):
        return (self.split(f) for f in range(self.k))


def make_folds(n: int, k: int = 5, seed: int = 0, groups=None) -> FoldPlan:
    """Random balanced k-fold assignment, fully determined by ``seed``.

    With ``groups`` every group lands in a single fold; groups are dealt to
    folds largest-first so fold sizes stay close.
    """
    if k < 2:
        raise ValueError("need k >= 2")
    if n < k:
        raise InsufficientData(f"{n} samples cannot fill {k} folds")
    rng = np.random.default_rng(seed)
    if groups is None:
        assignments = np.empty(n, dtype=np.int64)
        assignments[rng.permutation(n)] = np.arange(n) % k
        return FoldPlan(k, assignments, seed)
    groups = np.asarray(groups)
    if groups.size != n:
        raise ShapeMismatch(f"{groups.size} group labels for {n} samples")
    uniq, inverse, counts = np.unique(groups, return_inverse=True, return_counts=True)
    if uniq.size < k:
        raise InsufficientData(f"{uniq.size} groups cannot fill {k} folds")
    order = rng.permutation(uniq.size)
    order = order[np.argsort(-counts[order], kind="stable")]
    sizes = np.zeros(k, dtype=np.int64)
    group_fold = np.empty(uniq.size, dtype=np.int64)
    for g in order:
        f = int(np.argmin(sizes))
        group_fold[g] = f
        sizes[f] += counts[g]
    return FoldPlan(k, group_fold[inverse], seed)


def train_val_split(n: int, val_fraction: float = 0.2, seed: int = 0):
    """Shuffled split with ``round(val_fraction * n)`` validation indices."""
    if not 0 < val_fraction < 1:
        raise ValueError("val_fraction must lie in (0, 1)")
    if n < 2:
        raise InsufficientData("need at least two samples to split")
    n_val = int(np.floor(val_fraction * n + 0.5))
    n_val = min(max(n_val, 1), n - 1)
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_val:]), np.sort(perm[:n_val])


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray
    constant: np.ndarray

    @classmethod
    def fit(cls, x) -> "Standardizer":
        x = np.asarray(x, dtype=float)
        if x.shape[0] == 0:
            raise InsufficientData("cannot standardize an empty matrix")
        mean = x.mean(axis=0)
        std = x.std(axis=0)
        constant = ~(std > 0)
        return cls(mean, np.where(constant, 1.0, std), constant)

    def transform(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.ndim != 2 or x.shape[1] != self.mean.size:
            raise ShapeMismatch(f"expected {self.mean.size} features, got shape {x.shape}")
        z = (x - self.mean) / self.scale
        z[:, self.constant] = 0.0
        return z

    def inverse_transform(self, z) -> np.ndarray:
        return np.asarray(z, dtype=float) * self.scale + self.mean


def standardize(train: ModalityMatrix, others: Sequence[ModalityMatrix] = ()):
    """Zero-mean unit-variance features fitted on ``train`` only."""
    t = Standardizer.fit(train.values)
    wrap = lambda m: ModalityMatrix(m.modality_id, t.transform(m.values), m.feature_names)
    return wrap(train), [wrap(m) for m in others], t


@dataclass(frozen=True)
class NoiseProfile:
    """Noise standard deviation, constant or growing with the latent driver."""

    kind: str = "heteroscedastic"
    sigma: float = 0.5

    def __post_init__(self):
        if self.kind not in ("homoscedastic", "heteroscedastic"):
            raise ValueError(f"unknown noise profile {self.kind!r}")
        if self.sigma < 0 or (self.kind == "heteroscedastic" and self.sigma == 0):
            raise ValueError("noise sigma must be positive")

    def scale(self, driver: np.ndarray) -> np.ndarray:
        if self.kind == "homoscedastic":
            return np.full(driver.shape, self.sigma)
        # 0.25 sigma at the quiet end up to 2.25 sigma at the loud end
        return self.sigma * (0.25 + 2.0 * driver)


@dataclass(frozen=True)
class SyntheticSpec:
    n_samples: int = 2000
    feature_dims: tuple = (8, 8, 8)
    modality_noise: tuple = (NoiseProfile(), NoiseProfile(), NoiseProfile())
    target_noise: NoiseProfile = NoiseProfile("heteroscedastic", 0.5)
    n_latent: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_samples < 1 or self.n_latent < 2:
            raise ValueError("need n_samples >= 1 and n_latent >= 2")
        if len(self.feature_dims) != len(self.modality_noise) or len(self.feature_dims) < 1:
            raise ValueError("one noise profile per modality is required")
        if any(d < 1 for d in self.feature_dims):
            raise ValueError("feature dims must be >= 1")

    @property
    def modality_ids(self) -> tuple:
        return tuple(f"m{j + 1}" for j in range(len(self.feature_dims)))

    @classmethod
    def uniform(cls, noise: str = "heteroscedastic", k: int = 3, dim: int = 8, sigma: float = 0.5,
                n_samples: int = 2000, seed: int = 0) -> "SyntheticSpec":
        prof = NoiseProfile(noise, sigma)
        return cls(n_samples, (dim,) * k, (prof,) * k, prof, seed=seed)


@dataclass(frozen=True)
class SyntheticDataset:
    modalities: dict
    y: np.ndarray
    mu_star: np.ndarray
    sigma_star: np.ndarray
    latents: np.ndarray


def generate_synthetic(spec: SyntheticSpec = SyntheticSpec()) -> SyntheticDataset:
    """Multi-modal regression data driven by shared latent factors.

    The target is ``mu*(z) + sigma*(z) * eps``. Modality ``j`` sees
    ``tanh(z @ A_j + b_j)`` plus noise from its profile. The first latent,
    mapped to [0, 1], drives every heteroscedastic profile.
    """
    rng = np.random.default_rng(spec.seed)
    z = rng.uniform(-1.0, 1.0, size=(spec.n_samples, spec.n_latent))
    driver = 0.5 * (z[:, 0] + 1.0)
    mu = 2.0 * np.sin(1.5 * z[:, 0]) + 1.5 * z[:, 1] + z[:, 1] * z[:, -1] + 0.5 * z[:, -1]
    sigma = spec.target_noise.scale(driver)
    y = mu + sigma * rng.standard_normal(spec.n_samples)
    mods = {}
    for mid, dim, prof in zip(spec.modality_ids, spec.feature_dims, spec.modality_noise):
        a = rng.normal(0.0, 1.5, size=(spec.n_latent, dim))
        b = rng.normal(0.0, 0.3, size=dim)
        clean = np.tanh(z @ a + b)
        noise = prof.scale(driver)[:, None] * rng.standard_normal((spec.n_samples, dim))
        names = tuple(f"{mid}_f{i}" for i in range(dim))
        mods[mid] = ModalityMatrix(mid, clean + noise, names)
    return SyntheticDataset(mods, y, mu, sigma, z)


def write_synthetic_csv(ds: SyntheticDataset, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = []
    for mid, mat in ds.modalities.items():
        p = out / f"{mid}.csv"
        with open(p, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(mat.feature_names)
            w.writerows([[repr(float(v)) for v in row] for row in mat.values])
        paths.append(p)
    p = out / "targets.csv"
    with open(p, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y", "mu_star", "sigma_star"])
        for row in zip(ds.y, ds.mu_star, ds.sigma_star):
            w.writerow([repr(float(v)) for v in row])
    paths.append(p)
    return paths
