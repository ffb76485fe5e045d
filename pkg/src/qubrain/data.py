"""Credit-card fraud CSV ingestion, scaling, and seeded imbalanced splits."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FEATURE_NAMES = ["Time"] + [f"V{i}" for i in range(1, 29)] + ["Amount"]
LABEL_NAME = "Class"
VALIDATION_FRACTION = 0.2


class SchemaError(ValueError):
    pass


class ConfigurationError(ValueError):
    pass


class NormalizationError(ValueError):
    pass


@dataclass
class Dataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list = field(default_factory=lambda: list(FEATURE_NAMES))

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.ndim != 2 or self.features.shape[1] != len(self.feature_names):
            raise SchemaError(f"expected {len(self.feature_names)} feature columns, got {self.features.shape}")
        if self.labels.shape != (self.features.shape[0],):
            raise SchemaError("one label per row required")
        if not np.isin(self.labels, (0, 1)).all():
            raise SchemaError("labels must be 0 or 1")

    def __len__(self) -> int:
        return self.labels.size


def load_csv(path) -> Dataset:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header:
            raise SchemaError(f"{path}: empty file")
        header = [h.strip() for h in header]
        missing = [c for c in FEATURE_NAMES + [LABEL_NAME] if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        cols = [header.index(c) for c in FEATURE_NAMES + [LABEL_NAME]]
        rows = []
        for i, row in enumerate(reader):
            if not row:
                continue
            try:
                rows.append([float(row[c]) for c in cols])
            except (ValueError, IndexError):
                raise SchemaError(f"{path}: non-numeric or missing value in data row {i}") from None
    if not rows:
        raise SchemaError(f"{path}: no data rows")
    table = np.asarray(rows)
    labels = table[:, -1]
    if not np.isin(labels, (0.0, 1.0)).all():
        bad = int(np.flatnonzero(~np.isin(labels, (0.0, 1.0)))[0])
        raise SchemaError(f"{path}: Class must be 0 or 1 (data row {bad})")
    return Dataset(table[:, :-1], labels.astype(np.int64))


def write_csv(ds: Dataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, quoting=csv.QUOTE_NONNUMERIC)
        w.writerow(FEATURE_NAMES + [LABEL_NAME])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [str(int(y))])


def make_fixture(n_rows: int = 2000, n_fraud: int = 150, seed: int = 0) -> Dataset:
    """Synthetic stand-in with the Kaggle schema.

    Non-fraud V-features are standard normal; fraud rows shift a handful of
    components, loosely mimicking the separable directions of the real data.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 2013]))
    x = rng.normal(size=(n_rows, 30))
    x[:, 0] = np.sort(rng.uniform(0, 172792, size=n_rows))
    x[:, 29] = np.round(rng.lognormal(3.0, 1.3, size=n_rows), 2)
    y = np.zeros(n_rows, dtype=np.int64)
    fraud = rng.choice(n_rows, size=n_fraud, replace=False)
    y[fraud] = 1
    shift = np.zeros(30)
    shift[[3, 4, 10, 12, 14, 17]] = [-2.5, 2.0, -2.0, -2.5, -3.0, -1.5]
    x[fraud] += shift + 0.8 * rng.normal(size=(n_fraud, 30)) * (shift != 0)
    return Dataset(x, y)


# ------------------------------------------------------------------ scaling


@dataclass
class ScalerParams:
    kind: str  # "standard" | "minmax" | "l2row"
    center: np.ndarray | None = None
    scale: np.ndarray | None = None
    lo: float = 0.0
    hi: float = 1.0

    @classmethod
    def fit(cls, kind: str, train: np.ndarray, lo: float = 0.0, hi: float = 1.0) -> "ScalerParams":
        train = np.asarray(train, dtype=np.float64)
        if kind == "standard":
            std = train.std(axis=0)
            # constant features pass through unscaled
            return cls(kind, train.mean(axis=0), np.where(std > 0, std, 1.0))
        if kind == "minmax":
            if not lo < hi:
                raise ValueError(f"MinMax range needs lo < hi, got ({lo}, {hi})")
            mn, mx = train.min(axis=0), train.max(axis=0)
            return cls(kind, mn, np.where(mx > mn, mx - mn, 1.0), lo, hi)
        if kind == "l2row":
            return cls(kind)
        raise ValueError(f"unknown scaler {kind!r}")

    def apply(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if self.kind == "standard":
            return (x - self.center) / self.scale
        if self.kind == "minmax":
            out = self.lo + (x - self.center) / self.scale * (self.hi - self.lo)
            return np.clip(out, self.lo, self.hi)
        norms = np.linalg.norm(x, axis=1)
        bad = np.flatnonzero(norms <= 1e-12)
        if bad.size:
            raise NormalizationError(f"row {int(bad[0])} has zero L2 norm")
        return x / norms[:, None]


def fit_apply_scaler(kind: str, train: np.ndarray, *others: np.ndarray, lo: float = 0.0, hi: float = 1.0):
    """Fit on ``train`` only, then transform train and every other array."""
    params = ScalerParams.fit(kind, train, lo, hi)
    return (params.apply(train),) + tuple(params.apply(o) for o in others)


PREPROCESSING = {
    "standard": [("standard", {})],
    "standard+l2": [("standard", {}), ("l2row", {})],
    "minmax": [("minmax", {"lo": 0.0, "hi": math.pi / 2})],
}


# ------------------------------------------------------------------- splits


@dataclass
class SplitSpec:
    seed: int
    train_fraud: int = 390
    train_nonfraud: int = 5000
    test_fraud: int = 101
    test_nonfraud: int = 999
    validation_fraction: float = VALIDATION_FRACTION

    @classmethod
    def for_regime(cls, seed: int, regime: str, fixture: bool = False) -> "SplitSpec":
        if regime not in ("classical", "quantum"):
            raise ConfigurationError(f"unknown regime {regime!r}")
        if fixture:
            return cls(seed, 78, 1000 if regime == "classical" else 200, 20, 200)
        return cls(seed, 390, 5000 if regime == "classical" else 1000, 101, 999)


@dataclass
class SplitData:
    X: np.ndarray
    y: np.ndarray
    indices: np.ndarray

    def __len__(self) -> int:
        return self.y.size


@dataclass
class Splits:
    train: SplitData
    val: SplitData
    test: SplitData
    seed: int
    regime: str

    def manifest(self) -> dict:
        return {
            "seed": self.seed,
            "regime": self.regime,
            "train": self.train.indices.tolist(),
            "val": self.val.indices.tolist(),
            "test": self.test.indices.tolist(),
        }

    def write_manifest(self, path) -> None:
        Path(path).write_text(json.dumps(self.manifest()))

    def scaled(self, preprocessing: str) -> "Splits":
        xs = [self.train.X, self.val.X, self.test.X]
        for kind, kw in PREPROCESSING[preprocessing]:
            xs = list(fit_apply_scaler(kind, *xs, **kw))
        parts = [SplitData(x, s.y, s.indices) for x, s in zip(xs, (self.train, self.val, self.test))]
        return Splits(*parts, seed=self.seed, regime=self.regime)


def make_splits(ds: Dataset, spec: SplitSpec, regime: str = "classical") -> Splits:
    """Test rows are drawn first, then training rows from the remainder; a
    stratified ``validation_fraction`` of training rows becomes validation."""
    rng = np.random.default_rng(np.random.SeedSequence([spec.seed, 0x5B1]))
    fraud = np.flatnonzero(ds.labels == 1)
    clean = np.flatnonzero(ds.labels == 0)
    need_f = spec.test_fraud + spec.train_fraud
    need_c = spec.test_nonfraud + spec.train_nonfraud
    if fraud.size < need_f or clean.size < need_c:
        raise ConfigurationError(
            f"split needs {need_f} fraud / {need_c} non-fraud rows, data has {fraud.size} / {clean.size}"
        )
    fraud = rng.permutation(fraud)
    clean = rng.permutation(clean)
    test_idx = np.concatenate([fraud[: spec.test_fraud], clean[: spec.test_nonfraud]])
    tr_f = fraud[spec.test_fraud: need_f]
    tr_c = clean[spec.test_nonfraud: need_c]
    n_vf = int(round(spec.validation_fraction * tr_f.size))
    n_vc = int(round(spec.validation_fraction * tr_c.size))
    val_idx = np.concatenate([tr_f[:n_vf], tr_c[:n_vc]])
    train_idx = np.concatenate([tr_f[n_vf:], tr_c[n_vc:]])

    def part(idx):
        idx = np.sort(idx)
        return SplitData(ds.features[idx], ds.labels[idx], idx)

    return Splits(part(train_idx), part(val_idx), part(test_idx), spec.seed, regime)


def batch_iterator(split: SplitData, batch_size: int, seed: int, epoch: int):
    """Yield (X, y) mini-batches in an order fixed by (seed, epoch)."""
    if batch_size < 1:
        raise ValueError("batch_size must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0xBA7C, epoch]))
    order = rng.permutation(len(split))
    for start in range(0, order.size, batch_size):
        idx = order[start:start + batch_size]
        yield split.X[idx], split.y[idx]
