"""Datasets, feature masks, training configuration, synthetic data, CSV ingestion."""

from __future__ import annotations

import csv
import json
import warnings
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .rng import STREAM_SPLIT, STREAM_SYNTH_NOISE, STREAM_SYNTH_X, substream

UNCERTAINTY_KINDS = ("vanilla_bootstrap", "residual_bootstrap", "quantile")
MODEL_KINDS = ("linear", "quadratic")


def _frozen(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass
class Dataset:
    """Covariate matrix plus (optionally) an outcome vector.

    The empirical stand-in for the joint population: rows are individuals,
    columns are covariates. A decision set (post-action covariates) is a
    Dataset with ``outcomes=None``.
    """

    features: np.ndarray
    outcomes: np.ndarray | None = None
    feature_names: list[str] | None = None

    def __post_init__(self) -> None:
        X = np.atleast_2d(np.asarray(self.features, dtype=float))
        if X.ndim != 2:
            raise ValueError(f"features must be 2-d, got shape {np.shape(self.features)}")
        m, d = X.shape
        if d < 1:
            raise ValueError("need at least one feature column")
        if m < 2:
            raise ValueError(f"need at least 2 rows, got {m}")
        if not np.all(np.isfinite(X)):
            raise ValueError("features contain NaN or infinite entries")
        self.features = _frozen(X)
        if self.outcomes is not None:
            y = np.asarray(self.outcomes, dtype=float).reshape(-1)
            if y.shape[0] != m:
                raise ValueError(f"{y.shape[0]} outcomes for {m} feature rows")
            if not np.all(np.isfinite(y)):
                raise ValueError("outcomes contain NaN or infinite entries")
            self.outcomes = _frozen(y)
        if self.feature_names is not None:
            if len(self.feature_names) != d:
                raise ValueError(f"{len(self.feature_names)} names for {d} columns")
            self.feature_names = list(self.feature_names)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]

    def y(self) -> np.ndarray:
        """Outcome vector; raises if this is an unlabeled decision set."""
        if self.outcomes is None:
            raise ValueError("dataset has no outcomes")
        return self.outcomes

    def take(self, idx: np.ndarray) -> "Dataset":
        """Row subset (used by splitting and resampling)."""
        y = None if self.outcomes is None else self.outcomes[idx]
        return Dataset(self.features[idx], y, self.feature_names)

    def where(self, predicate) -> "Dataset":
        """Rows for which ``predicate(x_row, y)`` is true.

        Hook for building biased active subsets; the selection rule is
        caller-supplied.
        """
        keep = np.array([bool(predicate(x, y)) for x, y in zip(self.features, self.y())])
        return self.take(np.flatnonzero(keep))


@dataclass
class FeatureMask:
    """Boolean flags over the feature columns; true marks a mutable coordinate."""

    flags: np.ndarray

    def __post_init__(self) -> None:
        f = np.asarray(self.flags, dtype=bool).reshape(-1)
        if f.size < 1:
            raise ValueError("mask needs at least one flag")
        f.setflags(write=False)
        self.flags = f

    @classmethod
    def all_mutable(cls, d: int) -> "FeatureMask":
        return cls(np.ones(d, dtype=bool))

    @classmethod
    def from_names(cls, feature_names: list[str], mutable: list[str]) -> "FeatureMask":
        unknown = [c for c in mutable if c not in feature_names]
        if unknown:
            raise ValueError(f"mutable columns not in dataset: {unknown}")
        return cls(np.array([name in mutable for name in feature_names], dtype=bool))

    @property
    def d(self) -> int:
        return self.flags.size


@dataclass
class SplitSpec:
    """Deterministic random train/test partition."""

    train_fraction: float = 0.75
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError(f"train_fraction must be in (0,1), got {self.train_fraction}")


@dataclass
class TrainConfig:
    """All scalars of the alternating training loop.

    ``lam`` is the improvement-regularization weight (serialized as
    "lambda"), ``eta`` the user decision step size, ``tau`` the confidence
    level, ``rounds`` the number of alternation rounds, ``n_bootstrap`` the
    ensemble size of bootstrap interval models. Objective terms are
    averaged over rows, so ``lam`` is dataset-size invariant. Propensity
    and interval fits reuse ``epochs_init`` as their iteration budget.
    """

    lam: float = 4.0
    eta: float = 1.25
    tau: float = 0.95
    rounds: int = 5
    n_bootstrap: int = 10
    learning_rate: float = 0.1
    epochs_init: int = 1000
    epochs_per_round: int = 100
    seed: int = 0
    mask: FeatureMask = field(default_factory=lambda: FeatureMask.all_mutable(1))
    uncertainty_kind: str = "vanilla_bootstrap"
    model_kind: str = "quadratic"

    def __post_init__(self) -> None:
        if self.lam < 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        if self.rounds < 1 or self.n_bootstrap < 1:
            raise ValueError("rounds and n_bootstrap must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.epochs_init < 1 or self.epochs_per_round < 1:
            raise ValueError("epoch counts must be positive")
        if self.uncertainty_kind not in UNCERTAINTY_KINDS:
            raise ValueError(f"uncertainty_kind must be one of {UNCERTAINTY_KINDS}")
        if self.model_kind not in MODEL_KINDS:
            raise ValueError(f"model_kind must be one of {MODEL_KINDS}")

    def with_lambda(self, lam: float) -> "TrainConfig":
        return replace(self, lam=lam)

    def to_json_dict(self, mutable_columns: list[str] | None = None) -> dict:
        doc = {
            "lambda": self.lam,
            "eta": self.eta,
            "tau": self.tau,
            "rounds": self.rounds,
            "n_bootstrap": self.n_bootstrap,
            "learning_rate": self.learning_rate,
            "epochs_init": self.epochs_init,
            "epochs_per_round": self.epochs_per_round,
            "seed": self.seed,
            "uncertainty_kind": self.uncertainty_kind,
            "model_kind": self.model_kind,
        }
        if mutable_columns is not None:
            doc["mutable_columns"] = list(mutable_columns)
        return doc


def config_from_json(doc: dict | str, feature_names: list[str] | None = None) -> TrainConfig:
    """Build a TrainConfig from its JSON document form.

    ``mutable_columns`` (names) is resolved against ``feature_names``;
    without either, every coordinate is mutable.
    """
    if isinstance(doc, str):
        doc = json.loads(doc)
    known = {
        "lambda", "eta", "tau", "rounds", "n_bootstrap", "learning_rate",
        "epochs_init", "epochs_per_round", "seed", "uncertainty_kind",
        "model_kind", "mutable_columns",
    }
    unknown = sorted(set(doc) - known)
    if unknown:
        raise ValueError(f"unknown config fields: {unknown}")
    kwargs = {k: v for k, v in doc.items() if k not in ("lambda", "mutable_columns")}
    if "lambda" in doc:
        kwargs["lam"] = doc["lambda"]
    if feature_names is not None:
        mutable = doc.get("mutable_columns")
        if mutable is None:
            kwargs["mask"] = FeatureMask.all_mutable(len(feature_names))
        else:
            kwargs["mask"] = FeatureMask.from_names(feature_names, list(mutable))
    return TrainConfig(**kwargs)


# ---------------------------------------------------------------------------
# Synthetic data
# ---------------------------------------------------------------------------

SYNTH_X_MEAN = -0.8
SYNTH_X_SD = 0.5  # second argument of the sampling normal, read as a stdev
SYNTH_NOISE_SD = 0.25


def synthetic_truth(x) -> np.ndarray | float:
    """Ground-truth curve of the synthetic benchmark: -0.8 x^2 + 0.5 x + 0.1."""
    x = np.asarray(x, dtype=float)
    out = -0.8 * x**2 + 0.5 * x + 0.1
    return float(out) if out.ndim == 0 else out


def generate_synthetic(
    m: int,
    seed: int,
    x_mean: float = SYNTH_X_MEAN,
    x_sd: float = SYNTH_X_SD,
    noise_sd: float = SYNTH_NOISE_SD,
) -> Dataset:
    """One-dimensional benchmark dataset: x ~ N(x_mean, x_sd^2), y = truth(x) + noise."""
    if m < 2:
        raise ValueError(f"need m >= 2, got {m}")
    x = substream(seed, STREAM_SYNTH_X).normal(x_mean, x_sd, size=m)
    eps = substream(seed, STREAM_SYNTH_NOISE).normal(0.0, noise_sd, size=m)
    y = synthetic_truth(x) + eps
    return Dataset(x.reshape(-1, 1), y, feature_names=["x"])


# ---------------------------------------------------------------------------
# CSV ingestion
# ---------------------------------------------------------------------------

def load_csv(path: str | Path, target_column: str, mutable_columns: list[str]) -> tuple[Dataset, FeatureMask]:
    """Read a numeric, comma-separated, headered file into (Dataset, FeatureMask).

    The target column becomes the outcome vector; the mask is true exactly
    on the listed mutable columns. Bad cells are reported with their
    row/column location (rows counted from 1 including the header).
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such data file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if target_column not in header:
            raise ValueError(f"{path}: target column {target_column!r} not in header {header}")
        rows: list[list[float]] = []
        for lineno, raw in enumerate(reader, start=2):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise ValueError(f"{path}:{lineno}: expected {len(header)} cells, got {len(raw)}")
            parsed = []
            for col, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise ValueError(f"{path}:{lineno}: non-numeric cell in column {col!r}: {cell!r}") from None
                if not np.isfinite(v):
                    raise ValueError(f"{path}:{lineno}: non-finite cell in column {col!r}: {cell!r}")
                parsed.append(v)
            rows.append(parsed)
    if len(rows) < 2:
        raise ValueError(f"{path}: need at least 2 data rows, got {len(rows)}")
    table = np.array(rows, dtype=float)
    t = header.index(target_column)
    feature_names = [h for h in header if h != target_column]
    features = np.delete(table, t, axis=1)
    mask = FeatureMask.from_names(feature_names, list(mutable_columns))
    return Dataset(features, table[:, t], feature_names), mask


# ---------------------------------------------------------------------------
# Standardization and splitting
# ---------------------------------------------------------------------------

@dataclass
class Scaler:
    """Train-set statistics for z-scoring features and min-max scaling outcomes."""

    feature_mean: np.ndarray
    feature_scale: np.ndarray
    y_min: float
    y_span: float

    def transform(self, data: Dataset) -> Dataset:
        X = (data.features - self.feature_mean) / self.feature_scale
        y = None if data.outcomes is None else (data.outcomes - self.y_min) / self.y_span
        return Dataset(X, y, data.feature_names)

    def inverse_features(self, X: np.ndarray) -> np.ndarray:
        return np.asarray(X) * self.feature_scale + self.feature_mean

    def inverse_outcomes(self, y) -> np.ndarray:
        return np.asarray(y) * self.y_span + self.y_min


def standardize(train: Dataset, test: Dataset) -> tuple[Dataset, Dataset, Scaler]:
    """Z-score features and min-max outcomes to [0,1], using train statistics only.

    Zero-variance feature columns are reported via a warning and passed
    through unscaled; a constant outcome likewise.
    """
    mean = train.features.mean(axis=0)
    sd = train.features.std(axis=0)
    flat = np.flatnonzero(sd < 1e-12)
    if flat.size:
        names = train.feature_names or [f"col{j}" for j in range(train.d)]
        warnings.warn(f"zero-variance feature columns passed through unscaled: {[names[j] for j in flat]}")
        sd = sd.copy()
        sd[flat] = 1.0
        mean = mean.copy()
        mean[flat] = 0.0
    y = train.y()
    y_min, y_max = float(y.min()), float(y.max())
    span = y_max - y_min
    if span < 1e-12:
        warnings.warn("constant outcome column passed through unscaled")
        y_min, span = 0.0, 1.0
    scaler = Scaler(mean, sd, y_min, span)
    return scaler.transform(train), scaler.transform(test), scaler


def split(data: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset]:
    """Random disjoint train/test partition, deterministic given the seed."""
    m = data.m
    if m < 4:
        raise ValueError(f"need m >= 4 to split, got {m}")
    n_train = int(round(m * spec.train_fraction))
    n_train = min(max(n_train, 1), m - 1)
    perm = substream(spec.seed, STREAM_SPLIT).permutation(m)
    train_idx = np.sort(perm[:n_train])
    test_idx = np.sort(perm[n_train:])
    return data.take(train_idx), data.take(test_idx)
