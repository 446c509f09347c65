"""Interval models targeted at the decision-shifted distribution via importance weights.

Three constructions: vanilla bootstrap, residual bootstrap, and two-sided
weighted quantile regression. All expose a lower bound that is
differentiable in the query point, so the predictive model can be trained
through the interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist

import numpy as np

from .data import Dataset
from .models import PredictiveModel, fit_pinball, fit_predictive
from .rng import STREAM_BOOTSTRAP, STREAM_RESIDUALS, substream

_SIGMA_FLOOR = 1e-12  # below this the std gradient is defined as zero


def effective_sample_size(weights, formula: str = "mean_over_var") -> float:
    """Size correction for weighted resampling.

    ``mean_over_var`` is mean(w)/var(w) with the population variance;
    ``kish`` is the usual (sum w)^2 / sum w^2. Both are capped above at the
    number of weights, and a (near) zero variance returns that cap.
    """
    if formula not in ("mean_over_var", "kish"):
        raise ValueError(f"unknown formula: {formula!r}")
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.size == 0:
        raise ValueError("weights must be nonempty")
    m = float(w.size)
    var = float(w.var())
    if var < 1e-12:
        return m
    if formula == "mean_over_var":
        ess = float(w.mean()) / var
    else:
        ess = float(w.sum()) ** 2 / float(w @ w)
    return min(ess, m)


def two_sided_z(tau: float) -> float:
    """Standard-normal quantile at (1+tau)/2: per-side tail mass (1-tau)/2."""
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0,1), got {tau}")
    return NormalDist().inv_cdf((1.0 + tau) / 2.0)


@dataclass
class IntervalModel:
    """Uncertainty model g mapping a point to a [lower, upper] pair.

    Bootstrap kinds combine k submodels as mean +- z * sigma, with sigma
    the population standard deviation of the submodel predictions. The
    quantile kind holds one regressor per side.
    """

    kind: str
    tau: float
    submodels: list[PredictiveModel] = field(default_factory=list)
    z: float = 0.0
    lower_model: PredictiveModel | None = None
    upper_model: PredictiveModel | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("vanilla_bootstrap", "residual_bootstrap", "quantile"):
            raise ValueError(f"unknown interval kind: {self.kind!r}")
        if not 0.0 < self.tau < 1.0:
            raise ValueError(f"tau must be in (0,1), got {self.tau}")
        if self.kind == "quantile":
            if self.lower_model is None or self.upper_model is None:
                raise ValueError("quantile kind needs lower_model and upper_model")
        else:
            if len(self.submodels) < 2:
                raise ValueError("bootstrap kinds need at least 2 submodels")

    @property
    def d(self) -> int:
        return self.lower_model.d if self.kind == "quantile" else self.submodels[0].d

    # -- evaluation --------------------------------------------------------

    def _ensemble(self, X: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(mu, sigma, per-submodel predictions) at the batch X."""
        preds = np.column_stack([g.predict(X) for g in self.submodels])
        mu = preds.mean(axis=1)
        sigma = np.sqrt(preds.var(axis=1))
        return mu, sigma, preds

    def interval_batch(self, X) -> tuple[np.ndarray, np.ndarray]:
        """Lower/upper bounds at each row of X."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "quantile":
            lo = np.asarray(self.lower_model.predict(X))
            up = np.asarray(self.upper_model.predict(X))
            return np.minimum(lo, up), np.maximum(lo, up)
        mu, sigma, _ = self._ensemble(X)
        return mu - self.z * sigma, mu + self.z * sigma

    def predict_interval(self, x) -> tuple[float, float]:
        """(lower, upper) at a single point; lower <= upper always."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"point has shape {x.shape}, model expects ({self.d},)")
        lo, up = self.interval_batch(x[None, :])
        return float(lo[0]), float(up[0])

    def dlower_batch(self, X) -> np.ndarray:
        """Gradient of the lower bound w.r.t. the query point, per row: (m, d)."""
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.kind == "quantile":
            lo = np.asarray(self.lower_model.predict(X))
            up = np.asarray(self.upper_model.predict(X))
            g_lo = self.lower_model.grad_x(X)
            g_up = self.upper_model.grad_x(X)
            # follow whichever side currently is the lower bound
            return np.where((lo <= up)[:, None], g_lo, g_up)
        mu, sigma, preds = self._ensemble(X)
        grads = np.stack([g.grad_x(X) for g in self.submodels], axis=1)  # (m, k, d)
        dmu = grads.mean(axis=1)
        dev = preds - mu[:, None]
        dvar = 2.0 * np.einsum("mk,mkd->md", dev, grads - dmu[:, None, :]) / len(self.submodels)
        with np.errstate(invalid="ignore", divide="ignore"):
            dsigma = np.where(sigma[:, None] > _SIGMA_FLOOR, dvar / (2.0 * sigma[:, None]), 0.0)
        return dmu - self.z * dsigma

    def dlower_dx(self, x) -> np.ndarray:
        """Gradient of the lower bound at a single point: (d,)."""
        x = np.asarray(x, dtype=float)
        if x.shape != (self.d,):
            raise ValueError(f"point has shape {x.shape}, model expects ({self.d},)")
        return self.dlower_batch(x[None, :])[0]

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        doc: dict = {"kind": self.kind, "tau": self.tau}
        if self.kind == "quantile":
            doc["lower_model"] = self.lower_model.to_json_dict()
            doc["upper_model"] = self.upper_model.to_json_dict()
        else:
            doc["z"] = self.z
            doc["submodels"] = [g.to_json_dict() for g in self.submodels]
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "IntervalModel":
        if doc["kind"] == "quantile":
            return cls(doc["kind"], doc["tau"],
                       lower_model=PredictiveModel.from_json_dict(doc["lower_model"]),
                       upper_model=PredictiveModel.from_json_dict(doc["upper_model"]))
        return cls(doc["kind"], doc["tau"],
                   submodels=[PredictiveModel.from_json_dict(g) for g in doc["submodels"]],
                   z=doc["z"])


def _check_weights(data: Dataset, weights) -> np.ndarray:
    w = np.asarray(weights, dtype=float).reshape(-1)
    if w.shape != (data.m,):
        raise ValueError(f"need {data.m} weights, got {w.shape}")
    if np.any(w <= 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite and positive")
    return w


def fit_vanilla_bootstrap(
    data: Dataset,
    weights,
    k: int,
    tau: float,
    lr: float,
    epochs: int,
    seed: int,
    kind: str = "linear",
) -> IntervalModel:
    """Ensemble of k squared-loss fits on weight-proportional resamples.

    Each replicate draws ceil(ESS(w)) rows with replacement, with
    probabilities proportional to the weights, so in expectation every
    submodel minimizes the weighted squared loss (i.e. targets the shifted
    distribution) while seeing an honestly down-sized sample. Replicates
    use independent substreams of (seed, replicate).
    """
    if k < 2:
        raise ValueError(f"need k >= 2 submodels, got {k}")
    w = _check_weights(data, weights)
    n_rows = max(2, math.ceil(effective_sample_size(w)))
    p = w / w.sum()
    submodels = []
    for j in range(k):
        idx = substream(seed, STREAM_BOOTSTRAP, j).choice(data.m, size=n_rows, replace=True, p=p)
        submodels.append(fit_predictive(data.take(idx), lr, epochs, kind=kind))
    return IntervalModel("vanilla_bootstrap", tau, submodels=submodels, z=two_sided_z(tau))


def fit_residual_bootstrap(
    data: Dataset,
    weights,
    k: int,
    tau: float,
    lr: float,
    epochs: int,
    seed: int,
    kind: str = "linear",
) -> IntervalModel:
    """Ensemble of k weighted fits to residual-resampled pseudo-labels.

    A base model is fit to the weighted data; its residuals are resampled
    with replacement and added back onto the original labels, and each
    submodel is fit (weighted squared loss) to one such pseudo-label draw.
    Combination is identical to the vanilla bootstrap.
    """
    if k < 2:
        raise ValueError(f"need k >= 2 submodels, got {k}")
    w = _check_weights(data, weights)
    base = fit_predictive(data, lr, epochs, kind=kind, sample_weight=w)
    y = data.y()
    r = y - np.asarray(base.predict(data.features))
    submodels = []
    for j in range(k):
        idx = substream(seed, STREAM_RESIDUALS, j).integers(0, data.m, size=data.m)
        pseudo = Dataset(data.features, y + r[idx], data.feature_names)
        submodels.append(fit_predictive(pseudo, lr, epochs, kind=kind, sample_weight=w))
    return IntervalModel("residual_bootstrap", tau, submodels=submodels, z=two_sided_z(tau))


def fit_quantile(
    data: Dataset,
    weights,
    tau: float,
    lr: float,
    epochs: int,
    seed: int = 0,
    kind: str = "linear",
) -> IntervalModel:
    """Two-sided weighted quantile regression at per-side levels (1 -+ tau)/2."""
    del seed  # pinball descent from zero init draws no randomness
    if not 0.0 < tau < 1.0:
        raise ValueError(f"tau must be in (0,1), got {tau}")
    w = _check_weights(data, weights)
    lower = fit_pinball(data, w, (1.0 - tau) / 2.0, lr, epochs, kind=kind)
    upper = fit_pinball(data, w, (1.0 + tau) / 2.0, lr, epochs, kind=kind)
    return IntervalModel("quantile", tau, lower_model=lower, upper_model=upper)
