"""Parametric regressors (linear, quadratic) and the logistic propensity model.

The regressors expose analytic value, input-gradient, and the Jacobian of
that input-gradient with respect to the parameters, so that training can
push gradients through induced decision points.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

WEIGHT_CLAMP = 1e3  # importance weights are kept inside [1/WEIGHT_CLAMP, WEIGHT_CLAMP]
_LOG_CLAMP = math.log(WEIGHT_CLAMP)
PROPENSITY_L2 = 1e-3  # keeps logits bounded when the two samples are separable


class TrainingDivergedError(RuntimeError):
    """A fit produced a non-finite loss."""

    def __init__(self, message: str, epoch: int | None = None, round: int | None = None,
                 stage: str | None = None):
        super().__init__(message)
        self.epoch = epoch
        self.round = round
        self.stage = stage


@dataclass
class PredictiveModel:
    """Regressor f(x) = theta.x + bias, plus theta_sq.x^2 for the quadratic kind.

    Flattened parameter order is [theta, theta_sq (quadratic only), bias].
    """

    kind: str
    theta: np.ndarray
    bias: float = 0.0
    theta_sq: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("linear", "quadratic"):
            raise ValueError(f"unknown model kind: {self.kind!r}")
        self.theta = np.asarray(self.theta, dtype=float).reshape(-1)
        self.bias = float(self.bias)
        if self.kind == "quadratic":
            if self.theta_sq is None:
                self.theta_sq = np.zeros_like(self.theta)
            self.theta_sq = np.asarray(self.theta_sq, dtype=float).reshape(-1)
            if self.theta_sq.shape != self.theta.shape:
                raise ValueError("theta and theta_sq must have equal length")
        elif self.theta_sq is not None:
            raise ValueError("theta_sq is only valid for the quadratic kind")
        if not (np.all(np.isfinite(self.theta)) and np.isfinite(self.bias)):
            raise ValueError("parameters must be finite")
        if self.kind == "quadratic" and not np.all(np.isfinite(self.theta_sq)):
            raise ValueError("parameters must be finite")

    @property
    def d(self) -> int:
        return self.theta.size

    @property
    def n_params(self) -> int:
        return (2 * self.d if self.kind == "quadratic" else self.d) + 1

    def params(self) -> np.ndarray:
        """Flattened parameter vector [theta, theta_sq?, bias]."""
        parts = [self.theta] if self.kind == "linear" else [self.theta, self.theta_sq]
        return np.concatenate(parts + [[self.bias]])

    @classmethod
    def from_params(cls, kind: str, d: int, vec: np.ndarray) -> "PredictiveModel":
        vec = np.asarray(vec, dtype=float).reshape(-1)
        if kind == "linear":
            if vec.size != d + 1:
                raise ValueError(f"expected {d + 1} params, got {vec.size}")
            return cls("linear", vec[:d], vec[d])
        if vec.size != 2 * d + 1:
            raise ValueError(f"expected {2 * d + 1} params, got {vec.size}")
        return cls("quadratic", vec[:d], vec[2 * d], vec[d:2 * d])

    def _check_dim(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"point has dimension {x.shape[-1]}, model has {self.d}")
        return x

    def predict(self, x) -> float | np.ndarray:
        """Model value at a point (length-d vector) or a batch of rows (m x d)."""
        x = self._check_dim(x)
        out = x @ self.theta + self.bias
        if self.kind == "quadratic":
            out = out + (x**2) @ self.theta_sq
        return float(out) if out.ndim == 0 else out

    def grad_x(self, x) -> np.ndarray:
        """Input gradient at a point (d,) or batch (m, d)."""
        x = self._check_dim(x)
        if self.kind == "linear":
            return np.broadcast_to(self.theta, x.shape).copy()
        return self.theta + 2.0 * self.theta_sq * x

    def dgrad_dparams(self, x) -> np.ndarray:
        """Jacobian of grad_x w.r.t. the flattened parameters: (d, n_params).

        Linear: identity on the theta block, zero elsewhere. Quadratic adds
        a 2x diagonal on the theta_sq block. Batch input gives (m, d, n_params).
        """
        x = self._check_dim(x)
        single = x.ndim == 1
        X = np.atleast_2d(x)
        m, d = X.shape
        J = np.zeros((m, d, self.n_params))
        J[:, np.arange(d), np.arange(d)] = 1.0
        if self.kind == "quadratic":
            J[:, np.arange(d), d + np.arange(d)] = 2.0 * X
        return J[0] if single else J

    def to_json_dict(self) -> dict:
        doc = {"kind": self.kind, "theta": self.theta.tolist(), "bias": self.bias}
        if self.kind == "quadratic":
            doc["theta_sq"] = self.theta_sq.tolist()
        return doc

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PredictiveModel":
        return cls(doc["kind"], np.asarray(doc["theta"]), doc["bias"],
                   np.asarray(doc["theta_sq"]) if "theta_sq" in doc else None)


def design_matrix(X: np.ndarray, kind: str) -> np.ndarray:
    """Rows phi(x) such that f(x) = phi(x) . params: [x | x^2? | 1]."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    cols = [X, X**2] if kind == "quadratic" else [X]
    return np.hstack(cols + [np.ones((X.shape[0], 1))])


def fit_predictive(
    data,
    lr: float,
    epochs: int,
    seed: int = 0,
    kind: str = "linear",
    sample_weight: np.ndarray | None = None,
) -> PredictiveModel:
    """Full-batch gradient descent on the (weighted) mean squared loss.

    Parameters start at zero, so the fit is deterministic; ``seed`` is
    accepted for interface uniformity with the resampling-based fits.
    Raises TrainingDivergedError naming the epoch if the loss leaves the
    finite range.
    """
    del seed
    y = data.y()
    Phi = design_matrix(data.features, kind)
    if sample_weight is None:
        w = np.full(data.m, 1.0 / data.m)
    else:
        w = np.asarray(sample_weight, dtype=float)
        if w.shape != (data.m,) or np.any(w < 0):
            raise ValueError("sample_weight must be a nonnegative length-m vector")
        w = w / w.sum()
    vec = np.zeros(Phi.shape[1])
    for epoch in range(epochs):
        r = Phi @ vec - y
        loss = float(w @ r**2)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"squared loss became non-finite at epoch {epoch}", epoch=epoch)
        grad = 2.0 * (Phi.T @ (w * r))
        vec = vec - lr * grad
    if not np.all(np.isfinite(vec)):
        raise TrainingDivergedError(f"parameters became non-finite at epoch {epochs - 1}", epoch=epochs - 1)
    return PredictiveModel.from_params(kind, data.d, vec)


def fit_pinball(
    data,
    weights: np.ndarray | None,
    level: float,
    lr: float,
    epochs: int,
    kind: str = "linear",
) -> PredictiveModel:
    """Gradient descent on the weighted tilted (pinball) loss at a quantile level.

    The loss per row is max{(level-1)(y - yhat), level(y - yhat)}, whose
    minimizer over constants is the level-quantile; the subgradient at the
    kink is taken as zero.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"quantile level must be in (0,1), got {level}")
    y = data.y()
    Phi = design_matrix(data.features, kind)
    if weights is None:
        w = np.full(data.m, 1.0 / data.m)
    else:
        w = np.asarray(weights, dtype=float)
        w = w / w.sum()
    vec = np.zeros(Phi.shape[1])
    for epoch in range(epochs):
        u = y - Phi @ vec
        loss = float(w @ np.maximum((level - 1.0) * u, level * u))
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"pinball loss became non-finite at epoch {epoch}", epoch=epoch)
        # d/dyhat of the tilted loss: -level above the fit, 1-level below it
        dl = np.where(u > 0, -level, np.where(u < 0, 1.0 - level, 0.0))
        vec -= lr * (Phi.T @ (w * dl))
    return PredictiveModel.from_params(kind, data.d, vec)


def pinball_loss(y, yhat, level: float) -> float:
    """Mean tilted loss with slopes (level-1) and level."""
    u = np.asarray(y, dtype=float) - np.asarray(yhat, dtype=float)
    return float(np.mean(np.maximum((level - 1.0) * u, level * u)))


@dataclass
class PropensityModel:
    """Logistic discriminator h between original and decided covariates.

    Importance weights are e^{h(x)}, clamped for numerical safety.
    """

    weights: np.ndarray
    bias: float = 0.0

    def __post_init__(self) -> None:
        self.weights = np.asarray(self.weights, dtype=float).reshape(-1)
        self.bias = float(self.bias)
        if not (np.all(np.isfinite(self.weights)) and np.isfinite(self.bias)):
            raise ValueError("parameters must be finite")

    @property
    def d(self) -> int:
        return self.weights.size

    def logit(self, x) -> float | np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.d:
            raise ValueError(f"point has dimension {x.shape[-1]}, model has {self.d}")
        out = x @ self.weights + self.bias
        return float(out) if out.ndim == 0 else out

    def weight_of(self, x) -> float | np.ndarray:
        """Importance weight e^{h(x)}, clamped to [1e-3, 1e3]."""
        z = np.clip(self.logit(x), -_LOG_CLAMP, _LOG_CLAMP)
        out = np.exp(z)
        return float(out) if np.ndim(out) == 0 else out

    def to_json_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "bias": self.bias}

    @classmethod
    def from_json_dict(cls, doc: dict) -> "PropensityModel":
        return cls(np.asarray(doc["weights"]), doc["bias"])


def _sigmoid(t: np.ndarray) -> np.ndarray:
    out = np.empty_like(t)
    pos = t >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-t[pos]))
    e = np.exp(t[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fit_propensity(originals, decided, lr: float, epochs: int) -> PropensityModel:
    """Logistic regression separating originals (label 0) from decided points (label 1).

    Minimizes the mean log-loss per set by full-batch gradient descent from
    zero, with a small L2 penalty on the weights so separable samples do
    not drive the logits unbounded.
    """
    if originals.d != decided.d:
        raise ValueError(f"dimension mismatch: {originals.d} vs {decided.d}")
    X0, X1 = originals.features, decided.features
    w = np.zeros(originals.d)
    b = 0.0
    for epoch in range(epochs):
        h0 = X0 @ w + b
        h1 = X1 @ w + b
        loss = float(np.mean(np.logaddexp(0.0, h0)) + np.mean(np.logaddexp(0.0, -h1))
                     + PROPENSITY_L2 * w @ w)
        if not np.isfinite(loss):
            raise TrainingDivergedError(f"propensity loss became non-finite at epoch {epoch}", epoch=epoch)
        s0 = _sigmoid(h0)
        s1 = _sigmoid(h1) - 1.0
        grad_w = X0.T @ s0 / X0.shape[0] + X1.T @ s1 / X1.shape[0] + 2.0 * PROPENSITY_L2 * w
        grad_b = s0.mean() + s1.mean()
        w -= lr * grad_w
        b -= lr * grad_b
    return PropensityModel(w, b)
