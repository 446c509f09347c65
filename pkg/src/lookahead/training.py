"""The lookahead objective, its gradient through the decision map, and the alternating loop.

Objective terms are averaged over rows (not summed), so the regularization
weight is invariant to dataset size. The hinge subgradient at its kink is
taken as zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureMask, TrainConfig
from .decision import ddecided_dparams, decide
from .models import (
    PredictiveModel,
    PropensityModel,
    TrainingDivergedError,
    design_matrix,
    fit_predictive,
    fit_propensity,
)
from .rng import child_seed
from .uncertainty import (
    IntervalModel,
    fit_quantile,
    fit_residual_bootstrap,
    fit_vanilla_bootstrap,
)

_STREAM_ROUND = 100  # substream namespace for per-round interval fits


@dataclass
class RoundTrace:
    """Per-round diagnostics, taken as the round's predictive update begins.

    ``penalty`` and ``active_count`` measure the violation pressure the
    freshly fitted interval model puts on the incoming predictive model,
    i.e. the regularizer value the round's update starts from.
    """

    round: int
    train_mse: float
    penalty: float
    active_count: int


@dataclass
class TrainedBundle:
    """Everything the alternating loop produces."""

    predictive: PredictiveModel
    interval: IntervalModel
    propensity: PropensityModel
    trace: list[RoundTrace]

    def to_json_dict(self) -> dict:
        return {
            "predictive": self.predictive.to_json_dict(),
            "interval": self.interval.to_json_dict(),
            "propensity": self.propensity.to_json_dict(),
            "trace": [vars(t) for t in self.trace],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_json_dict(cls, doc: dict) -> "TrainedBundle":
        return cls(
            PredictiveModel.from_json_dict(doc["predictive"]),
            IntervalModel.from_json_dict(doc["interval"]),
            PropensityModel.from_json_dict(doc["propensity"]),
            [RoundTrace(**t) for t in doc["trace"]],
        )


# ---------------------------------------------------------------------------
# Objective pieces
# ---------------------------------------------------------------------------

def _hinge_margins(f: PredictiveModel, g: IntervalModel, data: Dataset,
                   eta: float, mask: FeatureMask) -> tuple[np.ndarray, np.ndarray]:
    """(margins y - lower(x'), decided points)."""
    decided = decide(f, data, eta, mask).decided
    lower, _ = g.interval_batch(decided)
    return data.y() - lower, decided


def lookahead_penalty(f: PredictiveModel, g: IntervalModel, data: Dataset,
                      eta: float, mask: FeatureMask) -> float:
    """Mean hinge on uncertified improvement: mean_i max{0, y_i - lower(x'_i)}."""
    margins, _ = _hinge_margins(f, g, data, eta, mask)
    return float(np.maximum(margins, 0.0).mean())


def mse(f: PredictiveModel, data: Dataset) -> float:
    r = np.asarray(f.predict(data.features)) - data.y()
    return float(np.mean(r**2))


def lookahead_objective(f: PredictiveModel, g: IntervalModel, data: Dataset,
                        lam: float, eta: float, mask: FeatureMask) -> float:
    """Mean squared error plus lam times the lookahead penalty."""
    return mse(f, data) + lam * lookahead_penalty(f, g, data, eta, mask)


def _mse_grad(vec: np.ndarray, Phi: np.ndarray, y: np.ndarray) -> np.ndarray:
    # same operation order as fit_predictive, so a lam=0 loop matches it bitwise
    w = np.full(y.size, 1.0 / y.size)
    return 2.0 * (Phi.T @ (w * (Phi @ vec - y)))


def grad_lookahead(f: PredictiveModel, g: IntervalModel, data: Dataset,
                   lam: float, eta: float, mask: FeatureMask) -> np.ndarray:
    """Analytic gradient of the lookahead objective w.r.t. f's flattened parameters.

    The interval model's parameters are held fixed; the penalty term
    reaches f only through the decided points, contributing
    -dlower/dx(x')^T . dx'/dparams per active hinge.
    """
    Phi = design_matrix(data.features, f.kind)
    grad = _mse_grad(f.params(), Phi, data.y())
    if lam == 0.0:
        return grad
    margins, decided = _hinge_margins(f, g, data, eta, mask)
    active = margins > 0.0
    if np.any(active):
        gl = g.dlower_batch(decided[active])                       # (a, d)
        J = ddecided_dparams(f, data.features[active], eta, mask)  # (a, d, P)
        grad = grad - lam * np.einsum("ad,adp->p", gl, J) / data.m
    return grad


def naive_objective(f: PredictiveModel, data: Dataset, lam: float,
                    eta: float, mask: FeatureMask) -> float:
    """Mean squared error plus lam times the model's own mean predicted shortfall y - f(x').

    The penalty charges the model linearly whenever its own forecast of the
    decision outcome falls short of the observed label, so training is
    rewarded for inflating f at the decided points.
    """
    decided = decide(f, data, eta, mask).decided
    return mse(f, data) + lam * float(np.mean(data.y() - np.asarray(f.predict(decided))))


def grad_naive(f: PredictiveModel, data: Dataset, lam: float,
               eta: float, mask: FeatureMask) -> np.ndarray:
    """Gradient of the naive objective; the penalty couples f to itself through x'."""
    Phi = design_matrix(data.features, f.kind)
    grad = _mse_grad(f.params(), Phi, data.y())
    if lam == 0.0:
        return grad
    decided = decide(f, data, eta, mask).decided
    Phi_dec = design_matrix(decided, f.kind)                 # direct dependence at x'
    gf = f.grad_x(decided)                                   # (m, d)
    J = ddecided_dparams(f, data.features, eta, mask)        # (m, d, P)
    grad = grad - lam * (Phi_dec.mean(axis=0) + np.einsum("md,mdp->p", gf, J) / data.m)
    return grad


# ---------------------------------------------------------------------------
# Training loops
# ---------------------------------------------------------------------------

def _fit_interval(data: Dataset, weights: np.ndarray, config: TrainConfig, seed: int) -> IntervalModel:
    if config.uncertainty_kind == "vanilla_bootstrap":
        return fit_vanilla_bootstrap(data, weights, config.n_bootstrap, config.tau,
                                     config.learning_rate, config.epochs_init, seed,
                                     kind=config.model_kind)
    if config.uncertainty_kind == "residual_bootstrap":
        return fit_residual_bootstrap(data, weights, config.n_bootstrap, config.tau,
                                      config.learning_rate, config.epochs_init, seed,
                                      kind=config.model_kind)
    return fit_quantile(data, weights, config.tau, config.learning_rate,
                        config.epochs_init, seed, kind=config.model_kind)


def _staged(exc: TrainingDivergedError, round: int, stage: str) -> TrainingDivergedError:
    err = TrainingDivergedError(f"round {round}, stage {stage}: {exc}", epoch=exc.epoch,
                                round=round, stage=stage)
    return err


def train_lookahead(data: Dataset, config: TrainConfig) -> TrainedBundle:
    """Alternating optimization of predictive, propensity, and interval models.

    Initializes the predictive model by plain squared-loss descent, then per
    round: compute decided points from the current model, refit the
    propensity model on (originals, decided), refresh importance weights,
    refit the interval model, and update the predictive model by
    ``epochs_per_round`` descent steps on the regularized objective with the
    interval model held fixed. Decided points are recomputed at every inner
    step, since the penalty depends on the model through them.
    """
    if config.mask.d != data.d:
        raise ValueError(f"mask has {config.mask.d} flags for {data.d} features")
    try:
        f = fit_predictive(data, config.learning_rate, config.epochs_init,
                           kind=config.model_kind)
    except TrainingDivergedError as exc:
        raise _staged(exc, 0, "initial predictive fit") from exc

    Phi = design_matrix(data.features, config.model_kind)
    y = data.y()
    interval: IntervalModel | None = None
    propensity: PropensityModel | None = None
    trace: list[RoundTrace] = []

    for t in range(1, config.rounds + 1):
        decided = decide(f, data, config.eta, config.mask)
        try:
            propensity = fit_propensity(data, decided.as_dataset(), config.learning_rate,
                                        config.epochs_init)
        except TrainingDivergedError as exc:
            raise _staged(exc, t, "propensity fit") from exc
        weights = np.asarray(propensity.weight_of(data.features))
        try:
            interval = _fit_interval(data, weights, config,
                                     child_seed(config.seed, _STREAM_ROUND, t))
        except TrainingDivergedError as exc:
            raise _staged(exc, t, "interval fit") from exc

        margins, _ = _hinge_margins(f, interval, data, config.eta, config.mask)
        trace.append(RoundTrace(round=t, train_mse=mse(f, data),
                                penalty=float(np.maximum(margins, 0.0).mean()),
                                active_count=int(np.sum(margins > 0.0))))

        vec = f.params()
        for epoch in range(config.epochs_per_round):
            f = PredictiveModel.from_params(config.model_kind, data.d, vec)
            if config.lam == 0.0:
                # plain step, bitwise identical to fit_predictive
                vec = vec - config.learning_rate * _mse_grad(vec, Phi, y)
                continue
            grad = grad_lookahead(f, interval, data, config.lam, config.eta, config.mask)
            if not np.all(np.isfinite(grad)):
                raise TrainingDivergedError(
                    f"round {t}, stage predictive update: non-finite gradient at epoch {epoch}",
                    epoch=epoch, round=t, stage="predictive update")
            # backtracking keeps the update a descent step on the round objective;
            # the regularizer's feedback through x' can make the full step unstable
            obj0 = lookahead_objective(f, interval, data, config.lam, config.eta, config.mask)
            step = config.learning_rate
            for _ in range(30):
                cand = vec - step * grad
                obj1 = lookahead_objective(PredictiveModel.from_params(config.model_kind, data.d, cand),
                                           interval, data, config.lam, config.eta, config.mask)
                if np.isfinite(obj1) and obj1 <= obj0:
                    vec = cand
                    break
                step /= 2.0
            else:
                break  # no descent step exists; the round objective is at a (kink) minimum
        if not np.all(np.isfinite(vec)):
            raise TrainingDivergedError(
                f"round {t}, stage predictive update: parameters became non-finite",
                round=t, stage="predictive update")
        f = PredictiveModel.from_params(config.model_kind, data.d, vec)

    return TrainedBundle(f, interval, propensity, trace)


def train_naive(data: Dataset, lam: float, eta: float, mask: FeatureMask,
                lr: float, epochs: int, seed: int = 0,
                kind: str = "linear") -> PredictiveModel:
    """Descent on the coupled objective that trusts the model's own forecast of x'.

    Baseline the lookahead construction argues against: with lam > 0 the
    model can inflate its out-of-distribution predictions to claim
    improvement it cannot deliver.
    """
    del seed
    if lam < 0 or eta < 0:
        raise ValueError("lam and eta must be >= 0")
    vec = np.zeros(design_matrix(data.features[:1], kind).shape[1])
    for epoch in range(epochs):
        f = PredictiveModel.from_params(kind, data.d, vec)
        obj = naive_objective(f, data, lam, eta, mask)
        if not np.isfinite(obj):
            raise TrainingDivergedError(f"naive objective became non-finite at epoch {epoch}",
                                        epoch=epoch)
        vec = vec - lr * grad_naive(f, data, lam, eta, mask)
    if not np.all(np.isfinite(vec)):
        raise TrainingDivergedError(f"parameters became non-finite at epoch {epochs - 1}",
                                    epoch=epochs - 1)
    return PredictiveModel.from_params(kind, data.d, vec)
