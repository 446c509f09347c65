"""Ground-truth-oracle evaluation and the accuracy-vs-improvement sweep."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

import numpy as np

from .data import Dataset, FeatureMask, SplitSpec, TrainConfig, split, synthetic_truth
from .decision import decide
from .models import PredictiveModel, TrainingDivergedError, fit_predictive
from .training import TrainedBundle, train_lookahead


@dataclass
class Oracle:
    """A frozen ground-truth regressor used only to score counterfactual outcomes."""

    model: PredictiveModel

    def predict(self, x):
        return self.model.predict(x)


def synthetic_oracle() -> Oracle:
    """The analytic truth of the synthetic benchmark, -0.8 x^2 + 0.5 x + 0.1."""
    return Oracle(PredictiveModel("quadratic", theta=[0.5], bias=0.1, theta_sq=[-0.8]))


def fit_oracle(full_data: Dataset, kind: str = "quadratic_poly",
               lr: float = 0.1, epochs: int = 5000, seed: int = 0) -> Oracle:
    """Quadratic ground-truth model fit by squared loss on the entire dataset."""
    if kind != "quadratic_poly":
        raise ValueError(f"unknown oracle kind: {kind!r}")
    return Oracle(fit_predictive(full_data, lr, epochs, seed, kind="quadratic"))


@dataclass
class EvalReport:
    """Held-out accuracy plus decision quality under the oracle."""

    rmse: float
    improvement_rate: float
    improvement_magnitude: float
    n_test: int

    def to_json_dict(self) -> dict:
        return vars(self)


@dataclass
class FrontierPoint:
    lam: float
    report: EvalReport


class FrontierError(RuntimeError):
    """Training failed for one sweep point."""

    def __init__(self, lam: float, cause: Exception):
        super().__init__(f"training failed at lambda={lam}: {cause}")
        self.lam = lam
        self.cause = cause


def evaluate(f: PredictiveModel, oracle: Oracle, test: Dataset, eta: float,
             mask: FeatureMask, improvement_vs_oracle: bool = False) -> EvalReport:
    """RMSE on the test labels plus improvement of oracle(x') over them.

    Improvement counts strict gains only (ties do not improve). With
    ``improvement_vs_oracle`` the comparison baseline is oracle(x) instead of
    the observed label, removing label noise from the decision metrics.
    """
    y = test.y()
    pred = np.asarray(f.predict(test.features))
    decided = decide(f, test, eta, mask).decided
    y_new = np.asarray(oracle.predict(decided))
    base = np.asarray(oracle.predict(test.features)) if improvement_vs_oracle else y
    return EvalReport(
        rmse=float(np.sqrt(np.mean((pred - y) ** 2))),
        improvement_rate=float(np.mean(y_new > base)),
        improvement_magnitude=float(np.mean(y_new - base)),
        n_test=test.m,
    )


def frontier_sweep(data: Dataset, config: TrainConfig, lambda_grid: list[float],
                   oracle: Oracle, train_fraction: float = 0.75) -> list[FrontierPoint]:
    """Train and evaluate one bundle per regularization weight, sharing seed and split.

    Points come back sorted by lambda ascending. A training abort is
    re-raised as FrontierError tagging the offending lambda.
    """
    if not lambda_grid:
        raise ValueError("lambda grid must be nonempty")
    train, test = split(data, SplitSpec(train_fraction, config.seed))
    points = []
    for lam in sorted(float(v) for v in lambda_grid):
        try:
            bundle = train_lookahead(train, replace(config, lam=lam))
        except (TrainingDivergedError, ValueError) as exc:
            raise FrontierError(lam, exc) from exc
        report = evaluate(bundle.predictive, oracle, test, config.eta, config.mask)
        points.append(FrontierPoint(lam, report))
    return points


FRONTIER_HEADER = "lambda,rmse,improvement_rate,improvement_magnitude"


def frontier_to_csv(points: list[FrontierPoint]) -> str:
    lines = [FRONTIER_HEADER]
    for p in points:
        r = p.report
        lines.append(f"{p.lam!r},{r.rmse!r},{r.improvement_rate!r},{r.improvement_magnitude!r}")
    return "\n".join(lines) + "\n"


def frontier_to_json(points: list[FrontierPoint],
                     failures: list[dict] | None = None) -> str:
    doc = {"points": [{"lambda": p.lam, **p.report.to_json_dict()} for p in points]}
    if failures is not None:
        doc["failures"] = failures
    return json.dumps(doc, indent=2, sort_keys=True)


def bundle_with_report(bundle: TrainedBundle, report: EvalReport) -> dict:
    return {"bundle": bundle.to_json_dict(), "report": report.to_json_dict()}
