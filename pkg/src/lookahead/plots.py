"""Figure rendering for CLI runs: fit curves, training traces, frontier curves."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .data import Dataset, FeatureMask
from .decision import decide
from .evaluation import FrontierPoint, Oracle
from .models import PredictiveModel
from .training import RoundTrace


def plot_fit(train: Dataset, oracle: Oracle, models: dict[str, PredictiveModel],
             eta: float, mask: FeatureMask, path: str | Path) -> None:
    """One-dimensional fit overview: data, truth, fitted curves, decided points."""
    if train.d != 1:
        raise ValueError("fit plot requires one-dimensional data")
    x = train.features[:, 0]
    lo = min(x.min(), -2.0)
    hi = max(x.max() + 2.5 * eta, 1.0)
    grid = np.linspace(lo, hi, 400).reshape(-1, 1)

    fig, ax = plt.subplots(figsize=(7, 4.5))
    ax.scatter(x, train.y(), s=18, color="black", zorder=3, label="train data")
    ax.plot(grid[:, 0], oracle.predict(grid), color="gray", lw=2, label="ground truth")
    for (label, model), color in zip(models.items(), ("tab:blue", "tab:orange", "tab:green")):
        ax.plot(grid[:, 0], model.predict(grid), color=color, lw=1.5, label=label)
        moved = decide(model, train, eta, mask).decided[:, 0]
        ax.plot(moved, np.full_like(moved, ax.get_ylim()[0]), "|", color=color,
                markersize=10, alpha=0.8)
    ax.set_xlabel("x")
    ax.set_ylabel("y")
    ax.legend(loc="best", fontsize=8)
    ax.set_title(f"fits and decided points (eta={eta:g})")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_trace(trace: list[RoundTrace], path: str | Path) -> None:
    """Per-round training MSE and lookahead penalty."""
    rounds = [t.round for t in trace]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(rounds, [t.train_mse for t in trace], "o-", color="tab:blue", label="train MSE")
    ax.plot(rounds, [t.penalty for t in trace], "s-", color="tab:red", label="penalty")
    ax.set_xlabel("round")
    ax.set_ylabel("value")
    ax.set_xticks(rounds)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def plot_frontier(points: list[FrontierPoint], path: str | Path) -> None:
    """Accuracy vs improvement frontier traced by the regularization weight."""
    lams = [p.lam for p in points]
    rmse = [p.report.rmse for p in points]
    rate = [p.report.improvement_rate for p in points]
    mag = [p.report.improvement_magnitude for p in points]

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4))
    ax1.plot(rate, rmse, "o-", color="tab:blue")
    for lam, x, y in zip(lams, rate, rmse):
        ax1.annotate(f"{lam:g}", (x, y), textcoords="offset points", xytext=(4, 4), fontsize=8)
    ax1.set_xlabel("improvement rate")
    ax1.set_ylabel("test RMSE")
    ax1.set_title("frontier (labels: lambda)")
    ax2.plot(lams, mag, "s-", color="tab:red")
    ax2.set_xlabel("lambda")
    ax2.set_ylabel("improvement magnitude")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
