"""The user decision model: one masked gradient step under the published regressor."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset, FeatureMask
from .models import PredictiveModel


@dataclass
class DecisionOutcome:
    """Post-action covariates and their offsets from the originals."""

    decided: np.ndarray
    displacement: np.ndarray

    def as_dataset(self, feature_names: list[str] | None = None) -> Dataset:
        return Dataset(self.decided, None, feature_names)


def decide(f: PredictiveModel, data: Dataset, eta: float, mask: FeatureMask) -> DecisionOutcome:
    """Map every row x to x + eta * (input gradient of f, zeroed on immutable coords).

    Immutable coordinates of the result are the original values, untouched
    (bitwise), not recomputed.
    """
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if mask.d != data.d or f.d != data.d:
        raise ValueError(f"dimension mismatch: data d={data.d}, model d={f.d}, mask d={mask.d}")
    displacement = eta * f.grad_x(data.features)
    displacement[:, ~mask.flags] = 0.0
    decided = data.features.copy()
    decided[:, mask.flags] += displacement[:, mask.flags]
    return DecisionOutcome(decided, displacement)


def ddecided_dparams(f: PredictiveModel, x: np.ndarray, eta: float, mask: FeatureMask) -> np.ndarray:
    """Jacobian of the decided point w.r.t. f's flattened parameters.

    Equals eta * diag(mask) * dgrad_dparams; shape (d, n_params) for a
    single point, (m, d, n_params) for a batch.
    """
    J = eta * f.dgrad_dparams(x)
    if J.ndim == 2:
        J[~mask.flags, :] = 0.0
    else:
        J[:, ~mask.flags, :] = 0.0
    return J
