"""Target weights shared by the sampling estimators and the analytic oracle."""

from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .errors import ModelError


class Normalization(str, Enum):
    UNIFORM = "uniform"
    PER_NODE = "per-node"


def target_weights(
    d: int,
    mu: Optional[Sequence[float]] = None,
    normalization: Normalization = Normalization.UNIFORM,
) -> np.ndarray:
    """Effective weights of the ``d + 1`` targets (empty target first).

    ``per-node`` rescales by ``(d + 1) / d``, i.e. divides the weighted sum of
    all ``d + 1`` terms by the node count instead of the target count.
    """
    if mu is None:
        weights = np.full(d + 1, 1.0 / (d + 1))
    else:
        weights = np.asarray(mu, dtype=float)
        if weights.shape != (d + 1,):
            raise ModelError(f"need {d + 1} target weights, got {len(weights)}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ModelError("target weights must be non-negative and sum to 1")
    if Normalization(normalization) is Normalization.PER_NODE:
        weights = weights * (d + 1) / d
    return weights
