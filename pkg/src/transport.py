"""Base distances between distributions.

This module provides:
- Empirical Wasserstein distances between sample sets (exact W1/W2 via an
  assignment solve, sliced W1 via random projections)
- A mixed ground metric: Euclidean on continuous columns, 0/1 on discrete ones
- Closed-form W2 and KL divergence between Gaussians
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence, Tuple, Union

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.spatial.distance import cdist

from . import settings
from .errors import CapExceededError, ModelError, SingularMatrixError
from .scm import SampleMatrix

logger = logging.getLogger(__name__)

PSD_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class GaussianDist:
    """Multivariate normal ``N(mean, cov)`` with a PSD covariance."""

    mean: np.ndarray
    cov: np.ndarray

    def __post_init__(self) -> None:
        mean = np.atleast_1d(np.array(self.mean, dtype=float))
        cov = np.atleast_2d(np.array(self.cov, dtype=float))
        if cov.shape != (len(mean), len(mean)):
            raise ModelError(f"covariance shape {cov.shape} does not match mean")
        if not np.allclose(cov, cov.T, atol=PSD_TOL, rtol=0):
            raise ModelError("covariance matrix is not symmetric")
        cov = (cov + cov.T) / 2
        if len(mean) and np.linalg.eigvalsh(cov).min() < -PSD_TOL * max(
            1.0, np.abs(cov).max()
        ):
            raise ModelError("covariance matrix is not positive semidefinite")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "cov", cov)

    @property
    def dim(self) -> int:
        return len(self.mean)

    def marginal(self, indices: Sequence[int]) -> "GaussianDist":
        idx = list(indices)
        return GaussianDist(self.mean[idx], self.cov[np.ix_(idx, idx)])

    def allclose(self, other: "GaussianDist", atol: float = 1e-9) -> bool:
        return bool(
            np.allclose(self.mean, other.mean, atol=atol)
            and np.allclose(self.cov, other.cov, atol=atol)
        )


class BaseKind(str, Enum):
    W2 = "w2"
    W1 = "w1"
    SLICED = "sliced"


@dataclass(frozen=True)
class BaseDistanceConfig:
    """Choice of base distance ``D``.

    Attributes:
        kind: ``w2`` (default), ``w1`` or ``sliced`` (sliced W1).
        projections: Random directions for sliced W1.
        exact_cap: Largest sample count for the exact solve; ``None`` reads
            ``CAUSAL_DIST_EXACT_CAP``.
        seed: Seed for projections and for resampling unequal sample sets.
    """

    kind: BaseKind = BaseKind.W2
    projections: int = 50
    exact_cap: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", BaseKind(self.kind))
        if self.projections < 1:
            raise ModelError("sliced Wasserstein needs at least one projection")

    @property
    def cap(self) -> int:
        return settings.EXACT_SOLVE_CAP if self.exact_cap is None else self.exact_cap

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "projections": self.projections,
            "exact_cap": self.cap,
            "seed": self.seed,
        }


Points = Union[np.ndarray, SampleMatrix]


def _points(x: Points) -> np.ndarray:
    values = x.values if isinstance(x, SampleMatrix) else np.asarray(x, dtype=float)
    return values.reshape(len(values), -1)


def _match_counts(
    x: np.ndarray, y: np.ndarray, rng: np.random.Generator
) -> Tuple[np.ndarray, np.ndarray]:
    """Subsample the larger set without replacement to the smaller size."""
    if len(x) > len(y):
        x = x[rng.choice(len(x), size=len(y), replace=False)]
    elif len(y) > len(x):
        y = y[rng.choice(len(y), size=len(x), replace=False)]
    return x, y


def _sliced_w1(
    x: np.ndarray, y: np.ndarray, projections: int, rng: np.random.Generator
) -> float:
    directions = rng.normal(size=(projections, x.shape[1]))
    directions /= np.linalg.norm(directions, axis=1, keepdims=True)
    px = np.sort(x @ directions.T, axis=0)
    py = np.sort(y @ directions.T, axis=0)
    return float(np.mean(np.abs(px - py)))


def empirical_wasserstein(
    x: Points, y: Points, cfg: Optional[BaseDistanceConfig] = None
) -> float:
    """Wasserstein distance between two uniformly weighted point clouds.

    One-dimensional inputs are solved exactly by sorting for any size; higher
    dimensions use an assignment solve up to the configured cap.

    Raises:
        ModelError: If the two sets have different dimensions.
        CapExceededError: If an exact multi-dimensional solve exceeds the cap.
    """
    cfg = cfg or BaseDistanceConfig()
    xs, ys = _points(x), _points(y)
    if xs.shape[1] != ys.shape[1]:
        raise ModelError(
            f"sample sets have {xs.shape[1]} and {ys.shape[1]} columns"
        )
    rng = np.random.default_rng(cfg.seed)
    xs, ys = _match_counts(xs, ys, rng)
    k, dim = xs.shape

    if cfg.kind is BaseKind.SLICED:
        return _sliced_w1(xs, ys, cfg.projections, rng)

    if dim == 1:
        gap = np.abs(np.sort(xs[:, 0]) - np.sort(ys[:, 0]))
        if cfg.kind is BaseKind.W1:
            return float(gap.mean())
        return float(np.sqrt(np.mean(gap**2)))

    if k > cfg.cap:
        raise CapExceededError(
            f"exact transport is capped at {cfg.cap} samples, got {k}; "
            f"use the sliced base distance for larger sets"
        )
    metric = "euclidean" if cfg.kind is BaseKind.W1 else "sqeuclidean"
    cost = cdist(xs, ys, metric=metric)
    rows, cols = linear_sum_assignment(cost)
    total = float(cost[rows, cols].mean())
    return total if cfg.kind is BaseKind.W1 else float(np.sqrt(max(total, 0.0)))


def embed(x: SampleMatrix) -> np.ndarray:
    """Continuous columns as-is, discrete columns one-hot scaled by ``1/sqrt(2)``.

    Under the embedding two different states are at Euclidean distance 1.
    """
    blocks = []
    for j, card in enumerate(x.cardinalities):
        column = x.values[:, j]
        if card > 0:
            blocks.append(np.eye(card)[column.astype(int)] / np.sqrt(2.0))
        else:
            blocks.append(column[:, None])
    return np.hstack(blocks)


def empirical_distance(
    x: SampleMatrix, y: SampleMatrix, cfg: Optional[BaseDistanceConfig] = None
) -> float:
    """Base distance between two sample matrices over the same variables."""
    if x.names != y.names or x.cardinalities != y.cardinalities:
        raise ModelError("sample matrices are over different variables")
    if not any(x.cardinalities):
        return empirical_wasserstein(x.values, y.values, cfg)
    return empirical_wasserstein(embed(x), embed(y), cfg)


def psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2)
    return (vecs * np.sqrt(np.clip(vals, 0.0, None))) @ vecs.T


def gaussian_w2_squared(p: GaussianDist, q: GaussianDist) -> float:
    """Squared 2-Wasserstein (Bures) distance between two Gaussians."""
    if p.dim != q.dim:
        raise ModelError(f"Gaussians have dimensions {p.dim} and {q.dim}")
    root_q = psd_sqrt(q.cov)
    cross = psd_sqrt(root_q @ p.cov @ root_q)
    value = float(
        np.sum((p.mean - q.mean) ** 2) + np.trace(p.cov + q.cov - 2 * cross)
    )
    return max(value, 0.0)


def gaussian_kl(p: GaussianDist, q: GaussianDist) -> float:
    """``KL(p || q)``; infinite when ``p`` is degenerate and ``q`` is not.

    Raises:
        SingularMatrixError: If ``q`` has a singular covariance.
    """
    if p.dim != q.dim:
        raise ModelError(f"Gaussians have dimensions {p.dim} and {q.dim}")
    sign_q, logdet_q = np.linalg.slogdet(q.cov)
    if sign_q <= 0 or np.linalg.eigvalsh(q.cov).min() <= 1e-12:
        raise SingularMatrixError("KL divergence needs a nonsingular second covariance")
    sign_p, logdet_p = np.linalg.slogdet(p.cov)
    if sign_p <= 0:
        return float("inf")
    q_inv = np.linalg.inv(q.cov)
    diff = q.mean - p.mean
    value = 0.5 * (
        logdet_q - logdet_p - p.dim + np.trace(q_inv @ p.cov) + diff @ q_inv @ diff
    )
    return max(float(value), 0.0)
