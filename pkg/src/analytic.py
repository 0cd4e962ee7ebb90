"""Closed-form distributions and distances for linear-Gaussian models.

A model whose mechanisms are all linear (or fixed by an intervention) with
Gaussian or point-mass noise is jointly Gaussian. This module computes that
joint, its interventional and conditional versions, and the exact OD and ID
values used to validate the sampling estimators.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Union

import numpy as np

from . import settings
from .errors import ModelError, SingularMatrixError
from .mechanisms import Fixed, Gaussian, PointMass, linear_form
from .scm import Intervention, Scm
from .transport import GaussianDist, gaussian_kl, gaussian_w2_squared
from .weights import Normalization, target_weights

logger = logging.getLogger(__name__)

ANALYTIC_KINDS = ("w2", "kl")


@dataclass(frozen=True, eq=False)
class LinearGaussianView:
    """Matrix form ``X = W X + intercept + N`` with ``N ~ N(noise_mean, diag(std^2))``.

    ``weights[i, j]`` is the coefficient of parent ``j`` in node ``i``'s equation.
    """

    weights: np.ndarray
    intercepts: np.ndarray
    noise_means: np.ndarray
    noise_stds: np.ndarray
    labels: tuple

    @classmethod
    def from_scm(cls, m: Scm) -> "LinearGaussianView":
        """Raises ModelError when ``m`` is not linear-Gaussian."""
        d = m.node_count
        weights = np.zeros((d, d))
        intercepts = np.zeros(d)
        means = np.zeros(d)
        stds = np.zeros(d)
        for v in range(d):
            mech, noise = m.mechanisms[v], m.noises[v]
            if isinstance(mech, Fixed):
                intercepts[v] = mech.value
                continue
            lin = linear_form(mech)
            if lin is None:
                raise ModelError(
                    f"node {m.labels[v]} has a non-linear mechanism '{mech.tag}'"
                )
            weights[v, list(m.graph.parents(v))] = lin.weights
            intercepts[v] = lin.intercept
            if isinstance(noise, Gaussian):
                means[v], stds[v] = noise.mean, noise.std
            elif isinstance(noise, PointMass):
                means[v] = noise.value
            else:
                raise ModelError(
                    f"node {m.labels[v]} has non-Gaussian noise '{noise.tag}'"
                )
        return cls(weights, intercepts, means, stds, m.labels)

    @property
    def dim(self) -> int:
        return len(self.intercepts)


ModelLike = Union[Scm, LinearGaussianView]


def as_view(model: ModelLike) -> LinearGaussianView:
    if isinstance(model, LinearGaussianView):
        return model
    return LinearGaussianView.from_scm(model)


def joint_gaussian(view: ModelLike) -> GaussianDist:
    """Joint distribution of all nodes."""
    v = as_view(view)
    transfer = np.linalg.solve(np.eye(v.dim) - v.weights, np.eye(v.dim))
    mean = transfer @ (v.intercepts + v.noise_means)
    cov = transfer @ np.diag(v.noise_stds**2) @ transfer.T
    return GaussianDist(mean, (cov + cov.T) / 2)


def intervene_view(view: ModelLike, iv: Intervention) -> LinearGaussianView:
    """Graph surgery on the matrix form."""
    v = as_view(view)
    weights = v.weights.copy()
    intercepts = v.intercepts.copy()
    means = v.noise_means.copy()
    stds = v.noise_stds.copy()
    for node, value in iv.assignments:
        if not 0 <= node < v.dim:
            raise ModelError(f"node index {node} outside [0, {v.dim})")
        weights[node, :] = 0.0
        intercepts[node] = value
        means[node] = 0.0
        stds[node] = 0.0
    return replace(
        v, weights=weights, intercepts=intercepts, noise_means=means, noise_stds=stds
    )


def interventional_gaussian(view: ModelLike, iv: Intervention) -> GaussianDist:
    """Joint distribution under ``do(iv)``.

    Intervened coordinates have zero variance.
    """
    return joint_gaussian(intervene_view(view, iv))


def conditional_gaussian(
    g: GaussianDist, observed: Sequence[int], values: Sequence[float]
) -> GaussianDist:
    """Condition ``g`` on ``X[observed] = values``.

    The result keeps all coordinates; observed ones become point masses.

    Raises:
        SingularMatrixError: If the observed covariance block is singular.
    """
    obs = list(observed)
    vals = np.asarray(values, dtype=float)
    if len(obs) != len(vals):
        raise ModelError("observed indices and values differ in length")
    if not obs:
        return g
    rest = [i for i in range(g.dim) if i not in obs]
    s22 = g.cov[np.ix_(obs, obs)]
    if np.linalg.eigvalsh(s22).min() <= 1e-12 * max(1.0, np.abs(s22).max()):
        raise SingularMatrixError("observed covariance block is singular")
    mean = g.mean.copy()
    cov = np.zeros_like(g.cov)
    mean[obs] = vals
    if rest:
        s12 = g.cov[np.ix_(rest, obs)]
        gain = np.linalg.solve(s22, s12.T).T
        mean[rest] = g.mean[rest] + gain @ (vals - g.mean[obs])
        cov[np.ix_(rest, rest)] = g.cov[np.ix_(rest, rest)] - gain @ s12.T
    return GaussianDist(mean, (cov + cov.T) / 2)


def noise_posterior(
    view: ModelLike, observed: Sequence[int], values: Sequence[float]
) -> GaussianDist:
    """Exact posterior of the noise vector given ``X[observed] = values``.

    The noise ``N`` and the nodes ``X = T (N + intercepts)`` with
    ``T = (I - W)^-1`` are jointly Gaussian, so conditioning their joint on the
    observed nodes and keeping the first ``d`` coordinates gives ``N | X_obs``.

    Raises:
        SingularMatrixError: If the observed nodes have a singular covariance.
    """
    v = as_view(view)
    d = v.dim
    transfer = np.linalg.solve(np.eye(d) - v.weights, np.eye(d))
    noise_cov = np.diag(v.noise_stds**2)
    mean = np.concatenate([v.noise_means, transfer @ (v.intercepts + v.noise_means)])
    cross = noise_cov @ transfer.T
    cov = np.block([[noise_cov, cross], [cross.T, transfer @ cross]])
    joint = GaussianDist(mean, (cov + cov.T) / 2)
    shifted = [d + int(i) for i in observed]
    return conditional_gaussian(joint, shifted, values).marginal(range(d))


def _drop_shared_point_masses(p: GaussianDist, q: GaussianDist):
    pinned = (
        (np.diag(p.cov) <= 1e-15)
        & (np.diag(q.cov) <= 1e-15)
        & np.isclose(p.mean, q.mean, atol=1e-12)
    )
    keep = [i for i in range(p.dim) if not pinned[i]]
    return p.marginal(keep), q.marginal(keep)


def gaussian_distance(p: GaussianDist, q: GaussianDist, kind: str = "w2") -> float:
    """W2 (root of the Bures formula) or ``KL(p || q)``."""
    if kind == "w2":
        return float(np.sqrt(gaussian_w2_squared(p, q)))
    if kind == "kl":
        p, q = _drop_shared_point_masses(p, q)
        return 0.0 if p.dim == 0 else gaussian_kl(p, q)
    raise ModelError(f"analytic distances support {ANALYTIC_KINDS}, got '{kind}'")


def analytic_od(v1: ModelLike, v2: ModelLike, kind: str = "w2") -> float:
    """Exact observational distance between two linear-Gaussian models."""
    p, q = joint_gaussian(v1), joint_gaussian(v2)
    if p.dim != q.dim:
        raise ModelError(f"models have {p.dim} and {q.dim} nodes")
    return gaussian_distance(p, q, kind)


def _quadrature(q: int, scale: float):
    nodes, weights = np.polynomial.hermite_e.hermegauss(q)
    return scale * nodes, weights / weights.sum()


def analytic_id_terms(
    v1: ModelLike,
    v2: ModelLike,
    kind: str = "w2",
    quadrature: int = 64,
    value_scale: float = 1.0,
) -> List[float]:
    """Per-target exact terms: the observational term, then one per node.

    Node terms average the distance of ``do(I = i)`` over ``i ~ N(0, value_scale^2)``
    with Gauss–Hermite quadrature.
    """
    a, b = as_view(v1), as_view(v2)
    if a.dim != b.dim:
        raise ModelError(f"models have {a.dim} and {b.dim} nodes")
    if quadrature < 1:
        raise ModelError("quadrature needs at least one node")
    values, weights = _quadrature(quadrature, value_scale)

    def node_term(node: int) -> float:
        total = 0.0
        for x, w in zip(values, weights):
            iv = Intervention(((node, float(x)),))
            total += w * gaussian_distance(
                interventional_gaussian(a, iv), interventional_gaussian(b, iv), kind
            )
        return float(total)

    with ThreadPoolExecutor(max_workers=settings.worker_count()) as pool:
        node_terms = list(pool.map(node_term, range(a.dim)))
    return [gaussian_distance(joint_gaussian(a), joint_gaussian(b), kind)] + node_terms


def analytic_id(
    v1: ModelLike,
    v2: ModelLike,
    kind: str = "w2",
    quadrature: int = 64,
    mu: Optional[Sequence[float]] = None,
    normalization: Normalization = Normalization.UNIFORM,
    value_scale: float = 1.0,
) -> float:
    """Exact interventional distance, deterministic (no sampling)."""
    terms = analytic_id_terms(v1, v2, kind, quadrature, value_scale)
    weights = target_weights(len(terms) - 1, mu, normalization)
    return float(np.dot(weights, terms))
