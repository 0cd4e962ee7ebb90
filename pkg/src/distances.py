"""Observational, interventional and counterfactual distances between models.

This module provides the sampling estimators of OD, ID and CD:
- OD compares the two observational sample sets
- ID averages the distance under ``do(I = i)`` over targets ``I`` (the empty
  intervention plus every node) weighted by ``mu`` and values ``i`` drawn
  from a fixed value law
- CD averages ID over counterfactual models obtained by abduction on evidence
  ``E = e``, weighted by ``nu``

Every cell (target, value index) gets a seed derived from the configured seed
and its position, so totals do not depend on thread scheduling.
"""

import logging
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import stats

from . import settings
from .counterfactual import McmcConfig, abduct
from .errors import CounterfactualUnsupported, ModelError
from .mechanisms import Discrete
from .scm import (
    Evidence,
    Intervention,
    ModelKind,
    Scm,
    Seed,
    apply_intervention,
    derive_seed,
    sample,
)
from .transport import BaseDistanceConfig, empirical_distance
from .weights import Normalization, target_weights

logger = logging.getLogger(__name__)

EMPTY_TARGET = "(none)"


class ValueSampling(str, Enum):
    STRATIFIED = "stratified"
    IID = "iid"


@dataclass(frozen=True)
class DistanceConfig:
    """Estimator settings shared by OD, ID and CD.

    Attributes:
        k: Samples per distribution.
        l: Intervention values per node.
        m: Evidence values per node.
        base: Base distance between sample sets.
        mu: Weights over ``[empty] + nodes`` for ID (uniform when None).
        nu: Weights over ``[empty] + nodes`` for CD (uniform when None).
        seed: Root seed of every cell.
        paired: Sample both models of a cell with the same noise streams.
        normalization: ``uniform`` or ``per-node`` combination of targets.
        value_sampling: ``stratified`` or ``iid`` draws from the value law.
        value_scale: Standard deviation of the Gaussian value law.
        mcmc: Abduction settings for CD.
        threads: Worker cap for this call (never above the global cap).
    """

    k: int = 1000
    l: int = 10  # noqa: E741
    m: int = 10
    base: BaseDistanceConfig = field(default_factory=BaseDistanceConfig)
    mu: Optional[Tuple[float, ...]] = None
    nu: Optional[Tuple[float, ...]] = None
    seed: int = 0
    paired: bool = True
    normalization: Normalization = Normalization.UNIFORM
    value_sampling: ValueSampling = ValueSampling.STRATIFIED
    value_scale: float = 1.0
    mcmc: McmcConfig = field(default_factory=McmcConfig)
    threads: Optional[int] = None

    def __post_init__(self) -> None:
        for name in ("k", "l", "m"):
            if getattr(self, name) < 1:
                raise ModelError(f"{name} must be at least 1")
        if not self.value_scale > 0:
            raise ModelError("value scale must be positive")
        object.__setattr__(self, "normalization", Normalization(self.normalization))
        object.__setattr__(self, "value_sampling", ValueSampling(self.value_sampling))
        for name in ("mu", "nu"):
            if getattr(self, name) is not None:
                weights = tuple(float(x) for x in getattr(self, name))
                object.__setattr__(self, name, weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "k": self.k,
            "l": self.l,
            "m": self.m,
            "base": self.base.to_dict(),
            "mu": list(self.mu) if self.mu else "uniform",
            "nu": list(self.nu) if self.nu else "uniform",
            "seed": self.seed,
            "paired": self.paired,
            "normalization": self.normalization.value,
            "value_sampling": self.value_sampling.value,
            "value_scale": self.value_scale,
            "mcmc": self.mcmc.to_dict(),
        }


@dataclass
class DistanceTerm:
    """Contribution of one intervention or evidence target."""

    target: str
    weight: float
    value: float
    cells: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "target": self.target,
            "weight": self.weight,
            "value": self.value,
            "cells": self.cells,
        }


@dataclass
class DistanceEstimate:
    """Estimated distance with its breakdown and configuration echo."""

    kind: str
    value: float
    config: Dict[str, Any]
    breakdown: List[DistanceTerm] = field(default_factory=list)
    std: Optional[float] = None
    elapsed: float = 0.0

    def term(self, target: str) -> DistanceTerm:
        for t in self.breakdown:
            if t.target == target:
                return t
        raise KeyError(target)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "kind": self.kind,
            "value": self.value,
            "std": self.std,
            "config": self.config,
            "breakdown": [t.to_dict() for t in self.breakdown],
            "elapsed_seconds": self.elapsed,
        }


def _check_pair(m1: Scm, m2: Scm) -> None:
    if not m1.same_variables(m2):
        raise ModelError(
            f"models are over different variables: {list(m1.labels)} "
            f"vs {list(m2.labels)}"
        )


def draw_values(
    m: Scm, node: int, count: int, cfg: DistanceConfig, seed: Seed
) -> np.ndarray:
    """Values for ``do(node = i)`` or ``node = e``.

    Continuous nodes use ``N(0, value_scale^2)``, discrete nodes a uniform law
    over their states. Stratified draws take one value per quantile stratum.
    """
    rng = np.random.default_rng(seed)
    if cfg.value_sampling is ValueSampling.STRATIFIED:
        u = (np.arange(count) + rng.random(count)) / count
    else:
        u = rng.random(count)
    domain = m.domains[node]
    if isinstance(domain, Discrete):
        return np.minimum(np.floor(u * domain.cardinality), domain.cardinality - 1)
    return cfg.value_scale * stats.norm.ppf(u)


def _pair_seeds(cfg: DistanceConfig, *key: int) -> Tuple[Seed, Seed]:
    if cfg.paired:
        shared = derive_seed(cfg.seed, *key)
        return shared, shared
    return derive_seed(cfg.seed, *key, 1), derive_seed(cfg.seed, *key, 2)


def _sample_distance(
    m1: Scm, m2: Scm, iv: Intervention, cfg: DistanceConfig, key: Tuple[int, ...]
) -> float:
    s1, s2 = _pair_seeds(cfg, *key)
    x = sample(apply_intervention(m1, iv), cfg.k, s1)
    y = sample(apply_intervention(m2, iv), cfg.k, s2)
    value = empirical_distance(x, y, cfg.base)
    logger.debug(f"cell {key} do({iv.describe(m1.labels)}): {value:.6f}")
    return value


def _run_cells(
    cells: Sequence[Tuple[Tuple[int, ...], Callable[[], float]]], cfg: DistanceConfig
) -> Dict[Tuple[int, ...], float]:
    workers = settings.worker_count(cfg.threads)
    if workers == 1 or len(cells) == 1:
        return {key: fn() for key, fn in cells}
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = {key: pool.submit(fn) for key, fn in cells}
        return {key: futures[key].result() for key in sorted(futures)}


def _combine(
    kind: str,
    labels: Sequence[str],
    cells: Dict[Tuple[int, ...], float],
    weights: np.ndarray,
    config: Dict[str, Any],
    started: float,
) -> DistanceEstimate:
    breakdown = []
    for target in range(len(labels) + 1):
        values = [v for key, v in sorted(cells.items()) if key[0] == target]
        name = EMPTY_TARGET if target == 0 else labels[target - 1]
        breakdown.append(
            DistanceTerm(name, float(weights[target]), float(np.mean(values)), values)
        )
    total = float(sum(t.weight * t.value for t in breakdown))
    return DistanceEstimate(
        kind, max(total, 0.0), config, breakdown, elapsed=time.perf_counter() - started
    )


def od(m1: Scm, m2: Scm, cfg: Optional[DistanceConfig] = None) -> DistanceEstimate:
    """Observational distance ``D(P^{m1}, P^{m2})`` from ``k`` samples each."""
    cfg = cfg or DistanceConfig()
    _check_pair(m1, m2)
    started = time.perf_counter()
    value = _sample_distance(m1, m2, Intervention(), cfg, (0,))
    term = DistanceTerm(EMPTY_TARGET, 1.0, value, [value])
    return DistanceEstimate(
        "od", value, cfg.to_dict(), [term], elapsed=time.perf_counter() - started
    )


def _id_cells(
    m1: Scm, m2: Scm, cfg: DistanceConfig, prefix: Tuple[int, ...]
) -> List[Tuple[Tuple[int, ...], Callable[[], float]]]:
    cells: List[Tuple[Tuple[int, ...], Callable[[], float]]] = [
        ((0, 0), lambda: _sample_distance(m1, m2, Intervention(), cfg, prefix + (0, 0)))
    ]
    for node in range(m1.node_count):
        value_seed = derive_seed(cfg.seed, *prefix, 9, node)
        values = draw_values(m1, node, cfg.l, cfg, value_seed)
        for j, x in enumerate(values):
            iv = Intervention(((node, float(x)),))
            key = (node + 1, j)
            cells.append(
                (
                    key,
                    lambda iv=iv, key=key: _sample_distance(
                        m1, m2, iv, cfg, prefix + key
                    ),
                )
            )
    return cells


def id(  # noqa: A001
    m1: Scm, m2: Scm, cfg: Optional[DistanceConfig] = None
) -> DistanceEstimate:
    """Interventional distance: weighted average over targets of mean ``do`` distances.

    The empty target contributes the observational distance; node ``I``
    contributes the mean over ``l`` values ``i`` of the distance between the
    two models under ``do(I = i)``.
    """
    cfg = cfg or DistanceConfig()
    _check_pair(m1, m2)
    started = time.perf_counter()
    weights = target_weights(m1.node_count, cfg.mu, cfg.normalization)
    cells = _run_cells(_id_cells(m1, m2, cfg, (1,)), cfg)
    return _combine("id", m1.labels, cells, weights, cfg.to_dict(), started)


def _id_value(m1: Scm, m2: Scm, cfg: DistanceConfig, prefix: Tuple[int, ...]) -> float:
    weights = target_weights(m1.node_count, cfg.mu, cfg.normalization)
    cells = {key: fn() for key, fn in _id_cells(m1, m2, cfg, prefix)}
    per_target = [
        np.mean([v for key, v in cells.items() if key[0] == t])
        for t in range(m1.node_count + 1)
    ]
    return float(np.dot(weights, per_target))


def cd(m1: Scm, m2: Scm, cfg: Optional[DistanceConfig] = None) -> DistanceEstimate:
    """Counterfactual distance: weighted average of ID over abducted models.

    The empty evidence target contributes ID; node ``E`` contributes the mean
    over ``m`` evidence values ``e`` of the ID between both models abducted on
    ``E = e``.

    Raises:
        CounterfactualUnsupported: If either model has no structural equations.
        ConvergenceError: If abduction fails its chain-agreement check.
    """
    cfg = cfg or DistanceConfig()
    _check_pair(m1, m2)
    for model in (m1, m2):
        if model.kind is ModelKind.BAYES_NET_ONLY:
            raise CounterfactualUnsupported(
                "counterfactual distance needs structural causal models; "
                "Bayesian networks without structural equations are not supported"
            )
    started = time.perf_counter()
    weights = target_weights(m1.node_count, cfg.nu, cfg.normalization)

    def evidence_cell(node: int, j: int, e: float) -> float:
        ev = Evidence(((node, float(e)),))
        s1, s2 = _pair_seeds(cfg, 2, node, j)
        c1 = abduct(m1, ev, cfg.mcmc, s1).to_scm()
        c2 = abduct(m2, ev, cfg.mcmc, s2).to_scm()
        return _id_value(c1, c2, cfg, (3, node, j))

    cells: List[Tuple[Tuple[int, ...], Callable[[], float]]] = [
        ((0, 0), lambda: _id_value(m1, m2, cfg, (1,)))
    ]
    for node in range(m1.node_count):
        values = draw_values(m1, node, cfg.m, cfg, derive_seed(cfg.seed, 8, node))
        for j, e in enumerate(values):
            cells.append(
                ((node + 1, j), lambda node=node, j=j, e=e: evidence_cell(node, j, e))
            )
    results = _run_cells(cells, cfg)
    return _combine("cd", m1.labels, results, weights, cfg.to_dict(), started)


def estimate(
    kind: str, m1: Scm, m2: Scm, cfg: Optional[DistanceConfig] = None
) -> DistanceEstimate:
    """Dispatch to ``od``, ``id`` or ``cd`` by name."""
    functions = {"od": od, "id": id, "cd": cd}
    if kind not in functions:
        raise ModelError(f"unknown distance '{kind}', expected od, id or cd")
    return functions[kind](m1, m2, cfg)


def repeat_seed(seed: int, repeat: int) -> int:
    """Root seed of one repeat; repeat 0 keeps ``seed`` itself."""
    if repeat == 0:
        return seed
    return int(derive_seed(seed, 7, repeat).generate_state(1)[0])


def repeat_estimate(
    kind: str,
    m1: Scm,
    m2: Scm,
    cfg: Optional[DistanceConfig] = None,
    repeats: int = 1,
) -> DistanceEstimate:
    """Mean of ``repeats`` estimates on derived root seeds, with their spread.

    ``value`` and every breakdown term are averaged; ``std`` is the sample
    standard deviation of the repeated values (0.0 for a single repeat). The
    ``cells`` of each term hold its per-repeat values.
    """
    cfg = cfg or DistanceConfig()
    if repeats < 1:
        raise ModelError(f"need at least one repeat, got {repeats}")
    runs = []
    for r in range(repeats):
        seed = repeat_seed(cfg.seed, r)
        run_cfg = cfg
        if r > 0:
            run_cfg = replace(cfg, seed=seed, base=replace(cfg.base, seed=seed))
        runs.append(estimate(kind, m1, m2, run_cfg))
        logger.debug(f"Repeat {r + 1}/{repeats} (seed {seed}): {runs[-1].value:.6f}")

    values = np.array([run.value for run in runs])
    breakdown = [
        DistanceTerm(
            term.target,
            term.weight,
            float(np.mean([run.breakdown[i].value for run in runs])),
            [run.breakdown[i].value for run in runs],
        )
        for i, term in enumerate(runs[0].breakdown)
    ]
    config = runs[0].config | {"seed": cfg.seed, "repeats": repeats}
    return DistanceEstimate(
        kind,
        float(values.mean()),
        config,
        breakdown,
        std=float(values.std(ddof=1)) if repeats > 1 else 0.0,
        elapsed=sum(run.elapsed for run in runs),
    )
