"""Maximum-likelihood parameter fitting and orientation of partial graphs.

Discrete data get add-one smoothed conditional probability tables; continuous
data get an ordinary least-squares linear mechanism with Gaussian residual
noise per node. Undirected edges are oriented by enumerating acyclic
completions and keeping the best in-sample log-likelihood.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from functools import lru_cache
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from .. import settings
from ..errors import CapExceededError, GraphError, GraphOutputError, ModelError
from ..graph import Dag
from ..mechanisms import (
    Continuous,
    Cpt,
    Discrete,
    Gaussian,
    Linear,
    Mechanism,
    NoiseSpec,
    UniformVariate,
    VariableDomain,
)
from ..scm import ModelKind, SampleMatrix, Scm
from .graphs import Orientation, PartialGraph

logger = logging.getLogger(__name__)

ORIENTATION_CAP = 10
MIN_RESIDUAL_STD = 1e-6

LocalFit = Tuple[Mechanism, NoiseSpec, float]


class MleFitter:
    """Per-node maximum-likelihood fits over one dataset.

    Local fits depend only on a node and its parent set, so they are memoised
    and shared between the graphs being compared.
    """

    def __init__(
        self,
        data: SampleMatrix,
        domains: Optional[Sequence[VariableDomain]] = None,
        smoothing: float = 1.0,
    ):
        self.data = data
        self.values = data.values
        self.domains: Tuple[VariableDomain, ...] = tuple(
            domains
            if domains is not None
            else (Discrete(c) if c else Continuous() for c in data.cardinalities)
        )
        if len(self.domains) != data.d:
            raise ModelError("one domain per data column is needed")
        self.discrete = all(isinstance(dom, Discrete) for dom in self.domains)
        if not self.discrete and any(isinstance(dom, Discrete) for dom in self.domains):
            raise ModelError("fitting needs all-discrete or all-continuous data")
        self.smoothing = smoothing
        self.logger = logging.getLogger(__name__)
        self.local = lru_cache(maxsize=None)(self._fit_local)

    def _cards(self, nodes: Sequence[int]) -> Tuple[int, ...]:
        return tuple(
            dom.cardinality
            for dom in (self.domains[p] for p in nodes)
            if isinstance(dom, Discrete)
        )

    def _fit_local(self, v: int, parents: Tuple[int, ...]) -> LocalFit:
        if self.discrete:
            return self._fit_table(v, parents)
        return self._fit_linear(v, parents)

    def _fit_table(self, v: int, parents: Tuple[int, ...]) -> LocalFit:
        domain = self.domains[v]
        assert isinstance(domain, Discrete)
        cards = self._cards(parents)
        n_rows = int(np.prod(cards)) if cards else 1
        codes = self.values[:, v].astype(int)
        if parents:
            rows = np.ravel_multi_index(
                tuple(self.values[:, list(parents)].astype(int).T), cards
            )
        else:
            rows = np.zeros(len(codes), dtype=int)
        counts = np.zeros((n_rows, domain.cardinality))
        np.add.at(counts, (rows, codes), 1.0)
        smoothed = counts + self.smoothing
        table = smoothed / smoothed.sum(axis=1, keepdims=True)
        loglik = float(np.sum(counts * np.log(table)))
        return Cpt(table, cards), UniformVariate(), loglik

    def _fit_linear(self, v: int, parents: Tuple[int, ...]) -> LocalFit:
        y = self.values[:, v]
        design = np.column_stack([self.values[:, list(parents)], np.ones(len(y))])
        coef, *_ = np.linalg.lstsq(design, y, rcond=None)
        residual = y - design @ coef
        std = max(float(np.sqrt(np.mean(residual**2))), MIN_RESIDUAL_STD)
        loglik = float(
            -0.5 * len(y) * np.log(2 * np.pi * std**2)
            - np.sum(residual**2) / (2 * std**2)
        )
        return Linear(coef[:-1], float(coef[-1])), Gaussian(0.0, std), loglik

    def score(self, g: Dag) -> float:
        """In-sample log-likelihood of the data under the MLE fit on ``g``."""
        return sum(self.local(v, g.parents(v))[2] for v in range(g.node_count))

    def fit(self, g: Dag) -> Scm:
        mechanisms, noises = [], []
        for v in range(g.node_count):
            mech, noise, _ = self.local(v, g.parents(v))
            mechanisms.append(mech)
            noises.append(noise)
        kind = ModelKind.BAYES_NET_ONLY if self.discrete else ModelKind.STRUCTURAL
        return Scm(g, self.domains, tuple(mechanisms), tuple(noises), kind)


def _align(data: SampleMatrix, labels: Sequence[str]) -> SampleMatrix:
    if tuple(labels) == data.names:
        return data
    missing = [lab for lab in labels if lab not in data.names]
    if missing:
        raise ModelError(f"data has no column for {', '.join(missing)}")
    order = [data.names.index(lab) for lab in labels]
    return SampleMatrix(
        data.values[:, order],
        tuple(labels),
        tuple(data.cardinalities[i] for i in order),
    )


def _best_completion(pg: PartialGraph, fitter: MleFitter) -> Tuple[Orientation, Dag]:
    candidates = list(pg.completions())
    if not candidates:
        raise GraphOutputError("no orientation of the undirected edges is acyclic")
    workers = settings.worker_count()
    with ThreadPoolExecutor(max_workers=workers) as pool:
        scores = list(pool.map(lambda item: fitter.score(item[1]), candidates))
    best = 0
    for i, score in enumerate(scores):
        # ties keep the lexicographically smaller orientation
        if score > scores[best] + 1e-9 * max(1.0, abs(scores[best])):
            best = i
    logger.debug(
        f"scored {len(candidates)} completions, best orientation {candidates[best][0]}"
    )
    return candidates[best]


def _greedy_completion(pg: PartialGraph, fitter: MleFitter) -> Dag:
    """Orient undirected edges one at a time by likelihood gain."""
    edges = set(pg.directed)
    for a, b in pg.undirected:
        best: Optional[Tuple[float, Dag]] = None
        for edge in ((a, b), (b, a)):
            try:
                candidate = Dag(pg.labels, frozenset(edges | {edge}))
            except GraphError:
                continue
            score = fitter.score(candidate)
            if best is None or score > best[0] + 1e-9 * max(1.0, abs(best[0])):
                best = (score, candidate)
        if best is None:
            raise GraphOutputError(
                f"edge {pg.labels[a]} -- {pg.labels[b]} closes a cycle either way"
            )
        edges = set(best[1].edges)
    return Dag(pg.labels, frozenset(edges))


def fit_mle_and_orient(
    graph: Union[Dag, PartialGraph],
    data: SampleMatrix,
    domains: Optional[Sequence[VariableDomain]] = None,
    orientation_cap: int = ORIENTATION_CAP,
    greedy_beyond_cap: bool = True,
) -> Scm:
    """Fit parameters on ``graph``, orienting undirected edges first.

    Up to ``orientation_cap`` undirected edges every acyclic completion is
    scored; above it edges are oriented greedily, or ``CapExceededError`` is
    raised when ``greedy_beyond_cap`` is off.

    Raises:
        GraphOutputError: If no acyclic completion exists.
        CapExceededError: See above.
        ModelError: If the data do not cover the graph's variables.
    """
    data = _align(data, graph.labels)
    fitter = MleFitter(data, domains)
    if isinstance(graph, Dag):
        return fitter.fit(graph)
    if graph.pending <= orientation_cap:
        _, dag = _best_completion(graph, fitter)
    elif greedy_beyond_cap:
        logger.warning(
            f"{graph.pending} undirected edges exceed the enumeration cap "
            f"of {orientation_cap}; orienting greedily"
        )
        dag = _greedy_completion(graph, fitter)
    else:
        raise CapExceededError(
            f"{graph.pending} undirected edges exceed the enumeration cap "
            f"of {orientation_cap}"
        )
    return fitter.fit(dag)


def completion_scores(
    pg: PartialGraph, data: SampleMatrix
) -> List[Tuple[Orientation, float]]:
    """Log-likelihood of every acyclic completion, in orientation order."""
    fitter = MleFitter(_align(data, pg.labels))
    return [(o, fitter.score(dag)) for o, dag in pg.completions()]
