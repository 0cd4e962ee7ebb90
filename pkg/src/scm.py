"""Structural causal models, sampling and hard interventions.

This module provides:
- ``Scm``: a DAG with per-node domains, mechanisms and noises
- ``Intervention`` / ``Evidence``: partial assignments of node values
- ``SampleMatrix``: ``k x d`` joint draws with column metadata
- Ancestral sampling with one noise stream per node, so two models sampled
  with the same seed share their noise wherever their noises agree
- Graph surgery for ``do(I = i)`` and epsilon-mixing of a single mechanism
"""

import logging
from dataclasses import dataclass, replace
from enum import Enum
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .errors import DomainError, ModelError
from .graph import Dag, topological_order
from .mechanisms import (
    Continuous,
    Cpt,
    Discrete,
    EmpiricalJoint,
    Fixed,
    Mechanism,
    Mix,
    NoiseSpec,
    PointMass,
    VariableDomain,
    random_mechanism_like,
)

logger = logging.getLogger(__name__)

Seed = Union[None, int, Sequence[int], np.random.SeedSequence]


def as_seed_sequence(seed: Seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def derive_seed(seed: Seed, *key: int) -> np.random.SeedSequence:
    """Seed for one cell of a computation, independent of scheduling order."""
    base = as_seed_sequence(seed)
    return np.random.SeedSequence(
        entropy=base.entropy,
        spawn_key=tuple(base.spawn_key) + tuple(int(k) for k in key),
    )


def seed_echo(seed: Seed) -> object:
    """JSON-friendly record of a seed."""
    if isinstance(seed, np.random.SeedSequence):
        return {"entropy": seed.entropy, "spawn_key": list(seed.spawn_key)}
    return seed if seed is None or isinstance(seed, int) else list(seed)


class ModelKind(str, Enum):
    STRUCTURAL = "StructuralModel"
    BAYES_NET_ONLY = "BayesNetOnly"


@dataclass(frozen=True)
class _Assignment:
    assignments: Tuple[Tuple[int, float], ...] = ()

    def __post_init__(self) -> None:
        pairs = tuple((int(v), float(x)) for v, x in self.assignments)
        nodes = [v for v, _ in pairs]
        if len(set(nodes)) != len(nodes):
            raise ModelError(f"duplicate node in assignment: {nodes}")
        object.__setattr__(self, "assignments", tuple(sorted(pairs)))

    @property
    def nodes(self) -> Tuple[int, ...]:
        return tuple(v for v, _ in self.assignments)

    def as_dict(self) -> Dict[int, float]:
        return dict(self.assignments)

    def __len__(self) -> int:
        return len(self.assignments)

    def validate(self, m: "Scm") -> None:
        for v, x in self.assignments:
            if not 0 <= v < m.node_count:
                raise ModelError(f"node index {v} outside [0, {m.node_count})")
            if not m.domains[v].contains(x):
                raise DomainError(
                    f"value {x} is outside the domain of {m.graph.labels[v]}"
                )

    def describe(self, labels: Sequence[str]) -> str:
        return ", ".join(f"{labels[v]}={x:g}" for v, x in self.assignments) or "none"


class Intervention(_Assignment):
    """Hard intervention ``do(I = i)``; empty means no intervention."""


class Evidence(_Assignment):
    """Observed values ``E = e`` used for abduction."""


@dataclass(frozen=True, eq=False)
class SampleMatrix:
    """``k x d`` joint draws; discrete columns hold integer state codes."""

    values: np.ndarray
    names: Tuple[str, ...]
    cardinalities: Tuple[int, ...]

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] < 1:
            raise ModelError("a sample matrix needs at least one row")
        if values.shape[1] != len(self.names) or len(self.names) != len(
            self.cardinalities
        ):
            raise ModelError("sample matrix columns do not match their metadata")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def k(self) -> int:
        return self.values.shape[0]

    @property
    def d(self) -> int:
        return self.values.shape[1]

    @property
    def discrete_mask(self) -> np.ndarray:
        return np.array([c > 0 for c in self.cardinalities], dtype=bool)

    def column(self, name: str) -> np.ndarray:
        return self.values[:, self.names.index(name)]

    def take(self, rows: np.ndarray) -> "SampleMatrix":
        return SampleMatrix(self.values[rows], self.names, self.cardinalities)

    def to_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame(self.values, columns=list(self.names))
        for name, card in zip(self.names, self.cardinalities):
            if card > 0:
                frame[name] = frame[name].astype(int)
        return frame


@dataclass(frozen=True)
class Scm:
    """Structural causal model ``(graph, domains, mechanisms, noises)``."""

    graph: Dag
    domains: Tuple[VariableDomain, ...]
    mechanisms: Tuple[Mechanism, ...]
    noises: Tuple[NoiseSpec, ...]
    kind: ModelKind = ModelKind.STRUCTURAL

    def __post_init__(self) -> None:
        for name in ("domains", "mechanisms", "noises"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        object.__setattr__(self, "kind", ModelKind(self.kind))
        d = self.graph.node_count
        if not (len(self.domains) == len(self.mechanisms) == len(self.noises) == d):
            raise ModelError(
                f"model has {d} nodes but {len(self.domains)} domains, "
                f"{len(self.mechanisms)} mechanisms and {len(self.noises)} noises"
            )
        pools = []
        for v in range(d):
            self._check_node(v)
            if isinstance(self.noises[v], EmpiricalJoint):
                pools.append(self.noises[v].pool)
        if any(p is not pools[0] and not np.array_equal(p, pools[0]) for p in pools):
            raise ModelError("all empirical noises of a model must share one pool")

    def _check_node(self, v: int) -> None:
        label = self.graph.labels[v]
        mech, domain = self.mechanisms[v], self.domains[v]
        parents = self.graph.parents(v)
        if mech.arity is not None and mech.arity != len(parents):
            raise ModelError(
                f"mechanism of {label} expects {mech.arity} parents, "
                f"graph gives {len(parents)}"
            )
        if isinstance(mech, Fixed) and not domain.contains(mech.value):
            raise DomainError(f"fixed value {mech.value} outside domain of {label}")
        if isinstance(mech, Cpt):
            matches = (
                isinstance(domain, Discrete)
                and domain.cardinality == mech.cardinality
            )
            if not matches:
                raise ModelError(
                    f"table mechanism of {label} needs a matching discrete domain"
                )
            cards = tuple(self.cardinality(p) for p in parents)
            if cards != mech.parent_cards:
                raise ModelError(
                    f"table of {label} is indexed by {mech.parent_cards}, "
                    f"parents have cardinalities {cards}"
                )
        elif isinstance(domain, Discrete) and not isinstance(mech, Fixed):
            raise ModelError(f"discrete node {label} needs a table mechanism")
        if self.kind is ModelKind.BAYES_NET_ONLY and not isinstance(mech, (Cpt, Fixed)):
            raise ModelError("Bayes-net-only models use table mechanisms only")

    @property
    def node_count(self) -> int:
        return self.graph.node_count

    @property
    def labels(self) -> Tuple[str, ...]:
        return self.graph.labels

    def cardinality(self, v: int) -> int:
        """State count of a discrete node, 0 for continuous nodes."""
        domain = self.domains[v]
        return domain.cardinality if isinstance(domain, Discrete) else 0

    @property
    def cardinalities(self) -> Tuple[int, ...]:
        return tuple(self.cardinality(v) for v in range(self.node_count))

    def same_variables(self, other: "Scm") -> bool:
        return self.labels == other.labels and self.domains == other.domains

    def with_mechanism(
        self, v: int, mech: Mechanism, noise: Optional[NoiseSpec] = None
    ) -> "Scm":
        mechanisms = list(self.mechanisms)
        mechanisms[v] = mech
        noises = list(self.noises)
        if noise is not None:
            noises[v] = noise
        return replace(self, mechanisms=tuple(mechanisms), noises=tuple(noises))

    def with_noises(self, noises: Sequence[NoiseSpec]) -> "Scm":
        return replace(self, noises=tuple(noises))

    @classmethod
    def build(
        cls,
        labels: Sequence[str],
        edges: Iterable[Tuple[str, str]],
        mechanisms: Mapping[str, Mechanism],
        noises: Mapping[str, NoiseSpec],
        domains: Optional[Mapping[str, VariableDomain]] = None,
        kind: ModelKind = ModelKind.STRUCTURAL,
    ) -> "Scm":
        """Assemble a model from label-keyed parts."""
        graph = Dag.from_labelled_edges(labels, edges)
        doms = domains or {}
        try:
            return cls(
                graph,
                tuple(doms.get(lab, Continuous()) for lab in labels),
                tuple(mechanisms[lab] for lab in labels),
                tuple(noises[lab] for lab in labels),
                kind,
            )
        except KeyError as e:
            raise ModelError(f"no mechanism or noise given for node {e.args[0]}")


def draw_noise(m: Scm, k: int, rng_seed: Seed = None) -> np.ndarray:
    """``k x d`` noise draws, one independent stream per node.

    Empirical-pool noises read whole pool rows chosen by an extra stream.
    """
    if k < 1:
        raise ModelError(f"sample count must be positive, got {k}")
    d = m.node_count
    streams = as_seed_sequence(rng_seed).spawn(d + 1)
    noise = np.empty((k, d))
    pooled: List[int] = []
    for v, spec in enumerate(m.noises):
        if isinstance(spec, EmpiricalJoint):
            pooled.append(v)
        else:
            noise[:, v] = spec.sample(np.random.default_rng(streams[v]), k)
    if pooled:
        first = m.noises[pooled[0]]
        assert isinstance(first, EmpiricalJoint)
        rows = np.random.default_rng(streams[d]).integers(0, first.pool.shape[0], k)
        for v in pooled:
            spec = m.noises[v]
            assert isinstance(spec, EmpiricalJoint)
            noise[:, v] = spec.pool[rows, spec.column]
    return noise


def push_forward(m: Scm, noise: np.ndarray) -> np.ndarray:
    """Evaluate the structural assignments in topological order."""
    noise = np.atleast_2d(noise)
    values = np.zeros_like(noise, dtype=float)
    for v in topological_order(m.graph):
        parents = list(m.graph.parents(v))
        values[:, v] = m.mechanisms[v].evaluate(values[:, parents], noise[:, v])
    return values


def sample(m: Scm, k: int, rng_seed: Seed = None) -> SampleMatrix:
    """Draw ``k`` independent joint samples by ancestral sampling.

    The same seed always gives bitwise-identical output.
    """
    values = push_forward(m, draw_noise(m, k, rng_seed))
    return SampleMatrix(values, m.labels, m.cardinalities)


def apply_intervention(m: Scm, iv: Intervention) -> Scm:
    """Hard intervention: fix each assigned node and cut its incoming edges.

    Raises:
        DomainError: If an assigned value lies outside its node's domain.
    """
    iv.validate(m)
    if not iv.assignments:
        return m
    mechanisms = list(m.mechanisms)
    noises = list(m.noises)
    for v, value in iv.assignments:
        mechanisms[v] = Fixed(value)
        noises[v] = PointMass(value)
    return replace(
        m,
        graph=m.graph.without_incoming(iv.nodes),
        mechanisms=tuple(mechanisms),
        noises=tuple(noises),
    )


def perturb_mechanism(m: Scm, node: int, epsilon: float, rng_seed: Seed = None) -> Scm:
    """Replace ``f_i`` by ``(1 - epsilon) f_i + epsilon g_i`` for a fresh ``g_i``.

    ``g_i`` is drawn from the same family as ``f_i``.

    Raises:
        ModelError: If the node is discrete or epsilon is outside [0, 1].
    """
    if not 0.0 <= epsilon <= 1.0:
        raise ModelError(f"epsilon must lie in [0, 1], got {epsilon}")
    if not 0 <= node < m.node_count:
        raise ModelError(f"node index {node} outside [0, {m.node_count})")
    if isinstance(m.domains[node], Discrete):
        raise ModelError(
            f"mechanism mixing is only defined for continuous nodes, "
            f"{m.labels[node]} is discrete"
        )
    if epsilon == 0.0:
        return m
    rng = np.random.default_rng(as_seed_sequence(rng_seed))
    base = m.mechanisms[node]
    other = random_mechanism_like(base, rng)
    logger.debug(f"Mixing mechanism of {m.labels[node]} with epsilon={epsilon}")
    return m.with_mechanism(node, Mix(base, other, epsilon))
