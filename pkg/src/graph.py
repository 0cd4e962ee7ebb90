"""Directed acyclic graphs and the graph primitives the rest of the package uses.

This module provides:
- An immutable ``Dag`` over indexed, labelled nodes
- Topological order, ancestors and descendants
- d-separation via the moralized ancestral graph
- Skeletons, v-structures and Markov equivalence class enumeration
- Erdős–Rényi style random DAGs oriented along a random permutation

Example:
    g = Dag.from_labelled_edges(["A", "B", "C"], [("A", "B"), ("B", "C")])
    topological_order(g)          # [0, 1, 2]
    d_separated(g, {0}, {2}, {1})  # True
"""

import logging
from dataclasses import dataclass, field
from typing import (
    Any,
    Dict,
    FrozenSet,
    Iterable,
    List,
    Optional,
    Sequence,
    Set,
    Tuple,
    Union,
)

import networkx as nx
import numpy as np

from . import settings
from .errors import CapExceededError, GraphError

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]
NodeSet = FrozenSet[int]
VStructure = Tuple[int, int, int]


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph on nodes ``0..d-1`` with string labels.

    Edges are ``(parent, child)`` index pairs. Instances are immutable and
    validated on construction.
    """

    labels: Tuple[str, ...]
    edges: FrozenSet[Edge]
    _nx: Any = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", tuple(str(lab) for lab in self.labels))
        object.__setattr__(
            self, "edges", frozenset((int(a), int(b)) for a, b in self.edges)
        )
        d = len(self.labels)
        if d < 1:
            raise GraphError("a graph needs at least one node")
        if len(set(self.labels)) != d:
            raise GraphError(f"node labels must be unique: {list(self.labels)}")
        for a, b in self.edges:
            if not (0 <= a < d and 0 <= b < d):
                raise GraphError(f"edge ({a}, {b}) has an index outside [0, {d})")
            if a == b:
                raise GraphError(f"self-loop on node {self.labels[a]}")
        graph = nx.DiGraph()
        graph.add_nodes_from(range(d))
        graph.add_edges_from(self.edges)
        if not nx.is_directed_acyclic_graph(graph):
            cycle = nx.find_cycle(graph)
            named = " -> ".join(self.labels[a] for a, _ in cycle)
            raise GraphError(f"graph contains a directed cycle: {named}")
        object.__setattr__(self, "_nx", graph)

    @classmethod
    def from_labelled_edges(
        cls, labels: Sequence[str], edges: Iterable[Tuple[str, str]]
    ) -> "Dag":
        """Build a graph from label pairs instead of indices."""
        index = {lab: i for i, lab in enumerate(labels)}
        try:
            pairs = [(index[a], index[b]) for a, b in edges]
        except KeyError as e:
            raise GraphError(f"unknown node label: {e.args[0]}")
        return cls(tuple(labels), frozenset(pairs))

    @classmethod
    def empty(cls, labels: Sequence[str]) -> "Dag":
        return cls(tuple(labels), frozenset())

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def nx_graph(self) -> nx.DiGraph:
        """Read-only networkx view; do not mutate."""
        return self._nx

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise GraphError(f"unknown node label: {label}")

    def parents(self, v: int) -> Tuple[int, ...]:
        """Parents of ``v`` in ascending index order."""
        return tuple(sorted(self._nx.predecessors(v)))

    def children(self, v: int) -> Tuple[int, ...]:
        return tuple(sorted(self._nx.successors(v)))

    def has_edge(self, a: int, b: int) -> bool:
        return (a, b) in self.edges

    def adjacent(self, a: int, b: int) -> bool:
        return (a, b) in self.edges or (b, a) in self.edges

    def without_incoming(self, nodes: Iterable[int]) -> "Dag":
        """Copy of the graph with every edge into ``nodes`` removed."""
        targets = set(nodes)
        return Dag(self.labels, frozenset(e for e in self.edges if e[1] not in targets))

    def without_edges(self, removed: Iterable[Edge]) -> "Dag":
        drop = set(removed)
        return Dag(self.labels, frozenset(e for e in self.edges if e not in drop))

    def adjacency_matrix(self) -> np.ndarray:
        """d x d 0/1 matrix with ``A[parent, child] = 1``."""
        mat = np.zeros((self.node_count, self.node_count), dtype=int)
        for a, b in self.edges:
            mat[a, b] = 1
        return mat

    def relabel(self, permutation: Sequence[int]) -> "Dag":
        """Graph with node ``i`` moved to position ``permutation[i]``."""
        d = self.node_count
        labels: List[str] = [""] * d
        for old, new in enumerate(permutation):
            labels[new] = self.labels[old]
        edges = frozenset((permutation[a], permutation[b]) for a, b in self.edges)
        return Dag(tuple(labels), edges)


def _check_nodes(g: Dag, nodes: Iterable[int]) -> NodeSet:
    result = frozenset(int(v) for v in nodes)
    for v in result:
        if not 0 <= v < g.node_count:
            raise GraphError(f"node index {v} outside [0, {g.node_count})")
    return result


def topological_order(g: Dag) -> List[int]:
    """Parent-before-child order; ties resolved by smallest index first."""
    return list(nx.lexicographical_topological_sort(g.nx_graph))


def ancestors(g: Dag, v: int) -> NodeSet:
    """Strict ancestors of ``v`` (``v`` itself excluded)."""
    _check_nodes(g, [v])
    return frozenset(nx.ancestors(g.nx_graph, v))


def descendants(g: Dag, v: int) -> NodeSet:
    """Strict descendants of ``v`` (``v`` itself excluded)."""
    _check_nodes(g, [v])
    return frozenset(nx.descendants(g.nx_graph, v))


def d_separated(
    g: Dag, x: Iterable[int], y: Iterable[int], z: Iterable[int] = ()
) -> bool:
    """Whether ``z`` d-separates ``x`` from ``y`` in ``g``.

    Uses the equivalent moralization test: restrict ``g`` to the ancestors of
    ``x | y | z``, marry co-parents, drop directions, delete ``z`` and check
    that no component touches both ``x`` and ``y``.

    Raises:
        GraphError: If the three sets overlap or contain invalid indices.
    """
    xs, ys, zs = _check_nodes(g, x), _check_nodes(g, y), _check_nodes(g, z)
    if xs & ys or xs & zs or ys & zs:
        raise GraphError("d-separation needs pairwise disjoint node sets")
    if not xs or not ys:
        return True

    relevant: Set[int] = set(xs | ys | zs)
    for v in list(relevant):
        relevant |= nx.ancestors(g.nx_graph, v)

    moral = nx.moral_graph(g.nx_graph.subgraph(relevant))
    moral.remove_nodes_from(zs)
    for component in nx.connected_components(moral):
        if component & xs and component & ys:
            return False
    return True


def skeleton_and_vstructures(
    g: Dag,
) -> Tuple[FrozenSet[Edge], FrozenSet[VStructure]]:
    """Undirected skeleton and collider triples of ``g``.

    Skeleton edges are ``(min, max)`` pairs; v-structures are ``(a, c, b)``
    with ``a -> c <- b``, ``a < b`` and ``a``, ``b`` non-adjacent.
    """
    skeleton = frozenset((min(a, b), max(a, b)) for a, b in g.edges)
    vstructures: Set[VStructure] = set()
    for c in range(g.node_count):
        pa = g.parents(c)
        for i, a in enumerate(pa):
            for b in pa[i + 1:]:
                if not g.adjacent(a, b):
                    vstructures.add((a, c, b))
    return skeleton, frozenset(vstructures)


def _reaches(edges: Sequence[Edge], start: int, goal: int) -> bool:
    succ: Dict[int, List[int]] = {}
    for a, b in edges:
        succ.setdefault(a, []).append(b)
    stack, seen = [start], {start}
    while stack:
        node = stack.pop()
        if node == goal:
            return True
        for nxt in succ.get(node, []):
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return False


def markov_equivalence_class(g: Dag, node_cap: Optional[int] = None) -> List[Dag]:
    """All DAGs with the same skeleton and v-structures as ``g``.

    Orientations of the skeleton are enumerated edge by edge; partial
    orientations that close a cycle or create a collider foreign to ``g`` are
    pruned early.

    Raises:
        CapExceededError: If ``g`` has more nodes than the enumeration cap.
    """
    cap = settings.MEC_NODE_CAP if node_cap is None else node_cap
    if g.node_count > cap:
        raise CapExceededError(
            f"Markov equivalence enumeration is capped at {cap} nodes, "
            f"got {g.node_count}"
        )
    skeleton, vstructures = skeleton_and_vstructures(g)
    pairs = sorted(skeleton)
    members: List[Dag] = []

    def foreign_collider(chosen: List[Edge], new: Edge) -> bool:
        u, v = new
        for a, b in chosen:
            if b == v and a != u and (min(a, u), max(a, u)) not in skeleton:
                if (min(a, u), v, max(a, u)) not in vstructures:
                    return True
        return False

    def extend(i: int, chosen: List[Edge]) -> None:
        if i == len(pairs):
            candidate = Dag(g.labels, frozenset(chosen))
            if skeleton_and_vstructures(candidate)[1] == vstructures:
                members.append(candidate)
            return
        a, b = pairs[i]
        for u, v in ((a, b), (b, a)):
            if _reaches(chosen, v, u) or foreign_collider(chosen, (u, v)):
                continue
            extend(i + 1, chosen + [(u, v)])

    extend(0, [])
    logger.debug(f"Markov equivalence class of size {len(members)}")
    return members


def random_dag(
    d: int,
    expected_degree: float,
    rng_seed: Union[None, int, np.random.SeedSequence] = None,
    labels: Optional[Sequence[str]] = None,
) -> Dag:
    """Erdős–Rényi DAG with the given expected node degree.

    Each unordered pair is included with probability
    ``min(1, expected_degree / (d - 1))`` and oriented from the earlier to the
    later node of a uniform random permutation, which keeps the result acyclic.
    """
    if d < 1:
        raise GraphError("random_dag needs at least one node")
    if expected_degree < 0:
        raise GraphError("expected_degree must be non-negative")
    rng = np.random.default_rng(rng_seed)
    rank = np.empty(d, dtype=int)
    rank[rng.permutation(d)] = np.arange(d)
    p = min(1.0, expected_degree / (d - 1)) if d > 1 else 0.0
    edges: Set[Edge] = set()
    for i in range(d):
        for j in range(i + 1, d):
            if rng.random() < p:
                edges.add((i, j) if rank[i] < rank[j] else (j, i))
    names = tuple(labels) if labels is not None else tuple(f"X{i}" for i in range(d))
    return Dag(names, frozenset(edges))
