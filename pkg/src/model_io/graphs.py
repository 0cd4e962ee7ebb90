"""Graph files: discovery outputs, edge lists and adjacency matrices.

Edge-list lines read ``A -> B`` (directed) or ``A -- B`` (undirected); blank
lines and ``#`` comments are ignored. Outputs with undirected edges become a
``PartialGraph`` whose orientations are chosen at fitting time.
"""

import itertools
import logging
import re
from dataclasses import dataclass
from pathlib import Path
from typing import FrozenSet, Iterator, List, Sequence, Set, Tuple, Union

import numpy as np
import pandas as pd

from ..errors import GraphError, GraphOutputError
from ..graph import Dag, Edge

logger = logging.getLogger(__name__)

_LINE = re.compile(r"^\s*(\S+?)\s*(->|--)\s*(\S+)\s*$")

Orientation = Tuple[int, ...]


@dataclass(frozen=True)
class PartialGraph:
    """Directed edges plus undirected pairs still to be oriented.

    Undirected pairs are stored as ``(min, max)`` index pairs in sorted order;
    an orientation vector holds 0 for ``min -> max`` and 1 for ``max -> min``.
    """

    labels: Tuple[str, ...]
    directed: FrozenSet[Edge]
    undirected: Tuple[Edge, ...]

    @property
    def node_count(self) -> int:
        return len(self.labels)

    @property
    def pending(self) -> int:
        return len(self.undirected)

    def orient(self, orientation: Orientation) -> Dag:
        """DAG for one orientation vector; raises GraphError if it is cyclic."""
        if len(orientation) != self.pending:
            raise GraphError(
                f"orientation has {len(orientation)} entries, {self.pending} pending"
            )
        edges: Set[Edge] = set(self.directed)
        for (a, b), flip in zip(self.undirected, orientation):
            edges.add((b, a) if flip else (a, b))
        return Dag(self.labels, frozenset(edges))

    def completions(self) -> Iterator[Tuple[Orientation, Dag]]:
        """Acyclic completions in lexicographic order of orientation vectors."""
        for orientation in itertools.product((0, 1), repeat=self.pending):
            try:
                yield orientation, self.orient(orientation)
            except GraphError:
                continue


def parse_graph_output(
    text: str, labels: Sequence[str]
) -> Union[Dag, PartialGraph]:
    """Read a discovery output over known node labels.

    Raises:
        GraphOutputError: On unknown labels, malformed lines, self-loops,
            conflicting statements or a directed cycle.
    """
    index = {lab: i for i, lab in enumerate(labels)}
    directed: Set[Edge] = set()
    undirected: Set[Edge] = set()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        match = _LINE.match(line)
        if match is None:
            raise GraphOutputError(f"line {lineno}: cannot read edge '{raw.strip()}'")
        left, arrow, right = match.groups()
        for name in (left, right):
            if name not in index:
                raise GraphOutputError(f"line {lineno}: unknown node '{name}'")
        a, b = index[left], index[right]
        if a == b:
            raise GraphOutputError(f"line {lineno}: self-loop on '{left}'")
        if arrow == "->":
            directed.add((a, b))
        else:
            undirected.add((min(a, b), max(a, b)))
    overlap = [
        pair for pair in undirected if pair in directed or pair[::-1] in directed
    ]
    if overlap:
        a, b = overlap[0]
        raise GraphOutputError(
            f"edge {labels[a]} -- {labels[b]} is also given a direction"
        )
    try:
        dag = Dag(tuple(labels), frozenset(directed))
    except GraphError as e:
        raise GraphOutputError(f"directed edges do not form a DAG: {e}")
    if not undirected:
        return dag
    pg = PartialGraph(dag.labels, dag.edges, tuple(sorted(undirected)))
    logger.debug(f"partial graph with {pg.pending} undirected edges")
    return pg


def read_graph_output(
    path: Union[str, Path], labels: Sequence[str]
) -> Union[Dag, PartialGraph]:
    """Read an edge list, or an adjacency CSV when the suffix is ``.csv``."""
    path = Path(path)
    if path.suffix.lower() == ".csv":
        return read_adjacency_csv(path, labels)
    return parse_graph_output(path.read_text(encoding="utf-8"), labels)


def edge_list(g: Dag) -> str:
    lines = [f"{g.labels[a]} -> {g.labels[b]}" for a, b in sorted(g.edges)]
    return "\n".join(lines) + ("\n" if lines else "")


def write_edge_list(g: Dag, path: Union[str, Path]) -> Path:
    path = Path(path)
    path.write_text(edge_list(g), encoding="utf-8")
    return path


def write_adjacency_csv(g: Dag, path: Union[str, Path]) -> Path:
    """``d x d`` 0/1 matrix, rows are parents, with labels as header and index."""
    path = Path(path)
    frame = pd.DataFrame(
        g.adjacency_matrix().astype(int), index=list(g.labels), columns=list(g.labels)
    )
    frame.to_csv(path)
    return path


def read_adjacency_csv(
    path: Union[str, Path], labels: Sequence[str]
) -> Union[Dag, PartialGraph]:
    """Adjacency matrix file; a symmetric pair of ones reads as an undirected edge."""
    frame = pd.read_csv(path, index_col=0)
    frame.index = frame.index.astype(str)
    frame.columns = frame.columns.astype(str)
    unknown = [c for c in list(frame.columns) + list(frame.index) if c not in labels]
    if unknown:
        raise GraphOutputError(f"unknown node '{unknown[0]}' in {path}")
    matrix = frame.reindex(index=list(labels), columns=list(labels), fill_value=0)
    values = matrix.to_numpy()
    if not np.isin(values, (0, 1)).all():
        raise GraphOutputError(f"{path} must hold a 0/1 matrix")
    if np.diag(values).any():
        raise GraphOutputError(f"{path} has a self-loop on its diagonal")
    lines: List[str] = []
    for a in range(len(labels)):
        for b in range(len(labels)):
            if not values[a, b]:
                continue
            if values[b, a]:
                if a < b:
                    lines.append(f"{labels[a]} -- {labels[b]}")
            else:
                lines.append(f"{labels[a]} -> {labels[b]}")
    return parse_graph_output("\n".join(lines), labels)
