"""Structural distances between causal graphs.

- ``shd``: edge-status disagreements, a reversal costing 1 (or 2 on request)
- ``sid``: ordered pairs whose interventional distribution parent adjustment
  in the estimated graph gets wrong, decided with the adjustment criterion
"""

import logging
from typing import List, Set, Tuple

from .errors import GraphError
from .graph import Dag, d_separated, descendants

logger = logging.getLogger(__name__)


def _check_sizes(g: Dag, h: Dag) -> None:
    if g.node_count != h.node_count:
        raise GraphError(
            f"graphs have different node counts: {g.node_count} and {h.node_count}"
        )


def shd(g: Dag, h: Dag, reversal_cost: int = 1) -> int:
    """Structural Hamming distance.

    Every unordered pair whose status (absent, ``i -> j``, ``j -> i``)
    differs costs 1, except a reversal which costs ``reversal_cost``.
    """
    _check_sizes(g, h)
    if reversal_cost not in (1, 2):
        raise GraphError("reversal cost must be 1 or 2")
    total = 0
    for a in range(g.node_count):
        for b in range(a + 1, g.node_count):
            left = (g.has_edge(a, b), g.has_edge(b, a))
            right = (h.has_edge(a, b), h.has_edge(b, a))
            if left == right:
                continue
            reversed_edge = any(left) and any(right)
            total += reversal_cost if reversed_edge else 1
    return total


def adjustment_valid(g: Dag, i: int, j: int, z: Set[int]) -> bool:
    """Whether ``z`` is a valid adjustment set for ``i`` on ``j`` in ``g``."""
    de_i = descendants(g, i)
    on_paths = [w for w in de_i if w == j or j in descendants(g, w)]
    forbidden: Set[int] = set()
    for w in on_paths:
        forbidden |= {w} | descendants(g, w)
    if z & forbidden:
        return False
    first_edges = [(i, w) for w in g.children(i) if w in on_paths]
    backdoor = g.without_edges(first_edges)
    return d_separated(backdoor, {i}, {j}, z)


def sid_pairs(g: Dag, h: Dag) -> List[Tuple[int, int]]:
    """Ordered pairs ``(i, j)`` falsely inferred by parent adjustment in ``h``.

    ``g`` is the ground truth.
    """
    _check_sizes(g, h)
    wrong: List[Tuple[int, int]] = []
    for i in range(g.node_count):
        z = set(h.parents(i))
        de_i = descendants(g, i)
        for j in range(g.node_count):
            if i == j:
                continue
            if j in z:
                correct = j not in de_i
            else:
                correct = adjustment_valid(g, i, j, z)
            if not correct:
                wrong.append((i, j))
    return wrong


def sid(g: Dag, h: Dag) -> int:
    """Structural intervention distance of ``h`` with respect to ``g``."""
    value = len(sid_pairs(g, h))
    logger.debug(f"SID {value} over {g.node_count} nodes")
    return value
