"""Test suite for the structural graph distances.

This module tests:
- SHD with both reversal conventions
- SID on small hand-checked graphs
- SID verdicts against exact enumeration of interventional distributions
"""

import itertools

import numpy as np
import pytest

from src.errors import GraphError
from src.generators import random_bayes_net
from src.graph import Dag, random_dag
from src.graph_metrics import adjustment_valid, shd, sid, sid_pairs


@pytest.fixture
def chain():
    """Create the chain A -> B -> C.

    Returns:
        A three-node Dag.
    """
    return Dag.from_labelled_edges(["A", "B", "C"], [("A", "B"), ("B", "C")])


def _joint(bn, states, cut=None):
    """Probability of every state, optionally without the factor of ``cut``."""
    p = np.ones(len(states))
    for v in range(bn.node_count):
        if v == cut:
            continue
        parents = list(bn.graph.parents(v))
        probs = bn.mechanisms[v].probabilities(states[:, parents])
        p *= probs[np.arange(len(states)), states[:, v]]
    return p


def _adjustment_is_exact(bn, h, i, j, states):
    """Compare parent adjustment in ``h`` with the true do-distribution in ``bn``."""
    joint = _joint(bn, states)
    cut = _joint(bn, states, cut=i)
    z = list(h.parents(i))
    configs = {tuple(row) for row in states[:, z]}
    for v in (0, 1):
        at_v = states[:, i] == v
        for xj in (0, 1):
            hit = states[:, j] == xj
            truth = cut[at_v & hit].sum()
            estimate = 0.0
            for config in configs:
                in_z = np.all(states[:, z] == np.array(config), axis=1)
                condition = joint[at_v & in_z].sum()
                share = joint[at_v & in_z & hit].sum() / condition
                estimate += joint[in_z].sum() * share
            if abs(truth - estimate) > 1e-9:
                return False
    return True


def test_shd_identical(chain):
    """Test that a graph is at SHD zero from itself."""
    assert shd(chain, chain) == 0


def test_shd_reversal():
    """Test both reversal conventions."""
    g = Dag.from_labelled_edges(["A", "B"], [("A", "B")])
    h = Dag.from_labelled_edges(["A", "B"], [("B", "A")])
    assert shd(g, h) == 1
    assert shd(g, h, reversal_cost=2) == 2


def test_shd_deletions(chain):
    """Test that every missing edge costs one."""
    assert shd(chain, Dag.empty(chain.labels)) == 2


def test_shd_validation(chain):
    """Test size and reversal-cost checks."""
    with pytest.raises(GraphError):
        shd(chain, Dag.empty(["A", "B"]))
    with pytest.raises(GraphError):
        shd(chain, chain, reversal_cost=3)


def test_sid_identical(chain):
    """Test that true parents always give valid adjustment."""
    assert sid(chain, chain) == 0


def test_sid_reversed_edge():
    """Test that reversing the only edge breaks both ordered pairs."""
    g = Dag.from_labelled_edges(["A", "B"], [("A", "B")])
    h = Dag.from_labelled_edges(["A", "B"], [("B", "A")])
    assert sid_pairs(g, h) == [(0, 1), (1, 0)]
    assert sid(g, h) == 2


def test_sid_empty_estimate(chain):
    """Test the empty graph as an estimate of a chain."""
    assert sid_pairs(chain, Dag.empty(chain.labels)) == [(1, 0), (2, 0), (2, 1)]


def test_sid_is_asymmetric(chain):
    """Test that swapping truth and estimate changes SID."""
    empty = Dag.empty(chain.labels)
    assert sid(empty, chain) != sid(chain, empty)


def test_adjustment_criterion_backdoor():
    """Test a confounded pair adjusted by its confounder."""
    g = Dag.from_labelled_edges(
        ["Z", "X", "Y"], [("Z", "X"), ("Z", "Y"), ("X", "Y")]
    )
    assert adjustment_valid(g, 1, 2, {0})
    assert not adjustment_valid(g, 1, 2, set())


def test_adjustment_criterion_forbids_mediators():
    """Test that adjusting for a mediator is invalid."""
    g = Dag.from_labelled_edges(["X", "M", "Y"], [("X", "M"), ("M", "Y")])
    assert not adjustment_valid(g, 0, 2, {1})
    assert adjustment_valid(g, 0, 2, set())


def test_sid_bounds():
    """Test that SID stays within the number of ordered pairs."""
    for seed in range(10):
        g = random_dag(5, 2, seed)
        h = random_dag(5, 2, seed + 100)
        assert 0 <= sid(g, h) <= 20


@pytest.mark.parametrize("seed", range(50))
def test_sid_matches_exact_enumeration(seed):
    """Test graphical SID verdicts against exact interventional distributions."""
    rng = np.random.default_rng(seed)
    d = int(rng.integers(2, 6))
    bn = random_bayes_net(d, 2, rng_seed=seed)
    h = random_dag(d, 2, seed + 1000)
    states = np.array(list(itertools.product((0, 1), repeat=d)))
    wrong = set(sid_pairs(bn.graph, h))
    for i in range(d):
        for j in range(d):
            if i == j:
                continue
            exact = _adjustment_is_exact(bn, h, i, j, states)
            assert exact == ((i, j) not in wrong), (i, j)
