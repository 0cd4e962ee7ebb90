"""Test suite for structural causal models.

This module tests:
- Model assembly and validation
- Ancestral sampling and seed reproducibility
- Hard interventions
- Mechanism perturbation
- Shared empirical noise pools
"""

import numpy as np
import pytest

from src.errors import DomainError, ModelError
from src.generators import random_bayes_net, two_node_model
from src.mechanisms import Discrete, EmpiricalJoint, Fixed, Gaussian, Linear, Mix
from src.scm import (
    Evidence,
    Intervention,
    Scm,
    apply_intervention,
    derive_seed,
    perturb_mechanism,
    push_forward,
    sample,
)


@pytest.fixture
def model():
    """Create the model A ~ N(0, 1), B := 2A + N(0, 1).

    Returns:
        A two-node linear-Gaussian Scm.
    """
    return two_node_model(beta=2.0)


def test_build_requires_every_mechanism():
    """Test that a missing mechanism is reported."""
    with pytest.raises(ModelError, match="B"):
        Scm.build(["A", "B"], [], {"A": Linear([])}, {"A": Gaussian(), "B": Gaussian()})


def test_arity_must_match_parents():
    """Test that a mechanism's arity must match the graph."""
    with pytest.raises(ModelError, match="expects"):
        Scm.build(
            ["A", "B"],
            [("A", "B")],
            {"A": Linear([]), "B": Linear([1.0, 1.0])},
            {"A": Gaussian(), "B": Gaussian()},
        )


def test_discrete_node_needs_table():
    """Test that a discrete node cannot carry a linear mechanism."""
    with pytest.raises(ModelError):
        Scm.build(
            ["A"], [], {"A": Linear([])}, {"A": Gaussian()}, {"A": Discrete(2)}
        )


def test_sample_is_reproducible(model):
    """Test that a fixed seed gives identical samples."""
    first = sample(model, 200, 11)
    second = sample(model, 200, 11)
    assert np.array_equal(first.values, second.values)
    assert first.names == ("A", "B")
    assert first.k == 200 and first.d == 2


def test_sample_rejects_zero_rows(model):
    """Test that at least one sample is required."""
    with pytest.raises(ModelError):
        sample(model, 0, 1)


def test_sample_moments(model):
    """Test the sampled covariance of the linear model."""
    values = sample(model, 40000, 5).values
    cov = np.cov(values.T)
    assert cov[0, 0] == pytest.approx(1.0, abs=0.05)
    assert cov[0, 1] == pytest.approx(2.0, abs=0.1)
    assert cov[1, 1] == pytest.approx(5.0, abs=0.2)


def test_same_seed_shares_noise(model):
    """Test that models with the same noise read the same noise streams."""
    other = two_node_model(beta=-1.0)
    x = sample(model, 50, 3).values
    y = sample(other, 50, 3).values
    assert np.array_equal(x[:, 0], y[:, 0])
    assert np.allclose(x[:, 1] - 2 * x[:, 0], y[:, 1] + y[:, 0])


def test_intervention_fixes_node(model):
    """Test that do(B = 3) pins B and leaves A untouched."""
    cut = apply_intervention(model, Intervention(((1, 3.0),)))
    assert cut.graph.edges == frozenset()
    assert isinstance(cut.mechanisms[1], Fixed)
    values = sample(cut, 100, 2).values
    assert np.all(values[:, 1] == 3.0)
    assert np.array_equal(values[:, 0], sample(model, 100, 2).values[:, 0])


def test_intervention_on_root_propagates(model):
    """Test that do(A = 1) shifts B's mean to 2."""
    values = sample(apply_intervention(model, Intervention(((0, 1.0),))), 20000, 4)
    assert values.column("B").mean() == pytest.approx(2.0, abs=0.05)


def test_empty_intervention_is_identity(model):
    """Test that the empty intervention returns the model itself."""
    assert apply_intervention(model, Intervention()) is model


def test_intervention_outside_domain():
    """Test that a value outside a discrete domain is rejected."""
    bn = random_bayes_net(3, 1, 0)
    with pytest.raises(DomainError):
        apply_intervention(bn, Intervention(((0, 5.0),)))


def test_assignment_rejects_duplicates():
    """Test that a node may be assigned only once."""
    with pytest.raises(ModelError):
        Evidence(((0, 1.0), (0, 2.0)))


def test_assignments_are_sorted():
    """Test that assignments are stored in node order."""
    iv = Intervention(((2, 1.0), (0, -1.0)))
    assert iv.nodes == (0, 2)
    assert iv.describe(["A", "B", "C"]) == "A=-1, C=1"


def test_perturb_mechanism(model):
    """Test epsilon mixing of a single mechanism."""
    assert perturb_mechanism(model, 1, 0.0, 1) is model
    mixed = perturb_mechanism(model, 1, 0.5, 1)
    assert isinstance(mixed.mechanisms[1], Mix)
    assert mixed.mechanisms[0] == model.mechanisms[0]
    with pytest.raises(ModelError):
        perturb_mechanism(model, 1, 1.5, 1)


def test_perturb_rejects_discrete_nodes():
    """Test that discrete nodes cannot be mixed."""
    with pytest.raises(ModelError, match="continuous"):
        perturb_mechanism(random_bayes_net(2, 1, 0), 0, 0.3, 1)


def test_empirical_pool_keeps_rows_together(model):
    """Test that pooled noises are drawn row by row."""
    pool = np.array([[1.0, 10.0], [2.0, 20.0]])
    pooled = model.with_noises([EmpiricalJoint(pool, 0), EmpiricalJoint(pool, 1)])
    values = sample(pooled, 100, 9).values
    residual = values[:, 1] - 2 * values[:, 0]
    assert np.all(residual == 10 * values[:, 0])


def test_pools_must_be_shared(model):
    """Test that two different pools in one model are rejected."""
    with pytest.raises(ModelError, match="pool"):
        model.with_noises(
            [EmpiricalJoint(np.zeros((2, 2)), 0), EmpiricalJoint(np.ones((2, 2)), 1)]
        )


def test_push_forward(model):
    """Test evaluating the structural assignments on given noise."""
    values = push_forward(model, np.array([[1.0, 0.5]]))
    assert values.tolist() == [[1.0, 2.5]]


def test_derive_seed_keys_give_distinct_streams():
    """Test that derived seeds depend on their key."""
    a = np.random.default_rng(derive_seed(0, 1, 2)).random()
    b = np.random.default_rng(derive_seed(0, 1, 3)).random()
    c = np.random.default_rng(derive_seed(0, 1, 2)).random()
    assert a != b
    assert a == c


def test_to_frame_keeps_integer_codes():
    """Test that discrete columns come out as integers."""
    frame = sample(random_bayes_net(3, 1, 2), 10, 0).to_frame()
    assert all(str(dtype).startswith("int") for dtype in frame.dtypes)
