"""Test suite for the linear-Gaussian closed forms.

This module tests:
- Joint, interventional and conditional Gaussians
- Exact OD and ID on the two-node case study
- The hidden-confounder construction
- Agreement with sampled moments
"""

import ast
import inspect

import numpy as np
import pytest

import src.analytic
from src.analytic import (
    LinearGaussianView,
    analytic_id,
    analytic_id_terms,
    analytic_od,
    conditional_gaussian,
    gaussian_distance,
    interventional_gaussian,
    joint_gaussian,
    noise_posterior,
)
from src.errors import ModelError, SingularMatrixError
from src.generators import (
    case_study_pair,
    hidden_confounder_pair,
    random_scm,
    two_node_model,
)
from src.graph import Dag
from src.mechanisms import Continuous, Gaussian, Linear, PointMass
from src.scm import Intervention, Scm, sample
from src.weights import Normalization

CASE_STUDY_OD = np.sqrt(6 - 2 * np.sqrt(5))
DO_A_TERM = 2 * np.sqrt(2 / np.pi)


@pytest.fixture
def pair():
    """Create the case-study pair with unit noise scales.

    Returns:
        Two models on A -> B with opposite effect signs.
    """
    return case_study_pair()


def test_joint_of_two_node_model():
    """Test the joint mean and covariance of A -> B."""
    g = joint_gaussian(two_node_model(beta=2.0, mu_a=1.0, mu_b=0.5, sigma_b=3.0))
    assert np.allclose(g.mean, [1.0, 2.5])
    assert np.allclose(g.cov, [[1.0, 2.0], [2.0, 13.0]])


def test_joint_of_chain_accumulates_variance():
    """Test that a unit-weight chain adds its noise variances."""
    m = Scm(
        Dag.from_labelled_edges(["A", "B", "C"], [("A", "B"), ("B", "C")]),
        (Continuous(),) * 3,
        (Linear([]), Linear([1.0]), Linear([1.0])),
        (Gaussian(),) * 3,
    )
    assert joint_gaussian(m).cov[2, 2] == pytest.approx(3.0)


def test_view_rejects_nonlinear_models():
    """Test that non-linear-Gaussian models have no matrix view."""
    with pytest.raises(ModelError):
        LinearGaussianView.from_scm(random_scm("GPAddit", 3, 1, rng_seed=0, features=4))
    with pytest.raises(ModelError, match="non-Gaussian"):
        LinearGaussianView.from_scm(random_scm("linNGauss", 3, 1, rng_seed=0))


def test_intervention_on_cause():
    """Test do(A = a) on the two-node model."""
    m = two_node_model(beta=2.0, sigma_b=0.5)
    g = interventional_gaussian(m, Intervention(((0, 1.5),)))
    assert np.allclose(g.mean, [1.5, 3.0])
    assert np.allclose(g.cov, [[0.0, 0.0], [0.0, 0.25]])


def test_intervention_on_effect_keeps_cause():
    """Test that do(B = b) leaves the distribution of A untouched."""
    m = two_node_model(beta=2.0, sigma_a=2.0)
    g = interventional_gaussian(m, Intervention(((1, -1.0),)))
    assert np.allclose(g.mean, [0.0, -1.0])
    assert g.cov[0, 0] == pytest.approx(4.0)
    assert g.cov[1, 1] == pytest.approx(0.0)


def test_conditioning_variance():
    """Test the conditional variance of A given B."""
    beta, sigma_a, sigma_b = 2.0, 1.5, 0.5
    g = joint_gaussian(two_node_model(beta, sigma_a=sigma_a, sigma_b=sigma_b))
    cond = conditional_gaussian(g, [1], [1.0])
    expected = sigma_a**2 - beta**2 * sigma_a**4 / (beta**2 * sigma_a**2 + sigma_b**2)
    assert cond.cov[0, 0] == pytest.approx(expected)
    assert cond.mean[1] == 1.0
    assert cond.cov[1, 1] == 0.0


def test_conditioning_on_everything_is_a_point_mass():
    """Test that conditioning on all coordinates leaves no variance."""
    g = joint_gaussian(two_node_model())
    cond = conditional_gaussian(g, [0, 1], [0.3, -0.2])
    assert np.allclose(cond.mean, [0.3, -0.2])
    assert np.allclose(cond.cov, 0.0)


def test_conditioning_on_a_point_mass_fails():
    """Test that a singular observed block is reported."""
    g = interventional_gaussian(two_node_model(), Intervention(((0, 1.0),)))
    with pytest.raises(SingularMatrixError):
        conditional_gaussian(g, [0], [1.0])


def test_case_study_od(pair):
    """Test the closed-form OD of the case-study pair."""
    assert analytic_od(*pair) == pytest.approx(CASE_STUDY_OD, rel=1e-9)
    assert analytic_od(pair[0], pair[0]) == pytest.approx(0.0, abs=1e-6)


def test_case_study_smaller_cause_noise_shrinks_od():
    """Test that a quieter cause makes the observational laws closer."""
    quiet = case_study_pair(sigma_a=0.1, sigma_b=1.0)
    assert analytic_od(*quiet) < CASE_STUDY_OD


def test_case_study_id_terms(pair):
    """Test the per-target exact terms of the case-study pair."""
    terms = analytic_id_terms(*pair)
    assert terms[0] == pytest.approx(CASE_STUDY_OD, rel=1e-9)
    assert terms[1] == pytest.approx(DO_A_TERM, abs=0.03)
    assert terms[2] == pytest.approx(0.0, abs=1e-6)


def test_case_study_id_normalizations(pair):
    """Test uniform and per-node combinations of the case-study terms."""
    uniform = analytic_id(*pair)
    per_node = analytic_id(*pair, normalization=Normalization.PER_NODE)
    assert uniform == pytest.approx((CASE_STUDY_OD + DO_A_TERM) / 3, abs=0.015)
    assert per_node == pytest.approx(1.4, abs=0.2)
    assert per_node == pytest.approx(uniform * 1.5)


def test_analytic_id_of_identical_models(pair):
    """Test that a model is at exact distance zero from itself."""
    assert analytic_id(pair[0], pair[0]) == pytest.approx(0.0, abs=1e-6)


def test_analytic_id_is_relabelling_invariant():
    """Test invariance under the same node permutation of both models."""
    m1 = random_scm("linGauss", 4, 2, rng_seed=1)
    m2 = random_scm("linGauss", 4, 2, rng_seed=2)
    perm = [2, 0, 3, 1]

    def relabel(m):
        inverse = [int(i) for i in np.argsort(perm)]
        mechanisms = []
        for old in inverse:
            # parent weights follow the new ascending parent order
            new_parents = (perm[p] for p in m.graph.parents(old))
            moved = dict(zip(new_parents, m.mechanisms[old].weights))
            mechanisms.append(
                Linear([moved[p] for p in sorted(moved)], m.mechanisms[old].intercept)
            )
        return Scm(
            m.graph.relabel(perm),
            tuple(m.domains[i] for i in inverse),
            tuple(mechanisms),
            tuple(m.noises[i] for i in inverse),
        )

    before = analytic_id(m1, m2, quadrature=16)
    after = analytic_id(relabel(m1), relabel(m2), quadrature=16)
    assert after == pytest.approx(before, rel=1e-6)


def test_hidden_confounder_witness():
    """Test that (X, Y) agree observationally while do(Z) separates them."""
    previous = None
    for lam in (1.0, 2.0, 4.0, 8.0):
        m1, m2 = hidden_confounder_pair(lam)
        p, q = joint_gaussian(m1).marginal([1, 2]), joint_gaussian(m2).marginal([1, 2])
        assert gaussian_distance(p, q) == pytest.approx(0.0, abs=1e-5)
        iv = Intervention(((0, 1.0),))
        gap = gaussian_distance(
            interventional_gaussian(m1, iv), interventional_gaussian(m2, iv)
        )
        if previous is not None:
            assert gap / previous == pytest.approx(2.0, rel=0.01)
        previous = gap


def test_kl_distance(pair):
    """Test the KL variant of the exact OD."""
    value = analytic_od(*pair, kind="kl")
    assert value > 0
    with pytest.raises(ModelError):
        analytic_od(*pair, kind="tv")


def test_joint_matches_sampled_moments():
    """Test the closed form against ancestral sampling."""
    m = random_scm("linGauss", 5, 2, rng_seed=4)
    g = joint_gaussian(m)
    values = sample(m, 50000, 8).values
    std = np.sqrt(np.diag(g.cov))
    assert np.allclose(values.mean(axis=0) / std, g.mean / std, atol=0.03)
    scale = np.outer(std, std)
    assert np.allclose(np.cov(values.T) / scale, g.cov / scale, atol=0.05)


def test_oracle_does_not_import_the_estimators():
    """Test that the closed forms only depend on the model layer."""
    tree = ast.parse(inspect.getsource(src.analytic))
    imported = {
        node.module
        for node in ast.walk(tree)
        if isinstance(node, ast.ImportFrom) and node.module
    }
    assert "distances" not in imported
    assert "weights" in imported


def test_noise_posterior_of_chain():
    """Test the exact noise posterior of A -> B -> C given C."""
    m = Scm(
        Dag.from_labelled_edges(["A", "B", "C"], [("A", "B"), ("B", "C")]),
        (Continuous(),) * 3,
        (Linear([]), Linear([1.0]), Linear([0.5])),
        (Gaussian(),) * 3,
    )
    post = noise_posterior(m, [2], [1.5])
    assert np.allclose(post.mean, [0.5, 0.5, 1.0])
    expected = np.eye(3) - np.outer([0.5, 0.5, 1.0], [0.5, 0.5, 1.0]) / 1.5
    assert np.allclose(post.cov, expected)


def test_noise_posterior_needs_random_evidence():
    """Test that evidence on a noiseless node cannot be conditioned on."""
    m = Scm(
        Dag.from_labelled_edges(["A"], []),
        (Continuous(),),
        (Linear([]),),
        (PointMass(1.0),),
    )
    with pytest.raises(SingularMatrixError):
        noise_posterior(m, [0], [1.0])
