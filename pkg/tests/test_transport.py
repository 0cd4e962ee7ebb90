"""Test suite for the base distances.

This module tests:
- Exact and sliced empirical Wasserstein distances
- The exact-solve cap
- Mixed continuous/discrete sample matrices
- Closed-form Gaussian W2 and KL
- Metric properties against a brute-force assignment oracle
"""

import itertools

import numpy as np
import pytest
from scipy.spatial.distance import cdist

from src.errors import CapExceededError, ModelError, SingularMatrixError
from src.scm import SampleMatrix
from src.transport import (
    BaseDistanceConfig,
    BaseKind,
    GaussianDist,
    embed,
    empirical_distance,
    empirical_wasserstein,
    gaussian_kl,
    gaussian_w2_squared,
)


@pytest.fixture
def rng():
    """Create a seeded random generator.

    Returns:
        A numpy Generator.
    """
    return np.random.default_rng(0)


def test_identical_sets_have_zero_distance(rng):
    """Test that a set is at distance zero from itself."""
    x = rng.normal(size=(64, 3))
    assert empirical_wasserstein(x, x) == pytest.approx(0.0, abs=1e-12)


def test_translation_distance(rng):
    """Test that shifting every point moves W2 and W1 by the shift length."""
    x = rng.normal(size=(80, 2))
    shift = np.array([3.0, 4.0])
    assert empirical_wasserstein(x, x + shift) == pytest.approx(5.0)
    w1 = BaseDistanceConfig(kind=BaseKind.W1)
    assert empirical_wasserstein(x, x + shift, w1) == pytest.approx(5.0)


def test_one_dimensional_sorting_ignores_cap(rng):
    """Test that 1-D sets above the cap are still solved exactly."""
    x = rng.normal(size=5000)
    cfg = BaseDistanceConfig(exact_cap=10)
    assert empirical_wasserstein(x, x + 2.0, cfg) == pytest.approx(2.0)


def test_cap_is_enforced(rng):
    """Test that multi-dimensional exact solves respect the cap."""
    x = rng.normal(size=(20, 2))
    with pytest.raises(CapExceededError, match="sliced"):
        empirical_wasserstein(x, x, BaseDistanceConfig(exact_cap=10))


def test_sliced_translation(rng):
    """Test that sliced W1 is bounded by the shift and positive."""
    x = rng.normal(size=(500, 2))
    cfg = BaseDistanceConfig(kind="sliced", projections=200, seed=3)
    value = empirical_wasserstein(x, x + np.array([1.0, 0.0]), cfg)
    assert 0.4 < value <= 1.0 + 1e-9


def test_unequal_sizes_are_subsampled(rng):
    """Test that the larger set is subsampled to the smaller one."""
    x = np.zeros((30, 1))
    y = np.ones((50, 1))
    assert empirical_wasserstein(x, y) == pytest.approx(1.0)


def test_dimension_mismatch(rng):
    """Test that sets of different widths are rejected."""
    with pytest.raises(ModelError):
        empirical_wasserstein(np.zeros((5, 2)), np.zeros((5, 3)))


def test_embed_discrete_states_at_unit_distance():
    """Test the one-hot embedding of discrete columns."""
    sm = SampleMatrix(np.array([[0.0, 1.5], [2.0, -1.0]]), ("D", "C"), (3, 0))
    points = embed(sm)
    assert points.shape == (2, 4)
    assert np.linalg.norm(points[0, :3] - points[1, :3]) == pytest.approx(1.0)
    assert points[:, 3].tolist() == [1.5, -1.0]


def test_empirical_distance_on_discrete_samples():
    """Test that every mismatched discrete value costs one unit of squared cost."""
    x = SampleMatrix(np.zeros((10, 1)), ("D",), (2,))
    y = SampleMatrix(np.array([[0.0]] * 6 + [[1.0]] * 4), ("D",), (2,))
    assert empirical_distance(x, y) == pytest.approx(np.sqrt(0.4))


def test_empirical_distance_needs_same_variables():
    """Test that sample matrices over different variables are rejected."""
    x = SampleMatrix(np.zeros((3, 1)), ("A",), (0,))
    y = SampleMatrix(np.zeros((3, 1)), ("B",), (0,))
    with pytest.raises(ModelError):
        empirical_distance(x, y)


def test_gaussian_w2_closed_form():
    """Test W2 between one-dimensional Gaussians."""
    p = GaussianDist([0.0], [[1.0]])
    q = GaussianDist([1.0], [[4.0]])
    assert gaussian_w2_squared(p, q) == pytest.approx(1.0 + 1.0)


def test_gaussian_w2_degenerate():
    """Test W2 with a point mass."""
    p = GaussianDist([0.0, 2.0], [[1.0, 0.0], [0.0, 0.0]])
    q = GaussianDist([0.0, 2.0], [[1.0, 0.0], [0.0, 0.0]])
    assert gaussian_w2_squared(p, q) == pytest.approx(0.0, abs=1e-12)


def test_gaussian_kl_closed_form():
    """Test KL between one-dimensional Gaussians."""
    p = GaussianDist([0.0], [[1.0]])
    q = GaussianDist([1.0], [[2.0]])
    expected = 0.5 * (np.log(2.0) - 1.0 + 0.5 + 0.5)
    assert gaussian_kl(p, q) == pytest.approx(expected)


def test_gaussian_kl_singular_second_argument():
    """Test that KL needs a nonsingular second covariance."""
    p = GaussianDist([0.0], [[1.0]])
    q = GaussianDist([0.0], [[0.0]])
    with pytest.raises(SingularMatrixError):
        gaussian_kl(p, q)
    assert gaussian_kl(q, p) == float("inf")


def test_gaussian_dist_validation():
    """Test covariance shape, symmetry and definiteness checks."""
    with pytest.raises(ModelError):
        GaussianDist([0.0, 0.0], [[1.0]])
    with pytest.raises(ModelError):
        GaussianDist([0.0, 0.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ModelError):
        GaussianDist([0.0], [[-1.0]])


def brute_force_wasserstein(x, y, kind):
    """Best matching over every permutation of ``y``."""
    metric = "euclidean" if kind is BaseKind.W1 else "sqeuclidean"
    cost = cdist(x, y, metric=metric)
    rows = np.arange(len(x))
    best = min(
        cost[rows, list(perm)].mean() for perm in itertools.permutations(rows)
    )
    return best if kind is BaseKind.W1 else np.sqrt(best)


@pytest.mark.parametrize("kind", [BaseKind.W1, BaseKind.W2])
@pytest.mark.parametrize("k", range(2, 8))
def test_exact_solve_matches_permutation_search(kind, k):
    """Test the assignment solve against every matching of small clouds."""
    rng = np.random.default_rng(100 + k)
    cfg = BaseDistanceConfig(kind=kind)
    for _ in range(5):
        x, y = rng.normal(size=(k, 2)), rng.normal(size=(k, 2))
        expected = brute_force_wasserstein(x, y, kind)
        assert empirical_wasserstein(x, y, cfg) == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("kind", [BaseKind.W1, BaseKind.W2])
def test_exact_distance_is_a_metric(kind):
    """Test symmetry and the triangle inequality on random triples."""
    rng = np.random.default_rng(7)
    cfg = BaseDistanceConfig(kind=kind)
    for _ in range(50):
        x, y, z = (rng.normal(size=(6, 2)) * rng.uniform(0.5, 2) for _ in range(3))
        xy = empirical_wasserstein(x, y, cfg)
        assert xy == pytest.approx(empirical_wasserstein(y, x, cfg), abs=1e-12)
        xz = empirical_wasserstein(x, z, cfg)
        zy = empirical_wasserstein(z, y, cfg)
        assert xy <= xz + zy + 1e-9


def test_gaussian_w2_matches_large_one_dimensional_samples():
    """Test the closed form against sorted samples of N(0, 1) and N(1, 4)."""
    rng = np.random.default_rng(11)
    x = rng.normal(0.0, 1.0, size=(100000, 1))
    y = rng.normal(1.0, 2.0, size=(100000, 1))
    p, q = GaussianDist([0.0], [[1.0]]), GaussianDist([1.0], [[4.0]])
    exact = gaussian_w2_squared(p, q)
    assert empirical_wasserstein(x, y) ** 2 == pytest.approx(exact, rel=0.05)


def whitened(rng, n, mean, cov):
    """Antithetic sample whose empirical mean and covariance are exact."""
    z = rng.normal(size=(n // 2, len(mean)))
    z = np.vstack([z, -z])
    root = np.linalg.cholesky(np.linalg.inv(z.T @ z / len(z)))
    return np.asarray(mean) + z @ root @ np.linalg.cholesky(cov).T


def test_gaussian_w2_matches_moment_matched_samples():
    """Test that the exact solve exceeds the closed form only by discreteness."""
    rng = np.random.default_rng(12)
    p = GaussianDist([0.0, 0.0], [[2.0, 0.5], [0.5, 1.0]])
    q = GaussianDist([3.0, -1.0], [[1.0, -0.3], [-0.3, 0.5]])
    x = whitened(rng, 1000, p.mean, p.cov)
    y = whitened(rng, 1000, q.mean, q.cov)
    assert np.allclose(np.cov(x.T, bias=True), p.cov)
    exact = gaussian_w2_squared(p, q)
    sampled = empirical_wasserstein(x, y, BaseDistanceConfig(exact_cap=1024)) ** 2
    assert exact - 1e-9 <= sampled <= 1.05 * exact


def random_gaussian(rng, dim):
    a = rng.normal(size=(dim, dim))
    return GaussianDist(rng.normal(size=dim), a @ a.T + 0.1 * np.eye(dim))


def test_gaussian_kl_is_a_divergence():
    """Test non-negativity and identity of indiscernibles over random pairs."""
    rng = np.random.default_rng(13)
    for _ in range(1000):
        dim = int(rng.integers(1, 4))
        p, q = random_gaussian(rng, dim), random_gaussian(rng, dim)
        assert gaussian_kl(p, q) > 0
        assert gaussian_kl(p, p) == pytest.approx(0.0, abs=1e-9)


def test_gaussian_kl_is_asymmetric():
    """Test KL in both directions between N(0, 1) and N(0, 4)."""
    p = GaussianDist([0.0], [[1.0]])
    q = GaussianDist([0.0], [[4.0]])
    assert gaussian_kl(p, q) == pytest.approx(0.5 * (np.log(4.0) - 0.75))
    assert gaussian_kl(q, p) == pytest.approx(0.5 * (3.0 - np.log(4.0)))
