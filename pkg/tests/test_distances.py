"""Test suite for the OD, ID and CD estimators.

This module tests:
- Target weights and estimator configuration
- Self-distances under paired and independent seeds
- Agreement with the closed-form case study
- Breakdown consistency and schedule independence
- Counterfactual distance on small models
- The OD, ID, CD ladder and agreement with the oracle on random pairs
- Repeated estimates with a spread
"""

import numpy as np
import pytest

from src.analytic import analytic_id, analytic_od, joint_gaussian
from src.counterfactual import McmcConfig
from src.distances import (
    EMPTY_TARGET,
    DistanceConfig,
    ValueSampling,
    cd,
    draw_values,
    estimate,
    id,
    od,
    repeat_estimate,
    repeat_seed,
)
from src.errors import CounterfactualUnsupported, ModelError
from src.generators import case_study_pair, random_bayes_net, random_scm
from src.transport import BaseDistanceConfig
from src.weights import Normalization, target_weights

DO_A_TERM = 2 * np.sqrt(2 / np.pi)


@pytest.fixture
def pair():
    """Create the case-study pair with unit noise scales.

    Returns:
        Two models on A -> B with opposite effect signs.
    """
    return case_study_pair()


@pytest.fixture
def small_config():
    """Create a configuration small enough for unit tests.

    Returns:
        A DistanceConfig with few samples and values.
    """
    return DistanceConfig(k=200, l=5, m=2, seed=1)


def test_uniform_target_weights():
    """Test the default weights over the empty target and every node."""
    assert np.allclose(target_weights(3), [0.25] * 4)
    assert np.allclose(target_weights(2, normalization="per-node"), [0.5] * 3)


def test_custom_target_weights():
    """Test that custom weights are validated."""
    assert np.allclose(target_weights(2, [0.0, 0.5, 0.5]), [0.0, 0.5, 0.5])
    with pytest.raises(ModelError):
        target_weights(2, [0.5, 0.5])
    with pytest.raises(ModelError):
        target_weights(2, [0.5, 0.6, -0.1])


def test_config_validation():
    """Test estimator configuration checks."""
    with pytest.raises(ModelError):
        DistanceConfig(k=0)
    with pytest.raises(ModelError):
        DistanceConfig(value_scale=0.0)
    cfg = DistanceConfig(normalization="per-node", value_sampling="iid", mu=[1, 0, 0])
    assert cfg.normalization is Normalization.PER_NODE
    assert cfg.value_sampling is ValueSampling.IID
    assert cfg.mu == (1.0, 0.0, 0.0)
    assert cfg.to_dict()["nu"] == "uniform"


def test_stratified_values_cover_the_strata(pair, small_config):
    """Test that stratified draws place one value per quantile stratum."""
    values = draw_values(pair[0], 0, 10, small_config, 3)
    assert np.all(np.diff(values) > 0)
    assert values[0] < -1.0 and values[-1] > 1.0


def test_discrete_values_stay_in_domain(small_config):
    """Test value draws on a discrete node."""
    bn = random_bayes_net(2, 1, 0, cardinality=3)
    values = draw_values(bn, 0, 30, small_config, 4)
    assert set(values) == {0.0, 1.0, 2.0}


def test_od_self_distance_paired(pair, small_config):
    """Test that shared seeds give an exact zero self-distance."""
    assert od(pair[0], pair[0], small_config).value == 0.0


def test_od_self_distance_independent():
    """Test the finite-sample floor of independent self-distances."""
    m = random_scm("linGauss", 2, 1, rng_seed=3)
    cfg = DistanceConfig(k=500, paired=False, seed=2)
    value = od(m, m, cfg).value
    scale = np.sqrt(np.trace(joint_gaussian(m).cov))
    assert 0.0 < value < 0.5 * scale


def test_od_matches_closed_form(pair):
    """Test the sampled OD of the case study against the exact value."""
    cfg = DistanceConfig(k=2000, seed=5, base=BaseDistanceConfig(exact_cap=2000))
    assert od(*pair, cfg).value == pytest.approx(analytic_od(*pair), rel=0.05)


def test_od_requires_same_variables(pair, small_config):
    """Test that models over different variables are rejected."""
    other = random_scm("linGauss", 2, 1, rng_seed=0)
    with pytest.raises(ModelError, match="different variables"):
        od(pair[0], other, small_config)


def test_id_case_study_breakdown(pair):
    """Test the per-target terms of the sampled ID."""
    cfg = DistanceConfig(k=400, l=40, seed=7)
    result = id(*pair, cfg)
    assert result.term("B").value == pytest.approx(0.0, abs=1e-9)
    assert result.term("A").value == pytest.approx(DO_A_TERM, abs=0.1)
    assert len(result.term("A").cells) == 40
    assert result.term(EMPTY_TARGET).weight == pytest.approx(1 / 3)


def test_id_case_study_per_node(pair):
    """Test the per-node normalization of the case-study ID."""
    cfg = DistanceConfig(k=400, l=40, seed=8, normalization="per-node")
    assert id(*pair, cfg).value == pytest.approx(1.4, abs=0.2)


def test_breakdown_recombines(pair, small_config):
    """Test that weights times terms sum to the total."""
    result = id(*pair, small_config)
    total = sum(t.weight * t.value for t in result.breakdown)
    assert result.value == pytest.approx(total, abs=1e-9)
    payload = result.to_dict()
    assert payload["kind"] == "id"
    assert payload["config"]["k"] == 200
    with pytest.raises(KeyError):
        result.term("Z")


def test_id_is_schedule_independent(pair):
    """Test that the worker count does not change the estimate."""
    serial = id(*pair, DistanceConfig(k=100, l=4, seed=3, threads=1)).value
    parallel = id(*pair, DistanceConfig(k=100, l=4, seed=3, threads=4)).value
    assert serial == parallel


def test_id_self_distance_paired(pair, small_config):
    """Test that ID of a model with itself is zero under shared seeds."""
    assert id(pair[1], pair[1], small_config).value == 0.0


def test_ladder_between_od_and_id():
    """Test that OD is bounded by (d + 1) times ID up to sampling noise."""
    m1 = random_scm("linGauss", 3, 2, rng_seed=10)
    m2 = random_scm("linGauss", 3, 2, rng_seed=11)
    cfg = DistanceConfig(k=300, l=3, seed=4)
    floor = od(m1, m1, DistanceConfig(k=300, paired=False, seed=4)).value
    assert od(m1, m2, cfg).value <= 4 * id(m1, m2, cfg).value + 3 * floor


@pytest.mark.slow
def test_ladder_between_id_and_cd():
    """Test that ID is bounded by (d + 1) times CD through the empty evidence term."""
    m1 = random_scm("linGauss", 3, 2, rng_seed=10)
    m2 = random_scm("linGauss", 3, 2, rng_seed=11)
    cfg = DistanceConfig(
        k=100,
        l=2,
        m=2,
        seed=4,
        mcmc=McmcConfig(chains=2, burn_in=100, thinning=2, pool_size=100, gate=1e9),
    )
    interventional = id(m1, m2, cfg)
    counterfactual = cd(m1, m2, cfg)
    empty = counterfactual.term(EMPTY_TARGET).value
    assert empty == pytest.approx(interventional.value, rel=1e-12)
    assert interventional.value <= 4 * counterfactual.value + 1e-12


def test_self_distance_floor_shrinks_with_k():
    """Test that the independent-sample floor of OD falls as k grows."""
    m = random_scm("linGauss", 3, 2, rng_seed=10)

    def floor(k):
        return np.mean(
            [
                od(m, m, DistanceConfig(k=k, paired=False, seed=s)).value
                for s in range(3)
            ]
        )

    small, large = floor(50), floor(800)
    assert 0 < large < 0.7 * small


@pytest.mark.slow
@pytest.mark.parametrize("seed", range(10))
def test_sampled_distances_bracket_the_oracle(seed):
    """Test sampled OD and ID on random d = 4 pairs against the closed forms.

    The sampled value sits between the closed form (up to moment noise) and
    the closed form plus the independent-sample floors of both models.
    """
    m1 = random_scm("linGauss", 4, 2, rng_seed=100 + 2 * seed)
    m2 = random_scm("linGauss", 4, 2, rng_seed=101 + 2 * seed)
    for kind, cfg in (
        ("od", DistanceConfig(k=1000, seed=seed)),
        ("id", DistanceConfig(k=500, l=5, seed=seed)),
    ):
        exact = analytic_od(m1, m2) if kind == "od" else analytic_id(m1, m2)
        sampled = estimate(kind, m1, m2, cfg).value
        unpaired = DistanceConfig(k=cfg.k, l=cfg.l, paired=False, seed=seed)
        floor = sum(estimate(kind, m, m, unpaired).value for m in (m1, m2))
        assert sampled >= 0.85 * exact - 0.05
        assert sampled <= 1.15 * exact + floor + 0.05


def test_repeat_estimate_mean_and_std(pair, small_config):
    """Test that repeats average the estimates and report their spread."""
    single = repeat_estimate("od", *pair, small_config)
    assert single.value == od(*pair, small_config).value
    assert single.std == 0.0
    repeated = repeat_estimate("od", *pair, small_config, repeats=3)
    values = repeated.breakdown[0].cells
    assert len(values) == 3
    assert values[0] == single.value
    assert repeated.value == pytest.approx(np.mean(values))
    assert repeated.std == pytest.approx(np.std(values, ddof=1))
    assert repeated.std > 0
    assert repeated.config["repeats"] == 3
    assert repeat_seed(1, 0) == 1
    assert repeat_seed(1, 1) != repeat_seed(1, 2)
    with pytest.raises(ModelError):
        repeat_estimate("od", *pair, small_config, repeats=0)


def test_estimate_dispatch(pair, small_config):
    """Test dispatch by distance name."""
    assert estimate("od", *pair, small_config).kind == "od"
    with pytest.raises(ModelError):
        estimate("sd", *pair, small_config)


def test_cd_rejects_bayes_nets(small_config):
    """Test that counterfactual distances need structural models."""
    bn = random_bayes_net(2, 1, 0)
    with pytest.raises(CounterfactualUnsupported):
        cd(bn, bn, small_config)


def test_cd_self_distance(pair):
    """Test that CD of a model with itself is zero under shared seeds."""
    cfg = DistanceConfig(
        k=50,
        l=2,
        m=2,
        seed=6,
        mcmc=McmcConfig(chains=2, burn_in=50, thinning=1, pool_size=50, gate=1e9),
    )
    result = cd(pair[0], pair[0], cfg)
    assert result.value == 0.0
    assert [t.target for t in result.breakdown] == [EMPTY_TARGET, "A", "B"]


@pytest.mark.slow
def test_cd_separates_the_case_study(pair):
    """Test that CD of the case-study pair is clearly positive."""
    cfg = DistanceConfig(
        k=100,
        l=3,
        m=3,
        seed=9,
        mcmc=McmcConfig(chains=2, burn_in=100, thinning=2, pool_size=100, gate=1e9),
    )
    result = cd(*pair, cfg)
    assert result.value > 0.5
    assert result.term(EMPTY_TARGET).value > 0.5
