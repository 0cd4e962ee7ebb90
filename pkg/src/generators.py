"""Random and fixed model constructors.

Random models cover four synthetic parametrizations plus discrete Bayesian
networks with Dirichlet tables. Fixed constructors build the small two-node
and hidden-confounder models used as worked examples and oracle checks.
"""

import logging
from typing import List, Sequence, Tuple, Union

import numpy as np

from .errors import ModelError
from .graph import random_dag
from .mechanisms import (
    Continuous,
    Cpt,
    Discrete,
    Gamma,
    Gaussian,
    Linear,
    Mechanism,
    NoiseSpec,
    PointMass,
    RandomFeatureAdditive,
    RandomFeatureNonAdditive,
    UniformVariate,
)
from .scm import ModelKind, Scm, Seed, as_seed_sequence

logger = logging.getLogger(__name__)

PARAMETRIZATIONS = ("linGauss", "linNGauss", "GPAddit", "GP")

GEOMETRY_BETAS = (0.1, 0.5, 1.0, 2.0, 5.0)
GEOMETRY_TYPES = ("A+B", "A-B", "B+A", "B-A")


def random_scm(
    parametrization: str,
    d: int,
    expected_degree: float,
    rng_seed: Seed = None,
    features: int = 256,
    bandwidth: float = 1.0,
) -> Scm:
    """Random continuous model on an Erdős–Rényi graph.

    Args:
        parametrization: ``linGauss`` (linear, N(0, 1) noise), ``linNGauss``
            (linear, Gamma noise), ``GPAddit`` (random-feature function plus
            N(0, 1) noise) or ``GP`` (random-feature function of parents and a
            standard-normal noise input).
        d: Number of nodes.
        expected_degree: Expected node degree of the graph.
        rng_seed: Seed for graph and parameters.
        features: Random features per Gaussian-process mechanism.
        bandwidth: RBF bandwidth of the Gaussian-process mechanisms.
    """
    if parametrization not in PARAMETRIZATIONS:
        raise ModelError(
            f"unknown parametrization '{parametrization}', "
            f"expected one of {', '.join(PARAMETRIZATIONS)}"
        )
    graph_seed, param_seed = as_seed_sequence(rng_seed).spawn(2)
    graph = random_dag(d, expected_degree, graph_seed)
    rng = np.random.default_rng(param_seed)

    mechanisms: List[Mechanism] = []
    noises: List[NoiseSpec] = []
    for v in range(d):
        p = len(graph.parents(v))
        if parametrization == "linGauss":
            mechanisms.append(Linear.draw(rng, p))
            noises.append(Gaussian(0.0, 1.0))
        elif parametrization == "linNGauss":
            mechanisms.append(Linear.draw(rng, p))
            a, b = rng.normal(size=2)
            noises.append(Gamma(abs(a) + 0.1, abs(b) + 0.1))
        elif parametrization == "GPAddit":
            mechanisms.append(
                RandomFeatureAdditive.draw(
                    rng, p, features=features, bandwidth=bandwidth
                )
            )
            noises.append(Gaussian(0.0, 1.0))
        else:
            mechanisms.append(
                RandomFeatureNonAdditive.draw(
                    rng, p + 1, features=features, bandwidth=bandwidth
                )
            )
            noises.append(Gaussian(0.0, 1.0))

    logger.debug(
        f"Generated {parametrization} model with {d} nodes and {len(graph.edges)} edges"
    )
    return Scm(graph, tuple(_continuous(d)), tuple(mechanisms), tuple(noises))


def _continuous(d: int) -> List[Continuous]:
    return [Continuous() for _ in range(d)]


def random_bayes_net(
    d: int,
    expected_degree: float,
    rng_seed: Seed = None,
    cardinality: Union[int, Sequence[int]] = 2,
    concentration: float = 1.0,
) -> Scm:
    """Random discrete Bayesian network with Dirichlet-distributed table rows."""
    cards = [cardinality] * d if isinstance(cardinality, int) else list(cardinality)
    if len(cards) != d:
        raise ModelError(f"need {d} cardinalities, got {len(cards)}")
    graph_seed, param_seed = as_seed_sequence(rng_seed).spawn(2)
    graph = random_dag(d, expected_degree, graph_seed)
    rng = np.random.default_rng(param_seed)
    mechanisms = []
    for v in range(d):
        parent_cards = tuple(cards[p] for p in graph.parents(v))
        rows = int(np.prod(parent_cards)) if parent_cards else 1
        table = rng.dirichlet(np.full(cards[v], concentration), size=rows)
        mechanisms.append(Cpt(table, parent_cards))
    return Scm(
        graph,
        tuple(Discrete(c) for c in cards),
        tuple(mechanisms),
        tuple(UniformVariate() for _ in range(d)),
        ModelKind.BAYES_NET_ONLY,
    )


def two_node_model(
    beta: float = 1.0,
    mu_a: float = 0.0,
    mu_b: float = 0.0,
    sigma_a: float = 1.0,
    sigma_b: float = 1.0,
) -> Scm:
    """``A ~ N(mu_a, sigma_a^2)``, ``B := beta * A + N(mu_b, sigma_b^2)``."""
    return Scm.build(
        ["A", "B"],
        [("A", "B")],
        {"A": Linear([], 0.0), "B": Linear([beta], 0.0)},
        {"A": Gaussian(mu_a, sigma_a), "B": Gaussian(mu_b, sigma_b)},
    )


def case_study_pair(sigma_a: float = 1.0, sigma_b: float = 1.0) -> Tuple[Scm, Scm]:
    """Same graph ``A -> B`` with opposite effects.

    The first model has ``B := A + N_B``, the second ``B := -A + N_B``.
    """
    return (
        two_node_model(1.0, sigma_a=sigma_a, sigma_b=sigma_b),
        two_node_model(-1.0, sigma_a=sigma_a, sigma_b=sigma_b),
    )


def geometry_model(kind: str, beta: float) -> Scm:
    """One of the four two-node families used for the geometry experiment.

    ``A+B``/``A-B`` have ``A -> B`` with weight ``+beta``/``-beta``;
    ``B+A``/``B-A`` the reverse edge. Root and child noises are N(0, 1).
    """
    if kind not in GEOMETRY_TYPES:
        raise ModelError(f"unknown geometry model type '{kind}'")
    sign = 1.0 if kind[1] == "+" else -1.0
    cause, effect = (kind[0], "B" if kind[0] == "A" else "A")
    return Scm.build(
        ["A", "B"],
        [(cause, effect)],
        {cause: Linear([], 0.0), effect: Linear([sign * beta], 0.0)},
        {"A": Gaussian(0.0, 1.0), "B": Gaussian(0.0, 1.0)},
    )


def geometry_models(
    betas: Sequence[float] = GEOMETRY_BETAS,
) -> List[Tuple[str, Scm]]:
    """The 4 x len(betas) named two-node models, grouped by type."""
    return [
        (f"{kind}:{beta:g}", geometry_model(kind, beta))
        for kind in GEOMETRY_TYPES
        for beta in betas
    ]


def hidden_confounder_pair(lam: float) -> Tuple[Scm, Scm]:
    """``Z ~ N(0, 1)`` confounding ``X`` and ``Y`` with opposite signs.

    The first model has ``X = lam Z, Y = -lam Z``, the second the mirror image.
    Both induce the same joint distribution of ``(X, Y)``.
    """
    def build(sign: float) -> Scm:
        return Scm.build(
            ["Z", "X", "Y"],
            [("Z", "X"), ("Z", "Y")],
            {
                "Z": Linear([], 0.0),
                "X": Linear([sign * lam], 0.0),
                "Y": Linear([-sign * lam], 0.0),
            },
            {"Z": Gaussian(0.0, 1.0), "X": PointMass(0.0), "Y": PointMass(0.0)},
        )

    return build(1.0), build(-1.0)

