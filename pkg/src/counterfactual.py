"""Abduction of posterior noise and counterfactual sampling.

Given evidence ``E = e``, the noise posterior ``P(N | E = e)`` is explored with
a Metropolis-within-Gibbs sampler over the noise of the non-evidence ancestors
of the evidence nodes. Linear-Gaussian models skip the chains: their noise
posterior is Gaussian and is drawn from directly. The noise of each evidence
node is then recovered from its equation, and every remaining noise keeps its
prior. The resulting joint noise rows form the pool of the counterfactual model.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from scipy.optimize import brentq

from .analytic import LinearGaussianView, noise_posterior
from .cache import LikelihoodCache
from .errors import (
    ConvergenceError,
    CounterfactualUnsupported,
    InfeasibleEvidence,
    ModelError,
    SingularMatrixError,
)
from .graph import ancestors, topological_order
from .mechanisms import (
    Cpt,
    EmpiricalJoint,
    Fixed,
    Gaussian,
    Mechanism,
    NoiseSpec,
    PointMass,
)
from .scm import (
    Evidence,
    Intervention,
    ModelKind,
    SampleMatrix,
    Scm,
    Seed,
    apply_intervention,
    derive_seed,
    draw_noise,
    push_forward,
    sample,
)
from .transport import GaussianDist

logger = logging.getLogger(__name__)

EVIDENCE_TOL = 1e-6


@dataclass(frozen=True)
class McmcConfig:
    """Free parameters of the abduction sampler.

    Attributes:
        chains: Independent chains, each with its own derived seed.
        burn_in: Sweeps discarded per chain; proposals adapt during burn-in.
        thinning: Sweeps between kept samples.
        proposal_std: Initial random-walk step per noise coordinate.
        pool_size: Rows of the posterior noise pool.
        target_acceptance: Acceptance rate the step sizes adapt towards.
        kde_draws: Pushforwards per density estimate for non-additive nodes.
        grid_points: Evidence grid size of the likelihood cache.
        gate: Allowed chain-mean gap in pooled standard errors.
        retries: Re-runs with doubled burn-in after a failed gate.
        conjugate: Draw the pool from the closed-form Gaussian posterior when
            the model is linear-Gaussian instead of running the chains.
    """

    chains: int = 4
    burn_in: int = 500
    thinning: int = 5
    proposal_std: float = 0.5
    pool_size: int = 200
    target_acceptance: float = 0.25
    kde_draws: int = 512
    grid_points: int = 64
    gate: float = 3.0
    retries: int = 1
    conjugate: bool = True

    def __post_init__(self) -> None:
        for name in ("chains", "burn_in", "thinning", "pool_size", "kde_draws"):
            if getattr(self, name) < 1:
                raise ModelError(f"MCMC {name} must be at least 1")
        if not self.proposal_std > 0:
            raise ModelError("MCMC proposal std must be positive")
        if self.grid_points < 2:
            raise ModelError("likelihood grid needs at least two points")

    def to_dict(self) -> Dict[str, Any]:
        return {
            "chains": self.chains,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "proposal_std": self.proposal_std,
            "pool_size": self.pool_size,
            "conjugate": self.conjugate,
        }


@dataclass(frozen=True, eq=False)
class CounterfactualModel:
    """Base model with its noise replaced by a posterior pool of joint rows."""

    base: Scm
    evidence: Evidence
    pool: np.ndarray
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_scm(self) -> Scm:
        """The base model with empirical joint noise drawn from the pool."""
        return self.base.with_noises(
            [EmpiricalJoint(self.pool, v) for v in range(self.base.node_count)]
        )


def _log_likelihood(
    mech: Mechanism,
    noise: NoiseSpec,
    node: int,
    value: float,
    parents: np.ndarray,
    cache: Optional[LikelihoodCache],
) -> np.ndarray:
    """Row-wise ``log P(X_node = value | PA = parents)``."""
    n = parents.shape[0]
    if isinstance(mech, Fixed):
        hit = abs(mech.value - value) <= EVIDENCE_TOL
        return np.full(n, 0.0 if hit else -np.inf)
    if isinstance(mech, Cpt):
        if not float(value).is_integer() or not 0 <= value < mech.cardinality:
            return np.full(n, -np.inf)
        with np.errstate(divide="ignore"):
            return np.log(mech.probabilities(parents)[:, int(value)])
    if mech.additive:
        return noise.logpdf(value - mech.deterministic_part(parents))
    if cache is None:
        raise ModelError(
            f"node {node} has a non-additive mechanism and needs a likelihood cache"
        )
    densities = np.array([cache.density(node, value, row) for row in parents])
    with np.errstate(divide="ignore"):
        return np.log(densities)


def _needs_cache(mech: Mechanism) -> bool:
    return not (mech.additive or isinstance(mech, (Cpt, Fixed)))


def evidence_likelihood(
    m: Scm,
    node: int,
    value: float,
    parent_values: Sequence[float],
    cache: Optional[LikelihoodCache] = None,
) -> float:
    """``P(X_node = value | PA = parent_values)`` under ``m``.

    Additive mechanisms use the exact noise density at the residual, tables
    use a lookup, and non-additive mechanisms a cached kernel density estimate.
    """
    if _needs_cache(m.mechanisms[node]):
        cache = cache or LikelihoodCache(m)
        cache.ensure_grid(node, [value])
    parents = np.asarray(parent_values, dtype=float).reshape(1, -1)
    logp = _log_likelihood(
        m.mechanisms[node], m.noises[node], node, value, parents, cache
    )
    return float(np.exp(logp[0]))


class _NoisePosterior:
    """Unnormalised log posterior over the sampled noise coordinates."""

    def __init__(self, m: Scm, evidence: Evidence, cache: LikelihoodCache):
        self.m = m
        self.evidence = evidence.as_dict()
        relevant = set()
        for e in self.evidence:
            relevant |= ancestors(m.graph, e)
        self.sampled = sorted(relevant - set(self.evidence))
        self.column = {v: j for j, v in enumerate(self.sampled)}
        keep = set(self.sampled) | set(self.evidence)
        self.order = [v for v in topological_order(m.graph) if v in keep]
        self.cache = cache

    def clamped_values(self, noise: np.ndarray) -> np.ndarray:
        """Node values with evidence nodes held at their observed values."""
        values = np.zeros((noise.shape[0], self.m.node_count))
        for v in self.order:
            if v in self.evidence:
                values[:, v] = self.evidence[v]
            else:
                parents = list(self.m.graph.parents(v))
                values[:, v] = self.m.mechanisms[v].evaluate(
                    values[:, parents], noise[:, self.column[v]]
                )
        return values

    def log_density(self, noise: np.ndarray) -> np.ndarray:
        total = np.zeros(noise.shape[0])
        for v, j in self.column.items():
            total += self.m.noises[v].logpdf(noise[:, j])
        values = self.clamped_values(noise)
        for e, value in self.evidence.items():
            parents = values[:, list(self.m.graph.parents(e))]
            total += _log_likelihood(
                self.m.mechanisms[e], self.m.noises[e], e, value, parents, self.cache
            )
        return np.where(np.isnan(total), -np.inf, total)


def _autocorrelation_time(chain: np.ndarray) -> float:
    n = len(chain)
    centred = chain - chain.mean()
    var = float(np.dot(centred, centred)) / n
    if n < 4 or var <= 0:
        return 1.0
    tau = 1.0
    for lag in range(1, n // 4):
        rho = float(np.dot(centred[:-lag], centred[lag:])) / (n * var)
        if rho < 0.05:
            break
        tau += 2 * rho
    return tau


def chain_gap(samples: np.ndarray) -> float:
    """Largest chain-mean gap in units of the pooled standard error.

    ``samples`` has shape ``(chains, draws, coordinates)``; the standard error
    is inflated by the integrated autocorrelation time.
    """
    chains, draws, coords = samples.shape
    if chains < 2 or coords == 0:
        return 0.0
    worst = 0.0
    for j in range(coords):
        series = samples[:, :, j]
        means = series.mean(axis=1)
        gap = np.abs(means - means.mean()).max()
        variance = series.var(axis=1, ddof=1).mean() if draws > 1 else 0.0
        tau = np.mean([_autocorrelation_time(c) for c in series])
        se = np.sqrt(variance * tau / draws)
        if se <= 0:
            if gap > 1e-12:
                return float("inf")
            continue
        worst = max(worst, float(gap / se))
    return worst


def _initial_state(
    post: _NoisePosterior, rngs: List[np.random.Generator], attempts: int = 200
) -> np.ndarray:
    state = np.empty((len(rngs), len(post.sampled)))
    for c, rng in enumerate(rngs):
        for _ in range(attempts):
            draw = np.array(
                [[post.m.noises[v].sample(rng, 1)[0] for v in post.sampled]]
            ).reshape(1, -1)
            if np.isfinite(post.log_density(draw)[0]):
                state[c] = draw[0]
                break
        else:
            raise InfeasibleEvidence(
                "no prior noise draw is compatible with the evidence "
                f"({_describe(post.m, post.evidence)})"
            )
    return state


def _describe(m: Scm, evidence: Dict[int, float]) -> str:
    return ", ".join(f"{m.labels[v]}={x:g}" for v, x in sorted(evidence.items()))


def _run_chains(
    post: _NoisePosterior, cfg: McmcConfig, burn_in: int, seed: Seed
) -> np.ndarray:
    """Metropolis-within-Gibbs; returns ``(chains, kept, coordinates)`` draws."""
    rngs = [np.random.default_rng(derive_seed(seed, c)) for c in range(cfg.chains)]
    state = _initial_state(post, rngs)
    current = post.log_density(state)
    dims = len(post.sampled)
    steps = np.full(dims, cfg.proposal_std)
    accepted = np.zeros(dims)
    window = 0
    kept_per_chain = -(-cfg.pool_size // cfg.chains)
    kept = np.empty((cfg.chains, kept_per_chain, dims))
    total_sweeps = burn_in + kept_per_chain * cfg.thinning

    for sweep in range(total_sweeps):
        for j in range(dims):
            proposal = state.copy()
            proposal[:, j] += steps[j] * np.array([r.normal() for r in rngs])
            candidate = post.log_density(proposal)
            log_u = np.log(np.array([r.random() for r in rngs]))
            accept = log_u < candidate - current
            state[accept] = proposal[accept]
            current[accept] = candidate[accept]
            accepted[j] += accept.mean()
        window += 1
        if sweep < burn_in and window == 50:
            rate = accepted / window
            steps *= np.exp(rate - cfg.target_acceptance)
            accepted[:] = 0
            window = 0
        if sweep >= burn_in and (sweep - burn_in + 1) % cfg.thinning == 0:
            kept[:, (sweep - burn_in) // cfg.thinning] = state
    logger.debug(f"Final proposal steps: {np.round(steps, 3).tolist()}")
    return kept


def _evidence_noise(
    m: Scm,
    node: int,
    value: float,
    parents: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Noise of an evidence node consistent with its value, NaN where impossible."""
    mech, noise = m.mechanisms[node], m.noises[node]
    n = parents.shape[0]
    if isinstance(mech, Fixed):
        return noise.sample(rng, n)
    if isinstance(mech, Cpt):
        low, high = mech.preimage(parents, np.full(n, int(value)))
        draws = low + (high - low) * rng.random(n)
        return np.where(high > low, draws, np.nan)
    if mech.additive:
        return value - mech.deterministic_part(parents)
    return np.array(
        [_invert_non_additive(mech, noise, value, row, rng) for row in parents]
    )


def _noise_support(noise: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if isinstance(noise, Gaussian):
        return np.linspace(noise.mean - 8 * noise.std, noise.mean + 8 * noise.std, 2001)
    if isinstance(noise, PointMass):
        return np.array([noise.value])
    reference = noise.sample(rng, 4000)
    return np.linspace(reference.min(), reference.max(), 2001)


def _invert_non_additive(
    mech: Mechanism,
    noise: NoiseSpec,
    value: float,
    parents: np.ndarray,
    rng: np.random.Generator,
) -> float:
    """Solve ``f(pa, n) = value`` for ``n``.

    A root is picked with weight ``p(n) / |f'(n)|``.
    """
    grid = _noise_support(noise, rng)
    row = parents.reshape(1, -1)

    def residual(n: float) -> float:
        return float(mech.evaluate(row, np.array([n]))[0] - value)

    values = mech.evaluate(np.repeat(row, len(grid), axis=0), grid) - value
    roots = [float(grid[i]) for i in np.flatnonzero(values == 0)]
    for i in np.flatnonzero(values[:-1] * values[1:] < 0):
        roots.append(brentq(residual, grid[i], grid[i + 1], xtol=1e-12))
    if not roots:
        return float("nan")
    roots_arr = np.array(roots)
    h = 1e-6
    slope = np.abs(
        [(residual(r + h) - residual(r - h)) / (2 * h) for r in roots_arr]
    )
    weights = noise.pdf(roots_arr) / np.maximum(slope, 1e-12)
    if not np.isfinite(weights).all() or weights.sum() <= 0:
        return float(roots_arr[0])
    return float(rng.choice(roots_arr, p=weights / weights.sum()))


def _conjugate_posterior(m: Scm, ev: Evidence) -> Optional[GaussianDist]:
    """Closed-form noise posterior, or None when the model is not linear-Gaussian."""
    try:
        view = LinearGaussianView.from_scm(m)
        nodes, values = zip(*ev.assignments)
        return noise_posterior(view, nodes, values)
    except (ModelError, SingularMatrixError) as e:
        logger.debug(f"No closed-form posterior, falling back to MCMC: {e}")
        return None


def abduct(
    m: Scm,
    ev: Evidence,
    cfg: Optional[McmcConfig] = None,
    rng_seed: Seed = 0,
) -> CounterfactualModel:
    """Posterior noise pool of ``m`` given ``ev``.

    Raises:
        CounterfactualUnsupported: If ``m`` has no structural equations.
        InfeasibleEvidence: If the evidence has zero probability.
        ConvergenceError: If the chains still disagree after the retries.
    """
    cfg = cfg or McmcConfig()
    if m.kind is ModelKind.BAYES_NET_ONLY:
        raise CounterfactualUnsupported(
            "counterfactuals need structural equations; this model is a "
            "Bayesian network without them"
        )
    if not ev.assignments:
        raise ModelError("abduction needs at least one evidence assignment")
    ev.validate(m)

    cache = LikelihoodCache(
        m,
        draws=cfg.kde_draws,
        grid_points=cfg.grid_points,
        rng_seed=derive_seed(rng_seed, 0),
    )
    post = _NoisePosterior(m, ev, cache)
    for node, value in ev.assignments:
        if _needs_cache(m.mechanisms[node]):
            cache.ensure_grid(node, [value])

    diagnostics: Dict[str, Any] = {"sampled_nodes": [m.labels[v] for v in post.sampled]}
    burn_in = cfg.burn_in
    exact = _conjugate_posterior(m, ev) if post.sampled and cfg.conjugate else None
    if exact is not None:
        idx = post.sampled
        rng = np.random.default_rng(derive_seed(rng_seed, 1))
        sampled_noise = rng.multivariate_normal(
            exact.mean[idx], exact.cov[np.ix_(idx, idx)], cfg.pool_size, method="eigh"
        )
        diagnostics["posterior"] = "conjugate"
    elif post.sampled:
        diagnostics["posterior"] = "mcmc"
        for attempt in range(cfg.retries + 1):
            kept = _run_chains(post, cfg, burn_in, derive_seed(rng_seed, 1, attempt))
            gap = chain_gap(kept)
            diagnostics.update(
                {"chain_gap": gap, "burn_in": burn_in, "attempts": attempt + 1}
            )
            if gap <= cfg.gate:
                break
            logger.warning(
                f"Chains disagree for evidence {ev.describe(m.labels)} "
                f"(gap {gap:.2f} SE); retrying with burn-in {2 * burn_in}"
            )
            burn_in *= 2
        else:
            raise ConvergenceError(
                f"MCMC chains disagree by {gap:.2f} standard errors (limit "
                f"{cfg.gate}) for evidence {ev.describe(m.labels)}"
            )
        sampled_noise = kept.reshape(-1, len(post.sampled))[: cfg.pool_size]
    else:
        sampled_noise = np.empty((cfg.pool_size, 0))
        if not np.isfinite(post.log_density(sampled_noise[:1]))[0]:
            raise InfeasibleEvidence(
                f"evidence {ev.describe(m.labels)} has zero probability"
            )

    rng = np.random.default_rng(derive_seed(rng_seed, 2))
    pool = draw_noise(m, cfg.pool_size, derive_seed(rng_seed, 3))
    for v, j in post.column.items():
        pool[:, v] = sampled_noise[:, j]
    values = post.clamped_values(sampled_noise)
    for node, value in ev.assignments:
        parents = values[:, list(m.graph.parents(node))]
        pool[:, node] = _evidence_noise(m, node, value, parents, rng)

    valid = ~np.isnan(pool).any(axis=1)
    if not valid.any():
        raise InfeasibleEvidence(
            f"no posterior noise row reproduces evidence {ev.describe(m.labels)}"
        )
    if not valid.all():
        logger.warning(
            f"Resampling {int((~valid).sum())} pool rows without an exact "
            f"noise preimage"
        )
        good = np.flatnonzero(valid)
        pool[~valid] = pool[rng.choice(good, size=int((~valid).sum()))]

    stats = cache.get_stats()
    diagnostics["cache"] = stats
    logger.info(
        f"Abducted {ev.describe(m.labels)}: {len(post.sampled)} sampled noises, "
        f"cache hits={stats['hits']} misses={stats['misses']} size={stats['size']}"
    )
    pool.setflags(write=False)
    return CounterfactualModel(m, ev, pool, diagnostics)


def counterfactual_sample(
    cm: CounterfactualModel, iv: Intervention, k: int, rng_seed: Seed = None
) -> SampleMatrix:
    """Samples of the counterfactual model under ``do(iv)``."""
    return sample(apply_intervention(cm.to_scm(), iv), k, rng_seed)


def reproduces_evidence(cm: CounterfactualModel, tol: float = EVIDENCE_TOL) -> bool:
    """Whether every pool row maps back onto the evidence values."""
    values = push_forward(cm.base, cm.pool)
    for node, value in cm.evidence.assignments:
        if np.max(np.abs(values[:, node] - value)) > tol:
            return False
    return True
