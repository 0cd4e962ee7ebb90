"""Likelihood cache for evidence on non-additive mechanisms.

Densities ``P(E = e | PA_E)`` of a node whose noise enters its mechanism
non-additively are estimated by a kernel density estimate over noise
pushforwards. Estimates are memoised with an LRU cache keyed by node and
quantized parent values; evidence values are snapped to the nearest point of a
per-node grid.
"""

import logging
from functools import lru_cache
from typing import Dict, Iterable, Optional, Tuple

import numpy as np
from scipy.stats import gaussian_kde

from . import settings
from .scm import Scm, Seed, derive_seed, sample


class LikelihoodCache:
    """Grid-based cache of estimated conditional densities."""

    def __init__(
        self,
        model: Scm,
        draws: int = 512,
        grid_points: int = 64,
        decimals: int = 2,
        rng_seed: Seed = 0,
        max_size: Optional[int] = None,
    ):
        """
        Initialize the cache.

        Args:
            model: Model whose mechanisms are evaluated.
            draws: Noise pushforwards per density estimate.
            grid_points: Evenly spaced evidence values per node.
            decimals: Rounding applied to parent values to form cache keys.
            rng_seed: Seed for the grid reference sample and the noise draws.
            max_size: Maximum number of cached density vectors
                (``settings.CACHE_SIZE`` when None).
        """
        self.model = model
        self.draws = draws
        self.grid_points = max(2, grid_points)
        self.decimals = decimals
        self.rng_seed = rng_seed
        self.logger = logging.getLogger(__name__)
        self.max_size = settings.CACHE_SIZE if max_size is None else max_size
        self.cache = lru_cache(maxsize=self.max_size)(self._grid_densities)
        self._grids: Dict[int, np.ndarray] = {}
        self._noise: Dict[int, np.ndarray] = {}
        self._reference: Optional[np.ndarray] = None

    def _reference_values(self) -> np.ndarray:
        if self._reference is None:
            self._reference = sample(
                self.model, 2000, derive_seed(self.rng_seed, 0)
            ).values
        return self._reference

    def ensure_grid(self, node: int, include: Iterable[float] = ()) -> np.ndarray:
        """Grid over the node's 0.5-99.5 percentile range plus ``include``."""
        extra = np.asarray(list(include), dtype=float)
        if node not in self._grids:
            column = self._reference_values()[:, node]
            low, high = np.percentile(column, [0.5, 99.5])
            if high <= low:
                high = low + 1.0
            grid = np.linspace(low, high, self.grid_points)
        else:
            grid = self._grids[node]
        missing = extra[~np.isin(extra, grid)]
        if len(missing) or node not in self._grids:
            self._grids[node] = np.unique(np.concatenate([grid, missing]))
            self.cache.cache_clear()
            self.logger.debug(
                f"Evidence grid for node {node} now has "
                f"{len(self._grids[node])} points; cached densities cleared"
            )
        return self._grids[node]

    def _noise_draws(self, node: int) -> np.ndarray:
        if node not in self._noise:
            rng = np.random.default_rng(derive_seed(self.rng_seed, 1, node))
            self._noise[node] = self.model.noises[node].sample(rng, self.draws)
        return self._noise[node]

    def _grid_densities(self, node: int, parent_key: Tuple[float, ...]) -> np.ndarray:
        mech = self.model.mechanisms[node]
        noise = self._noise_draws(node)
        parents = np.tile(np.asarray(parent_key, dtype=float), (len(noise), 1))
        pushed = mech.evaluate(parents, noise)
        grid = self._grids[node]
        if np.std(pushed) < 1e-12:
            return np.zeros(len(grid))
        return gaussian_kde(pushed)(grid)

    def density(self, node: int, value: float, parent_values: np.ndarray) -> float:
        """Estimated ``P(X_node = value | PA = parent_values)``."""
        grid = self.ensure_grid(node)
        idx = int(np.argmin(np.abs(grid - value)))
        key = tuple(np.round(np.asarray(parent_values, dtype=float), self.decimals))
        return float(self.cache(node, key)[idx])

    def clear(self) -> None:
        """Clear the cache."""
        self._grids.clear()
        self.cache.cache_clear()

    def get_stats(self) -> Dict[str, int]:
        """
        Get cache statistics.

        Returns:
            Dict: Cache statistics
        """
        info = self.cache.cache_info()
        stats = {"size": info.currsize, "hits": info.hits, "misses": info.misses}
        self.logger.debug(f"Likelihood cache stats: {stats} (max {self.max_size})")
        return stats
