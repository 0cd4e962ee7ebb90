"""Noise distributions, structural mechanisms and variable domains.

This module provides the per-node building blocks of a structural causal model:
- Noise specifications (Gaussian, Gamma, Gaussian mixture, empirical joint pool,
  point mass, uniform variate for table mechanisms)
- Mechanisms ``X := f(PA, N)``: linear, random-feature approximations of
  Gaussian-process draws (additive and non-additive), conditional probability
  tables, fixed values and epsilon-mixtures
- Continuous and discrete variable domains

All mechanisms are evaluated vectorised: ``evaluate(parents, noise)`` takes a
``(k, p)`` parent matrix and a length-``k`` noise vector.
"""

from dataclasses import dataclass, fields
from typing import Any, Callable, Dict, Optional, Sequence, Tuple, Type, Union

import numpy as np
from scipy import special, stats

from .errors import DomainError, ModelError

SIMPLEX_TOL = 1e-6


class _ArrayFieldsEq:
    """Field-wise equality that understands numpy array fields."""

    def __eq__(self, other: object) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        for f in fields(self):  # type: ignore[arg-type]
            a, b = getattr(self, f.name), getattr(other, f.name)
            if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
                if np.shape(a) != np.shape(b) or not np.array_equal(a, b):
                    return False
            elif a != b:
                return False
        return True

    __hash__ = None  # type: ignore[assignment]


def _as_float_array(value: Any, ndim: int) -> np.ndarray:
    arr = np.array(value, dtype=float)
    if arr.ndim != ndim:
        arr = arr.reshape((-1,) if ndim == 1 else (arr.shape[0], -1))
    arr.setflags(write=False)
    return arr


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------


class NoiseSpec(_ArrayFieldsEq):
    """Distribution of one exogenous noise coordinate."""

    tag = ""

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def pdf(self, x: np.ndarray) -> np.ndarray:
        return np.exp(self.logpdf(np.asarray(x, dtype=float)))

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Gaussian(NoiseSpec):
    mean: float = 0.0
    std: float = 1.0

    tag = "gaussian"

    def __post_init__(self) -> None:
        if not self.std > 0:
            raise ModelError(f"Gaussian noise needs std > 0, got {self.std}")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.normal(self.mean, self.std, size)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return stats.norm.logpdf(x, loc=self.mean, scale=self.std)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag, "mean": self.mean, "std": self.std}


@dataclass(frozen=True, eq=False)
class Gamma(NoiseSpec):
    """Gamma noise with shape ``a`` and rate ``b`` (scale ``1 / b``)."""

    shape: float
    rate: float

    tag = "gamma"

    def __post_init__(self) -> None:
        if not (self.shape > 0 and self.rate > 0):
            raise ModelError(
                f"Gamma noise needs positive shape and rate, got "
                f"({self.shape}, {self.rate})"
            )

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.gamma(self.shape, 1.0 / self.rate, size)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        return stats.gamma.logpdf(x, a=self.shape, scale=1.0 / self.rate)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag, "shape": self.shape, "rate": self.rate}


@dataclass(frozen=True, eq=False)
class GaussianMixture(NoiseSpec):
    weights: np.ndarray
    means: np.ndarray
    stds: np.ndarray

    tag = "gaussian_mixture"

    def __post_init__(self) -> None:
        for name in ("weights", "means", "stds"):
            object.__setattr__(self, name, _as_float_array(getattr(self, name), 1))
        n = len(self.weights)
        if n == 0 or len(self.means) != n or len(self.stds) != n:
            raise ModelError("mixture weights, means and stds must share a length")
        if np.any(self.weights < 0) or abs(self.weights.sum() - 1.0) > 1e-9:
            raise ModelError("mixture weights must lie on the simplex")
        if np.any(self.stds <= 0):
            raise ModelError("mixture component stds must be positive")

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        comp = rng.choice(len(self.weights), size=size, p=self.weights)
        return rng.normal(self.means[comp], self.stds[comp])

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        comp = stats.norm.logpdf(x[..., None], loc=self.means, scale=self.stds)
        return special.logsumexp(comp, axis=-1, b=self.weights)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.tag,
            "weights": self.weights.tolist(),
            "means": self.means.tolist(),
            "stds": self.stds.tolist(),
        }


@dataclass(frozen=True, eq=False)
class PointMass(NoiseSpec):
    value: float

    tag = "point_mass"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return np.full(size, float(self.value))

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where(np.abs(x - self.value) <= 1e-9, 0.0, -np.inf)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag, "value": self.value}


@dataclass(frozen=True, eq=False)
class UniformVariate(NoiseSpec):
    """U(0, 1) variate driving inverse-CDF sampling of table mechanisms."""

    tag = "uniform"

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        return rng.random(size)

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.where((x >= 0) & (x <= 1), 0.0, -np.inf)

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag}


@dataclass(frozen=True, eq=False)
class EmpiricalJoint(NoiseSpec):
    """One column of a shared pool of joint noise rows.

    Nodes referencing the same pool are sampled together: each draw picks one
    pool row and every such node reads its own column from it.
    """

    pool: np.ndarray
    column: int

    tag = "empirical_joint"

    def __post_init__(self) -> None:
        pool = np.array(self.pool, dtype=float)
        if pool.ndim != 2 or pool.shape[0] == 0:
            raise ModelError("empirical noise pool must be a non-empty matrix")
        if not 0 <= self.column < pool.shape[1]:
            raise ModelError(f"pool column {self.column} out of range")
        pool.setflags(write=False)
        object.__setattr__(self, "pool", pool)

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        rows = rng.integers(0, self.pool.shape[0], size)
        return self.pool[rows, self.column]

    def logpdf(self, x: np.ndarray) -> np.ndarray:
        raise ModelError("an empirical noise pool has no density")

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag, "pool": self.pool.tolist(), "column": self.column}


_NOISES: Dict[str, Type[NoiseSpec]] = {
    cls.tag: cls
    for cls in (
        Gaussian,
        Gamma,
        GaussianMixture,
        PointMass,
        UniformVariate,
        EmpiricalJoint,
    )
}


def noise_from_dict(data: Dict[str, Any]) -> NoiseSpec:
    """Inverse of ``NoiseSpec.to_dict``."""
    params = dict(data)
    tag = params.pop("type", None)
    if tag not in _NOISES:
        raise ModelError(f"unknown noise type: {tag}")
    try:
        return _NOISES[tag](**params)
    except TypeError as e:
        raise ModelError(f"bad parameters for noise '{tag}': {e}")


# ---------------------------------------------------------------------------
# Mechanisms
# ---------------------------------------------------------------------------


class Mechanism(_ArrayFieldsEq):
    """Structural assignment ``X := f(PA, N)``."""

    tag = ""

    @property
    def arity(self) -> Optional[int]:
        """Number of parents the mechanism expects."""
        raise NotImplementedError

    @property
    def additive(self) -> bool:
        """Whether ``f(pa, n) = g(pa) + n``."""
        return False

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def deterministic_part(self, parents: np.ndarray) -> np.ndarray:
        """``g(pa)`` of an additive mechanism."""
        raise ModelError(f"mechanism '{self.tag}' is not additive")

    def to_dict(self) -> Dict[str, Any]:
        raise NotImplementedError


@dataclass(frozen=True, eq=False)
class Linear(Mechanism):
    weights: np.ndarray
    intercept: float = 0.0

    tag = "linear"

    def __post_init__(self) -> None:
        object.__setattr__(self, "weights", _as_float_array(self.weights, 1))

    @property
    def arity(self) -> int:
        return len(self.weights)

    @property
    def additive(self) -> bool:
        return True

    def deterministic_part(self, parents: np.ndarray) -> np.ndarray:
        return parents @ self.weights + self.intercept

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return self.deterministic_part(parents) + noise

    @classmethod
    def draw(cls, rng: np.random.Generator, n_parents: int) -> "Linear":
        """Weights uniform on ``[-2, -0.5] U [0.5, 2]``, zero intercept."""
        magnitude = rng.uniform(0.5, 2.0, size=n_parents)
        sign = rng.choice([-1.0, 1.0], size=n_parents)
        return cls(magnitude * sign, 0.0)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.tag,
            "weights": self.weights.tolist(),
            "intercept": self.intercept,
        }


@dataclass(frozen=True, eq=False)
class _RandomFeatures(Mechanism):
    """``scale * sqrt(2/F) * sum_f w_f cos(freq_f . x + phase_f)``."""

    frequencies: np.ndarray
    phases: np.ndarray
    weights: np.ndarray
    scale: float = 1.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "frequencies", _as_float_array(self.frequencies, 2))
        object.__setattr__(self, "phases", _as_float_array(self.phases, 1))
        object.__setattr__(self, "weights", _as_float_array(self.weights, 1))
        n = self.frequencies.shape[0]
        if len(self.phases) != n or len(self.weights) != n:
            raise ModelError("random-feature arrays disagree on feature count")

    def _features(self, inputs: np.ndarray) -> np.ndarray:
        proj = inputs @ self.frequencies.T + self.phases
        norm = np.sqrt(2.0 / len(self.weights))
        return self.scale * norm * (np.cos(proj) @ self.weights)

    @classmethod
    def draw(
        cls,
        rng: np.random.Generator,
        n_inputs: int,
        features: int = 256,
        bandwidth: float = 1.0,
        scale: float = 1.0,
    ) -> "_RandomFeatures":
        """Random Fourier approximation of an RBF-kernel Gaussian-process draw."""
        return cls(
            frequencies=rng.normal(0.0, 1.0 / bandwidth, size=(features, n_inputs)),
            phases=rng.uniform(0.0, 2 * np.pi, size=features),
            weights=rng.normal(0.0, 1.0, size=features),
            scale=scale,
        )

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.tag,
            "frequencies": self.frequencies.tolist(),
            "phases": self.phases.tolist(),
            "weights": self.weights.tolist(),
            "scale": self.scale,
        }


@dataclass(frozen=True, eq=False)
class RandomFeatureAdditive(_RandomFeatures):
    """Random-feature function of the parents; noise is added afterwards."""

    tag = "rf_additive"

    @property
    def arity(self) -> int:
        return self.frequencies.shape[1]

    @property
    def additive(self) -> bool:
        return True

    def deterministic_part(self, parents: np.ndarray) -> np.ndarray:
        return self._features(parents)

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return self._features(parents) + noise


@dataclass(frozen=True, eq=False)
class RandomFeatureNonAdditive(_RandomFeatures):
    """Random-feature function of the parents and the noise as one extra input."""

    tag = "rf_nonadditive"

    @property
    def arity(self) -> int:
        return self.frequencies.shape[1] - 1

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        inputs = np.column_stack([parents, noise])
        return self._features(inputs)


@dataclass(frozen=True, eq=False)
class Cpt(Mechanism):
    """Conditional probability table driven by a uniform variate.

    ``table`` has one row per parent-state combination, indexed in mixed radix
    over the parents in ascending node order with the last parent fastest.
    """

    table: np.ndarray
    parent_cards: Tuple[int, ...] = ()

    tag = "cpt"

    def __post_init__(self) -> None:
        table = np.array(self.table, dtype=float)
        if table.ndim == 1:
            table = table[None, :]
        cards = tuple(int(c) for c in self.parent_cards)
        object.__setattr__(self, "parent_cards", cards)
        expected_rows = int(np.prod(cards)) if cards else 1
        if table.shape[0] != expected_rows:
            raise ModelError(
                f"table has {table.shape[0]} rows, parents need {expected_rows}"
            )
        if table.shape[1] < 2:
            raise ModelError("a table mechanism needs at least two states")
        if np.any(table < -SIMPLEX_TOL) or np.any(
            np.abs(table.sum(axis=1) - 1.0) > SIMPLEX_TOL
        ):
            raise ModelError("every table row must be a probability simplex")
        table.setflags(write=False)
        object.__setattr__(self, "table", table)

    @property
    def arity(self) -> int:
        return len(self.parent_cards)

    @property
    def cardinality(self) -> int:
        return self.table.shape[1]

    def row_index(self, parents: np.ndarray) -> np.ndarray:
        parents = np.atleast_2d(np.asarray(parents))
        if not self.parent_cards:
            return np.zeros(parents.shape[0], dtype=int)
        return np.ravel_multi_index(tuple(parents.astype(int).T), self.parent_cards)

    def probabilities(self, parents: np.ndarray) -> np.ndarray:
        return self.table[self.row_index(parents)]

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        cum = np.cumsum(self.probabilities(parents), axis=1)
        state = (np.asarray(noise)[:, None] >= cum).sum(axis=1)
        return np.minimum(state, self.cardinality - 1).astype(float)

    def preimage(
        self, parents: np.ndarray, states: np.ndarray
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Interval ``[low, high)`` of uniform variates that produce ``states``."""
        cum = np.cumsum(self.probabilities(parents), axis=1)
        cum = np.column_stack([np.zeros(len(cum)), cum])
        idx = np.asarray(states, dtype=int)
        rows = np.arange(len(cum))
        return cum[rows, idx], cum[rows, idx + 1]

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.tag,
            "table": self.table.tolist(),
            "parent_cards": list(self.parent_cards),
        }


@dataclass(frozen=True, eq=False)
class Fixed(Mechanism):
    """Constant assignment left behind by a hard intervention."""

    value: float

    tag = "fixed"

    @property
    def arity(self) -> int:
        return 0

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return np.full(len(noise), float(self.value))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": self.tag, "value": self.value}


@dataclass(frozen=True, eq=False)
class Mix(Mechanism):
    """``(1 - epsilon) * base + epsilon * other`` on the same inputs."""

    base: Mechanism
    other: Mechanism
    epsilon: float

    tag = "mix"

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ModelError(f"mix epsilon must lie in [0, 1], got {self.epsilon}")
        if self.base.arity != self.other.arity:
            raise ModelError("mixed mechanisms must share their parent arity")

    @property
    def arity(self) -> Optional[int]:
        return self.base.arity

    @property
    def additive(self) -> bool:
        return self.base.additive and self.other.additive

    def deterministic_part(self, parents: np.ndarray) -> np.ndarray:
        if not self.additive:
            return super().deterministic_part(parents)
        return (1 - self.epsilon) * self.base.deterministic_part(
            parents
        ) + self.epsilon * self.other.deterministic_part(parents)

    def evaluate(self, parents: np.ndarray, noise: np.ndarray) -> np.ndarray:
        return (1 - self.epsilon) * self.base.evaluate(
            parents, noise
        ) + self.epsilon * self.other.evaluate(parents, noise)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": self.tag,
            "base": self.base.to_dict(),
            "other": self.other.to_dict(),
            "epsilon": self.epsilon,
        }


def linear_form(mech: Mechanism) -> Optional[Linear]:
    """Equivalent ``Linear`` mechanism, or None when ``mech`` is not linear."""
    if isinstance(mech, Linear):
        return mech
    if isinstance(mech, Mix):
        a, b = linear_form(mech.base), linear_form(mech.other)
        if a is None or b is None:
            return None
        eps = mech.epsilon
        return Linear(
            (1 - eps) * a.weights + eps * b.weights,
            (1 - eps) * a.intercept + eps * b.intercept,
        )
    return None


def random_mechanism_like(mech: Mechanism, rng: np.random.Generator) -> Mechanism:
    """Fresh random mechanism from the same family and arity as ``mech``."""
    if isinstance(mech, Mix):
        return random_mechanism_like(mech.base, rng)
    if isinstance(mech, Linear):
        return Linear.draw(rng, mech.arity)
    if isinstance(mech, _RandomFeatures):
        features, inputs = mech.frequencies.shape
        return type(mech).draw(rng, inputs, features=features, scale=mech.scale)
    raise ModelError(f"cannot draw a random mechanism like '{mech.tag}'")


_MECHANISMS: Dict[str, Callable[..., Mechanism]] = {
    cls.tag: cls
    for cls in (Linear, RandomFeatureAdditive, RandomFeatureNonAdditive, Cpt, Fixed)
}


def mechanism_from_dict(data: Dict[str, Any]) -> Mechanism:
    """Inverse of ``Mechanism.to_dict``."""
    params = dict(data)
    tag = params.pop("type", None)
    if tag == Mix.tag:
        try:
            return Mix(
                mechanism_from_dict(params["base"]),
                mechanism_from_dict(params["other"]),
                float(params["epsilon"]),
            )
        except KeyError as e:
            raise ModelError(f"mix mechanism is missing {e.args[0]}")
    if tag not in _MECHANISMS:
        raise ModelError(f"unknown mechanism type: {tag}")
    if "parent_cards" in params:
        params["parent_cards"] = tuple(params["parent_cards"])
    try:
        return _MECHANISMS[tag](**params)
    except TypeError as e:
        raise ModelError(f"bad parameters for mechanism '{tag}': {e}")


def mechanism_eval(
    mech: Mechanism, parent_values: Sequence[float], noise_value: float
) -> float:
    """Evaluate one structural assignment at a single input.

    Raises:
        ModelError: If the number of parent values does not match the mechanism.
    """
    parents = np.asarray(parent_values, dtype=float).reshape(1, -1)
    if mech.arity is not None and parents.shape[1] != mech.arity:
        raise ModelError(
            f"mechanism '{mech.tag}' expects {mech.arity} parents, "
            f"got {parents.shape[1]}"
        )
    return float(mech.evaluate(parents, np.array([float(noise_value)]))[0])


# ---------------------------------------------------------------------------
# Domains
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Continuous:
    def contains(self, value: float) -> bool:
        return bool(np.isfinite(value))

    def to_dict(self) -> Dict[str, Any]:
        return {"type": "continuous"}


@dataclass(frozen=True)
class Discrete:
    cardinality: int
    states: Tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.cardinality < 2:
            raise ModelError(
                f"a discrete domain needs at least two states, got {self.cardinality}"
            )
        states = tuple(str(s) for s in self.states) or tuple(
            str(i) for i in range(self.cardinality)
        )
        if len(states) != self.cardinality or len(set(states)) != len(states):
            raise ModelError(f"state names do not match cardinality: {states}")
        object.__setattr__(self, "states", states)

    def contains(self, value: float) -> bool:
        return float(value).is_integer() and 0 <= value < self.cardinality

    def code(self, state: Union[str, int]) -> int:
        """Integer code of a state given by name or code."""
        if isinstance(state, str) and state in self.states:
            return self.states.index(state)
        try:
            value = int(state)
        except (TypeError, ValueError):
            raise DomainError(f"unknown state '{state}'")
        if not self.contains(value):
            raise DomainError(f"state {value} outside [0, {self.cardinality})")
        return value

    def to_dict(self) -> Dict[str, Any]:
        return {
            "type": "discrete",
            "cardinality": self.cardinality,
            "states": list(self.states),
        }


VariableDomain = Union[Continuous, Discrete]


def domain_from_dict(data: Dict[str, Any]) -> VariableDomain:
    if data.get("type") == "continuous":
        return Continuous()
    if data.get("type") == "discrete":
        return Discrete(int(data["cardinality"]), tuple(data.get("states", ())))
    raise ModelError(f"unknown domain type: {data.get('type')}")


def is_discrete(domain: VariableDomain) -> bool:
    return isinstance(domain, Discrete)
