"""Exception hierarchy for causal-distances.

Validation problems (bad input, unsupported requests) and numerical problems
(convergence, singular matrices) are kept apart so the CLI can map them to
distinct exit codes.
"""

from typing import Optional


class CausalDistanceError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ValidationError(CausalDistanceError):
    """Input or request is invalid."""

    exit_code = 2


class GraphError(ValidationError):
    """Invalid graph: cycle, self-loop, bad index, overlapping node sets."""


class ModelError(ValidationError):
    """Invalid structural causal model or mismatched model pair."""


class DomainError(ValidationError):
    """A value lies outside a variable's domain."""


class CapExceededError(ValidationError):
    """An enumeration or exact solve exceeded its configured cap."""


class GraphOutputError(ValidationError):
    """A discovery output file could not be turned into a graph."""


class CounterfactualUnsupported(ValidationError):
    """Counterfactuals requested for a model without structural equations."""


class InfeasibleEvidence(ValidationError):
    """Evidence has zero probability under the model."""


class BifSyntaxError(ValidationError):
    """Syntax error in a BIF document, with location."""

    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class BifSemanticError(ValidationError):
    """Well-formed BIF document that violates a network invariant."""

    def __init__(self, message: str, block: Optional[str] = None):
        prefix = f"probability block '{block}': " if block else ""
        super().__init__(prefix + message)
        self.block = block


class NumericalError(CausalDistanceError):
    """A numerical procedure failed."""

    exit_code = 3


class ConvergenceError(NumericalError):
    """MCMC chains disagree beyond the diagnostic tolerance."""


class SingularMatrixError(NumericalError):
    """A covariance block that must be invertible is singular."""
