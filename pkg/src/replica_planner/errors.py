from __future__ import annotations

from typing import TYPE_CHECKING, Any, Optional

if TYPE_CHECKING:  # pragma: no cover
    from .services.policy import ReplicaDecision


class ReplicaPlannerError(Exception):
    """Base class for every error raised by the library."""


class DomainError(ReplicaPlannerError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(ReplicaPlannerError):
    """A cluster config or settings document is malformed."""


class ScenarioError(ReplicaPlannerError):
    """A scenario document is malformed or references undeclared files/nodes."""


class UnreachableTarget(ReplicaPlannerError):
    """
    No replica count up to the cap beats the availability target.
    `decision` holds the clamped result so callers can still inspect it.
    """

    def __init__(self, message: str, decision: "ReplicaDecision"):
        super().__init__(message)
        self.decision = decision


class InsufficientNodes(ReplicaPlannerError):
    """
    Not enough eligible nodes to hold the requested replicas.
    `partial` carries whatever could still be produced (a placement prefix or a repair plan).
    """

    def __init__(self, message: str, partial: Optional[Any] = None):
        super().__init__(message)
        self.partial = partial


class BlockTooLarge(ReplicaPlannerError):
    """A block is bigger than the cluster block size."""
