"""Exception types shared across the package.

Every error raised deliberately by this package derives from
:class:`AgvoterError`, so callers (and the command line frontend) can
distinguish domain failures from programming mistakes.  Exceptions carry a
``context`` dict with machine-readable detail where that helps diagnosis.
"""

from __future__ import annotations


class AgvoterError(Exception):
    """Base class for all package errors."""

    def __init__(self, message: str, **context):
        super().__init__(message)
        self.message = message
        self.context = context

    @property
    def code(self) -> str:
        return type(self).__name__


class InvalidGraph(AgvoterError):
    """Graph data violates a structural invariant (weights, rows, duplicates)."""


class EmptyGraph(AgvoterError):
    """Operation needs a non-degenerate graph."""


class NotStronglyConnected(AgvoterError):
    """The directed graph is not strongly connected."""


class NoConvergence(AgvoterError):
    """An iterative solver exhausted its sweep budget."""


class DimensionMismatch(AgvoterError):
    """Vector or matrix sizes do not agree with the graph."""


class InvalidSpec(AgvoterError):
    """A generator or configuration spec fails validation."""


class DisconnectedAfterRetries(AgvoterError):
    """Random generation kept producing disconnected graphs."""


class ParseError(AgvoterError):
    """An edge-list file line could not be parsed."""

    def __init__(self, message: str, line: int | None = None, **context):
        super().__init__(message, line=line, **context)
        self.line = line


class IsolatedNode(AgvoterError):
    """A node in a weighted edge list has no out-edges."""


class TargetTooLarge(AgvoterError):
    """Subgraph sampling cannot reach the requested node count."""


class AllAgnostic(AgvoterError):
    """Dynamics need at least one gnostic node to start from."""


class ProtocolMismatch(AgvoterError):
    """Unknown protocol name, or a protocol unavailable for the request."""


class TooLargeToEnumerate(AgvoterError):
    """Exact enumeration would exceed the configured state-space bound."""


class CapWithoutProgress(AgvoterError):
    """A run hit its round cap while agnostic nodes remained frozen."""


class SingularSystem(AgvoterError):
    """A linear system arising in exact computation was singular."""


class NoGnosticNodes(AgvoterError):
    """A census with no gnostic nodes cannot define a winning fraction."""


class HasAgnosticNodes(AgvoterError):
    """Operation is defined only for fully gnostic configurations."""


class MissingCorpus(AgvoterError):
    """An external corpus directory is required but not configured."""


class CappedRuns(AgvoterError):
    """Every Monte Carlo run hit the round cap; no estimate is available."""


class StrongConnectivityWarning(UserWarning):
    """Warns when loaded data is not strongly connected but still usable."""
