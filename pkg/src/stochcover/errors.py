"""Exception types shared across the package."""


class StochCoverError(Exception):
    """Base class for all package errors."""


class ItemAlreadyAssigned(StochCoverError, ValueError):
    """An item already has an observed state in the subrealization."""


class BudgetExceeded(StochCoverError):
    """An enumeration or materialization would exceed its configured budget."""


class TableMiss(StochCoverError, KeyError):
    """An explicit utility table has no entry for the requested subrealization."""


class NotCoverable(StochCoverError):
    """Some realization does not reach the common goal value."""


class EtaUnavailable(StochCoverError):
    """The minimum goal gap can neither be computed nor inferred."""


class NoProgressPossible(StochCoverError):
    """Every remaining item has zero expected marginal utility."""


class PolicyIncomplete(StochCoverError):
    """A policy is undefined at a reachable non-cover subrealization."""


class NonCoveringPolicy(StochCoverError):
    """A branch exhausted every item without reaching the goal value."""


class DomainError(StochCoverError, ValueError):
    """Arguments outside the mathematical domain of a helper."""


class GenerationFailed(StochCoverError):
    """The instance generator could not produce a valid instance."""


class ReproductionMismatch(StochCoverError, AssertionError):
    """A reproduced worked example drifted from its pinned literals."""


class ConfigError(StochCoverError, ValueError):
    """An experiment configuration or input file is malformed."""
