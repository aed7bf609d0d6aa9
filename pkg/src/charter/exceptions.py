"""Exception hierarchy.

Every error carries a stable class name; the CLI prints that name so callers
can match on it.
"""


class CharterError(Exception):
    """Base class for all errors raised by this package."""


class NotInterior(CharterError):
    """A point is not strictly inside a polyhedron."""


class SingularH(CharterError):
    """The barrier matrix could not be factorized."""


class NoConvergence(CharterError):
    """Centering did not reach its tolerance within the iteration cap."""


class DegenerateDirection(CharterError):
    """A cut direction is numerically zero."""


class CollapsedPolytope(CharterError):
    """The localization set shrank below floating-point resolution."""


class InvalidBudget(CharterError):
    """A privacy parameter is outside the domain of a mechanism or accounting bound."""


class PrivacyBudgetTooLarge(CharterError):
    """eps_dp >= 1.5 / sqrt(K)."""


class InvalidInput(CharterError, ValueError):
    """A numeric argument failed validation."""


class LedgerViolation(CharterError):
    """A composed privacy budget exceeds its target."""


class EmptyFreshBatch(CharterError):
    """A client drew no previously unseen sample in a round."""


class ConfigRejected(CharterError):
    """Run preconditions failed and no override was given."""


class OracleUnavailable(CharterError):
    """The problem exposes no true-loss oracle."""


class UnknownProblem(CharterError, KeyError):
    """Catalog key not found."""
