"""Exception types shared across the package.

Everything user-facing derives from ValueError or RuntimeError so callers can
catch broadly; the distinct classes exist because the library promises which
one fires for which contract violation.
"""


class ShapeMismatch(ValueError):
    """Operands have incompatible dimensions."""


class DimensionMismatch(ShapeMismatch):
    """Database members disagree on ambient dimension or rank."""


class RankDeficient(ValueError):
    """A basis matrix has numerical rank below its column count."""


class ZeroVector(ValueError):
    """An operation requiring a nonzero vector received the zero vector."""


class DomainError(ValueError):
    """A scalar argument lies outside the documented domain."""


class ConfigInvalid(ValueError):
    """A configuration object violates its invariants."""


class InstanceTooLarge(ValueError):
    """Problem size exceeds the documented limit for an exhaustive routine."""


class DegenerateDesign(ValueError):
    """No nonsingular row subset exists; the design matrix is degenerate."""


class NumericalBreakdown(RuntimeError):
    """A linear solve failed beyond what static regularization can absorb."""


class EmptyDatabase(ValueError):
    """An index or search was requested over zero subspaces."""


class TooFewSubspaces(ValueError):
    """The operation needs at least two subspaces to be meaningful."""


class FormatError(ValueError):
    """A serialized matrix or index file is malformed."""


class ChecksumMismatch(FormatError):
    """Stored checksum does not match the recomputed one."""
