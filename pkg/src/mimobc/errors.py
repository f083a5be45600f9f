"""Exception types raised across the package."""


class MimoBCError(Exception):
    """Base class for every error raised by :mod:`mimobc`."""


class InvalidInputError(MimoBCError, ValueError):
    """Input contains non-finite entries or is otherwise malformed."""


class DimensionError(MimoBCError, ValueError):
    """Shapes or lengths of the arguments do not agree."""


class DomainError(MimoBCError, ValueError):
    """A scalar argument lies outside the domain of the formula."""


class NotPositiveDefiniteError(MimoBCError, ValueError):
    """A matrix expected to be positive definite is not."""


class InfeasiblePrecoderError(MimoBCError, ValueError):
    """Interference-free precoding needs M >= K*N transmit antennas."""


class RankError(MimoBCError, ValueError):
    """The concatenated channel is numerically rank deficient."""
