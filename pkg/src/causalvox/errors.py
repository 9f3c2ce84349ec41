"""Exception types shared across the toolkit."""


class CausalvoxError(Exception):
    """Base class for all toolkit errors."""


class InvalidParameterError(CausalvoxError, ValueError):
    """An argument violates a documented precondition."""


class RankDeficiencyError(CausalvoxError):
    """A design matrix is numerically rank deficient.

    Carries the detected numerical rank so callers can report it.
    """

    def __init__(self, message: str, rank: int):
        super().__init__(message)
        self.rank = rank


class UndefinedSparsityError(CausalvoxError):
    """A sparsity index was requested for a vector with zero total mass."""


class FileFormatError(CausalvoxError):
    """A volume, stimulus, or map file does not match its declared format."""
