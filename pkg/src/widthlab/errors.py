"""Exception types shared across the package."""


class WidthlabError(ValueError):
    """Base class for all widthlab errors."""


class ShapeError(WidthlabError):
    """Mismatched ranges, bad breakpoints, or wrong coordinate counts."""


class ParameterError(WidthlabError):
    """A numeric parameter is outside its documented domain."""


class EvaluationError(WidthlabError):
    """A function handle produced a non-finite value."""


class CapacityError(WidthlabError):
    """A size/resolution cap was exceeded."""


class LemmaRegimeError(WidthlabError):
    """The requested (n, gamma, q) produce a degenerate level range.

    Carries ``min_valid_n``, the smallest n for which the range is valid.
    """

    def __init__(self, message: str, min_valid_n: int):
        super().__init__(message)
        self.min_valid_n = min_valid_n


class EmptySubspaceError(WidthlabError):
    """Orthonormalization was handed only zero / dependent vectors."""


class ConfigError(WidthlabError):
    """Bad CLI flags or config file contents."""
