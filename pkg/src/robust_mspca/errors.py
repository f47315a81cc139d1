"""Exception types shared across the package."""


class RobustMspcaError(Exception):
    """Base class for all package errors."""


class InvalidMatrix(RobustMspcaError):
    """Matrix input is unusable (non-finite entries, wrong shape)."""


class InvalidRank(RobustMspcaError):
    """Target rank k outside the valid range for the given dimension."""


class ShapeError(RobustMspcaError):
    """Incompatible array shapes or inconsistent column counts."""


class ParseError(RobustMspcaError):
    """A cell could not be parsed as a finite number."""


class IoError(RobustMspcaError):
    """File could not be read or written."""


class DegenerateInstance(RobustMspcaError):
    """Instance admits no meaningful solve (all-zero moments, L=1 step sizes, ...)."""


class NumericalError(RobustMspcaError):
    """A numeric routine failed to converge or produced non-finite values."""


class InvalidArgument(RobustMspcaError):
    """Argument outside its documented domain."""
