"""Exception hierarchy.

ValidationError covers bad inputs, bad files, and violated preconditions
(CLI exit code 1). NumericalError covers non-finite losses/gradients and
degenerate vectors encountered mid-computation (CLI exit code 2).
"""


class ValidationError(Exception):
    pass


class FormatError(ValidationError):
    """Feature file is structurally broken (magic, truncation, trailing bytes)."""


class BadMagicError(FormatError):
    pass


class TruncatedFileError(FormatError):
    pass


class NonFiniteValueError(ValidationError):
    """A stored or computed value is NaN/Inf where finiteness is required."""


class DegenerateRowError(ValidationError):
    """A row that must be normalizable has (near-)zero norm."""


class InsufficientShotsError(ValidationError):
    """A class has fewer train rows than the requested K."""


class ShapeError(ValidationError):
    pass


class ParameterError(ValidationError):
    pass


class DomainError(ValidationError):
    """Input lies outside the mathematical domain of an operation."""


class GenerationError(ValidationError):
    """Synthetic task generation could not satisfy its constraints."""


class NumericalError(Exception):
    """Non-finite value produced during loss/gradient/forward computation."""

    def __init__(self, message, term=None):
        super().__init__(message)
        self.term = term
