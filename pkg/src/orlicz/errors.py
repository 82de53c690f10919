class OrliczError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(OrliczError, ValueError):
    pass


class DomainError(OrliczError, ValueError):
    pass


class TruncatedDomainError(OrliczError):
    """The supremum in a conjugate is not resolved by the grid."""


class InsufficientTailError(OrliczError):
    pass


class OutsideSpaceError(OrliczError):
    """The Luxemburg objective is infinite on the whole scan bracket."""


class AliasingError(OrliczError, ValueError):
    pass


class BudgetExceeded(OrliczError):
    pass
