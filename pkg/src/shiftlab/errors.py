"""Exception hierarchy shared by every shiftlab module."""


class ShiftlabError(Exception):
    """Base class for all library errors."""


class MalformedInputError(ShiftlabError, ValueError):
    pass


class WindowOverflowError(ShiftlabError, ValueError):
    pass


class WindowMismatchError(ShiftlabError, ValueError):
    pass


class SingularityError(ShiftlabError, ArithmeticError):
    """Raised when an operator that must be inverted is numerically singular."""

    def __init__(self, message, sigma_min):
        super().__init__(f"{message} (sigma_min={sigma_min:.3e})")
        self.sigma_min = sigma_min


class WeightBoundError(ShiftlabError, ValueError):
    pass


class PreconditionError(ShiftlabError, ValueError):
    pass


class ProviderError(ShiftlabError, RuntimeError):
    pass


class HorizonExceededError(ShiftlabError, RuntimeError):
    pass


class ConstructionFailedError(ShiftlabError, RuntimeError):
    """A constructive witness could not be built; carries the partial sums seen."""

    def __init__(self, message, partial_sums=None):
        super().__init__(message)
        self.partial_sums = partial_sums or {}


class ConfigError(ShiftlabError, ValueError):
    pass
