"""Exception hierarchy shared by every layer of the package."""


class SeaError(Exception):
    """Base class for all errors raised by seaoons."""


class ConfigError(SeaError, ValueError):
    pass


class SingularRegularizerError(SeaError, ArithmeticError):
    pass


class ProjectionError(SeaError, ArithmeticError):
    pass


class EmptySupportError(SeaError, ValueError):
    pass


class NormalizationError(SeaError, ArithmeticError):
    pass


class LossRangeError(SeaError, ValueError):
    """A meta-layer loss or hint left the range ``|v_j| <= G * D_j``."""

    def __init__(self, index, value, bound, what="loss"):
        self.index = index
        self.value = value
        self.bound = bound
        super().__init__(
            f"loss range exceeded: {what}[{index}] = {value!r} but |{what}| must be <= {bound!r}"
        )


class RoundAlreadySampled(SeaError, RuntimeError):
    pass


class ComparatorError(SeaError, ArithmeticError):
    pass
