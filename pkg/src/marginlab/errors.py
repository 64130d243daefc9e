"""Exception types raised across the package."""


class MarginLabError(Exception):
    """Base class for all package errors."""


class DegenerateLeadingCoefficient(MarginLabError, ValueError):
    pass


class DegenerateInput(MarginLabError, ValueError):
    pass


class ImproperLoop(MarginLabError, ValueError):
    """Derivative action on a plant with direct feedthrough."""


class NotACrossover(MarginLabError, ValueError):
    pass


class NotStabilizable(MarginLabError):
    """No controller of the requested class stabilizes the plant."""


class NotStabilizing(MarginLabError, ValueError):
    """The given gains do not stabilize the nominal loop."""


class RootNotBracketed(MarginLabError, RuntimeError):
    """A cubic that must have a root in an interval has none there."""


class AgreementFailure(MarginLabError, RuntimeError):
    """Two independent margin computations disagree."""


class InvalidPlant(MarginLabError, ValueError):
    pass
