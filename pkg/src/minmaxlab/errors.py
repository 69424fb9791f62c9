"""Exception hierarchy shared by every construction."""


class MinMaxLabError(Exception):
    """Base class for all errors raised by this package."""


class ZeroMass(MinMaxLabError):
    pass


class DomainMismatch(MinMaxLabError):
    pass


class InvalidExponent(MinMaxLabError):
    pass


class InvalidParameter(MinMaxLabError, ValueError):
    pass


class InvalidDensity(InvalidParameter):
    pass


class EmptyClass(MinMaxLabError):
    pass


class InfeasibleConstraint(MinMaxLabError):
    pass


class UnsupportedConstraint(MinMaxLabError):
    pass


class UnsupportedPoint(MinMaxLabError):
    pass


class NoConvergence(MinMaxLabError):
    """The game solver ran out of rounds; ``result`` holds the best pair found."""

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result


class BoundNotMet(MinMaxLabError):
    """A sampling step never met its bound; ``report`` holds the best attempt."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class PremiseViolated(MinMaxLabError):
    """The hypothesis of a construction fails; ``witness`` says where."""

    def __init__(self, message, witness=None):
        super().__init__(message)
        self.witness = witness


class DegenerateDistinguisher(MinMaxLabError):
    pass


class NoPositiveSecurity(MinMaxLabError):
    pass


class ConfigError(MinMaxLabError):
    pass
