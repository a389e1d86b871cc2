"""Exception hierarchy shared by every module of the package."""


class QuadsumError(Exception):
    """Base class for all library errors."""


class FieldMismatch(QuadsumError):
    pass


class ZeroPolynomial(QuadsumError):
    pass


class ConstantPolynomial(QuadsumError):
    pass


class WrongDegree(QuadsumError):
    pass


class NotSplit(QuadsumError):
    pass


class WrongCharacteristic(QuadsumError):
    pass


class ConditionViolated(QuadsumError):
    """A necessary condition for the requested decomposition fails.

    ``conditions`` lists the violated conditions verbatim.
    """

    def __init__(self, message, conditions=()):
        super().__init__(message)
        self.conditions = tuple(conditions) or (message,)


class PreconditionUnverifiable(QuadsumError):
    """The operator's structure does not expose what a construction needs."""


class PropertyViolated(QuadsumError):
    pass


class CapExceeded(QuadsumError):
    """A bounded search or orbit computation ran out of budget."""


class SearchFailed(QuadsumError):
    """A bounded search was exhausted. This is never a proof of impossibility."""


class NotFreeOnPrefix(QuadsumError):
    pass


class SpanGapOnPrefix(QuadsumError):
    pass


class NotQuadratic(QuadsumError):
    pass


class FormatError(QuadsumError):
    """Malformed operator, job or certificate file."""


class Unresolved(QuadsumError):
    """A decomposable-or-not question the available backends could not settle."""
