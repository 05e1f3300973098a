class RvaError(Exception):
    """Base class for all errors raised by this package."""


class InvalidTopology(RvaError):
    pass


class UnsupportedOperation(RvaError):
    pass


class InvalidScenario(RvaError):
    pass


class IllegalEvent(RvaError):
    pass


class ProtocolFault(RvaError):
    """A transition function asked for something impossible (a bug, not an adversary win)."""


class EngineFault(RvaError):
    """The engine handed a protocol an observation that cannot arise."""


class UndefinedProtocolInput(RvaError):
    pass


class InapplicablePolicy(RvaError):
    pass


class OracleTooLarge(RvaError):
    pass
