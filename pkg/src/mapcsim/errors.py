"""Exception types shared across the package."""


class InputError(ValueError):
    """An argument refers to something that does not exist or is malformed."""


class UnreachableError(LookupError):
    """No plan exists to the requested vertex in the believed graph."""


class ProtocolError(RuntimeError):
    """A component was driven in an order its protocol forbids."""


class SenderCrashedError(ProtocolError):
    pass


class StalePerceptError(ProtocolError):
    pass


class ConfigError(ValueError):
    pass


class SizeError(ValueError):
    pass
