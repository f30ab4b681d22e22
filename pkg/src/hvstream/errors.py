"""Exception hierarchy shared by every module."""


class HvStreamError(Exception):
    """Base class for all library errors."""


class InvalidInputError(HvStreamError, ValueError):
    pass


class ValidationError(HvStreamError, ValueError):
    pass


class ParseError(ValidationError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


class DegenerateMeanError(HvStreamError, ValueError):
    """Summed unit vectors cancel out, so the mean direction is undefined."""


class RangeError(HvStreamError, ValueError):
    pass


class CapacityError(HvStreamError, RuntimeError):
    pass
