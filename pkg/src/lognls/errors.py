"""Exception hierarchy shared by every lognls module."""


class LogNLSError(Exception):
    """Base class for all errors raised by lognls."""


class InvalidParameterError(LogNLSError, ValueError):
    pass


class DomainError(LogNLSError, ValueError):
    """An argument lies outside the domain where the quantity is defined."""


class PreconditionError(LogNLSError, ValueError):
    pass


class UnsupportedDimensionError(LogNLSError, ValueError):
    pass


class NumericalFailure(LogNLSError, ArithmeticError):
    """Base for failures of a numerical procedure (CLI exit code 3)."""


class ConvergenceError(NumericalFailure):
    pass


class IntegratorFault(NumericalFailure):
    pass


class NumericalBlowupError(NumericalFailure):
    """Non-finite values appeared in a field; ``snapshot`` holds the last finite state."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot


class MassLeakError(NumericalFailure):
    def __init__(self, message, shell_fraction=None, t=None):
        super().__init__(message)
        self.shell_fraction = shell_fraction
        self.t = t


class TruncationError(NumericalFailure):
    def __init__(self, message, mass_defect=None):
        super().__init__(message)
        self.mass_defect = mass_defect


class ResolutionError(NumericalFailure):
    pass


class ConfigError(LogNLSError):
    """Configuration could not be parsed or validated.

    ``errors`` lists every problem found, not just the first one.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
