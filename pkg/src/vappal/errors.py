"""Exception hierarchy shared by all modules."""


class VappError(Exception):
    """Base class for every error raised by this package."""


class ContractViolation(VappError, ValueError):
    """Inputs have inconsistent shapes or break a documented precondition."""


class InvalidArgument(VappError, ValueError):
    pass


class UnsupportedCombination(VappError):
    """A closed form was requested for a (term, weight, set) it cannot handle."""


class UnsupportedBlock(UnsupportedCombination):
    pass


class SingularWeight(VappError, ArithmeticError):
    pass


class NoConvergence(VappError, RuntimeError):
    pass


class NumericalFailure(VappError, FloatingPointError):
    def __init__(self, message, iteration=None):
        super().__init__(message)
        self.iteration = iteration


class ParameterRejected(VappError, ValueError):
    """Parameters fall outside every regime with a convergence guarantee."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class SizeLimitExceeded(VappError, MemoryError):
    pass


class DiagnosticUnavailable(VappError):
    pass


class ParseError(VappError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class DataValidationError(VappError, ValueError):
    pass
