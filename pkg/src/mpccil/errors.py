"""Exception types shared across the package."""


class MpccilError(Exception):
    pass


class InvalidInputError(MpccilError, ValueError):
    pass


class DegenerateTangentError(MpccilError, ArithmeticError):
    pass


class NumericalError(MpccilError, ArithmeticError):
    pass


class SingularityError(NumericalError):
    """Roll or pitch reached the tan() singularity."""


class ConfigurationError(MpccilError, ValueError):
    pass


class PolicyOutputError(NumericalError):
    """The policy produced a non-finite control."""


class TrainingDivergedError(MpccilError, RuntimeError):
    def __init__(self, message, loss=None, step=None):
        super().__init__(message)
        self.loss = loss
        self.step = step


class SafetyViolationError(MpccilError, RuntimeError):
    """A collision happened during exploration."""

    def __init__(self, message, step=None, distance=None):
        super().__init__(message)
        self.step = step
        self.distance = distance
