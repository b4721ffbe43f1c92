"""Exception hierarchy shared by every module."""


class LMNError(Exception):
    pass


class InvalidInputError(LMNError, ValueError):
    pass


class ConvergenceError(LMNError, RuntimeError):
    def __init__(self, message, iterations):
        super().__init__(f"{message} (after {iterations} iterations)")
        self.iterations = iterations


class NumericError(LMNError, ArithmeticError):
    """Non-finite value produced during a forward or backward pass."""

    def __init__(self, message, timestep=None):
        if timestep is not None:
            message = f"{message} at timestep {timestep}"
        super().__init__(message)
        self.timestep = timestep
