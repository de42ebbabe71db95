"""Exception types raised by fracldg."""


class FracLDGError(Exception):
    pass


class InvalidArgument(FracLDGError, ValueError):
    pass


class InvalidWeight(InvalidArgument):
    pass


class InvalidManufacturedSolution(InvalidArgument):
    pass


class InvalidData(InvalidArgument):
    pass


class AssemblyFailure(FracLDGError, ArithmeticError):
    pass


class SolverFailure(FracLDGError, RuntimeError):
    def __init__(self, message: str, level: int | None = None):
        if level is not None:
            message = f"{message} (time level n={level})"
        super().__init__(message)
        self.level = level


class NonlinearDivergence(SolverFailure):
    def __init__(self, message: str, increment: float, level: int | None = None):
        super().__init__(f"{message}; last increment {increment:.3e}", level)
        self.increment = increment
