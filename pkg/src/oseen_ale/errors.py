"""Exception types raised by the solver and the analysis layer."""


class OseenAleError(Exception):
    pass


class InvertedCell(OseenAleError):
    """A cell Jacobian determinant is non-positive (the mapping is not bijective)."""

    def __init__(self, message, cells=(), time=None):
        super().__init__(message)
        self.cells = tuple(int(c) for c in cells)
        self.time = time


class IndexOutOfRange(OseenAleError, IndexError):
    pass


class SolverFailure(OseenAleError):
    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class NegativeViscosity(OseenAleError, ValueError):
    pass


class WrongVariant(OseenAleError, ValueError):
    pass


class ConditionViolated(OseenAleError):
    pass


class ConfigError(OseenAleError, ValueError):
    pass
