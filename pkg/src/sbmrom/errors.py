"""Exception hierarchy shared by all sbmrom modules."""


class SbmRomError(Exception):
    """Base class for every error raised by sbmrom."""


class InvalidDomain(SbmRomError, ValueError):
    pass


class ParseError(SbmRomError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class InvalidMesh(SbmRomError, ValueError):
    pass


class GeometryOutOfBounds(SbmRomError, ValueError):
    pass


class DegenerateClassification(SbmRomError):
    pass


class SingularProjection(SbmRomError, ValueError):
    pass


class NumericalBlowup(SbmRomError, FloatingPointError):
    """The time integration produced non-finite or runaway values.

    ``step`` is the index of the failing step (when known) and ``state`` the
    last finite state, kept for post-mortem inspection.
    """

    def __init__(self, message, step=None, time=None, state=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.state = state


class DegenerateCenters(SbmRomError, ValueError):
    pass


class SingularSystem(SbmRomError, ArithmeticError):
    pass


class EigenFailure(SbmRomError, ArithmeticError):
    pass


class EmptySpectrum(SbmRomError, ValueError):
    pass


class ShapeError(SbmRomError, ValueError):
    pass


class SingularReducedMass(SbmRomError, ArithmeticError):
    pass


class EmptyBasis(SbmRomError, ValueError):
    pass


class TimeGridMismatch(SbmRomError, ValueError):
    pass
