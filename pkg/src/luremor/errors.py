"""Exception and warning classes raised by luremor."""


class LureMorError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(LureMorError, ValueError):
    pass


class SingularResolvent(LureMorError, ArithmeticError):
    """``sI - A`` is numerically singular at the requested point."""


class EigenFailure(LureMorError):
    pass


class BoundaryEigenvalue(LureMorError, ValueError):
    """An eigenvalue lies on (or too close to) the line ``Re(s) = -rate``."""


class BoundaryPole(BoundaryEigenvalue):
    """The shifted transfer function has a pole on the imaginary axis."""


class SylvesterFailure(LureMorError, ArithmeticError):
    pass


class UnstableA(LureMorError, ValueError):
    pass


class NearSingularSpectrum(LureMorError, ArithmeticError):
    pass


class OrderTooSmall(LureMorError, ValueError):
    pass


class BisectionStall(LureMorError, ValueError):
    pass


class GridUnderflow(LureMorError, ArithmeticError):
    """Adaptive refinement of a frequency grid exceeded its point budget."""


class CertificateInvalid(LureMorError, ArithmeticError):
    pass


class StructureMismatch(LureMorError, ValueError):
    pass


class StepTooLarge(LureMorError, ValueError):
    pass


class Divergence(LureMorError, ArithmeticError):
    """Simulation blew up; the partial trajectory is attached."""

    def __init__(self, message, trajectory=None):
        super().__init__(message)
        self.trajectory = trajectory


class TooShort(LureMorError, ValueError):
    pass


class PoleHit(LureMorError, ArithmeticError):
    pass


class ParseError(LureMorError, ValueError):
    pass


class UnknownNonlinearityKind(ParseError):
    pass


class RankDeficient(UserWarning):
    """Requested truncation order exceeds the numerical rank of the Gramians."""


class IllConditionedSplit(UserWarning):
    pass
