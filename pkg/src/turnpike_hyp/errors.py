"""Exception hierarchy for the turnpike toolkit."""


class TurnpikeError(Exception):
    """Base class for all errors raised by this package."""


class SignViolation(TurnpikeError, ValueError):
    """Characteristic speeds violate d_-(x) < 0 < d_+(x)."""


class PositivityViolation(TurnpikeError, ValueError):
    pass


class OutOfDomain(TurnpikeError, ValueError):
    pass


class NonSPD(TurnpikeError, ValueError):
    pass


class RegimeMismatch(TurnpikeError, ValueError):
    pass


class EmptyGrid(TurnpikeError, ValueError):
    pass


class CflViolation(TurnpikeError, ValueError):
    pass


class ShapeMismatch(TurnpikeError, ValueError):
    pass


class SingularSystem(TurnpikeError, ArithmeticError):
    pass


class NoConvergence(TurnpikeError, RuntimeError):
    pass


class SPDViolation(TurnpikeError, ArithmeticError):
    """CG met a direction of nonpositive curvature."""


class LambdaOutOfRange(TurnpikeError, ValueError):
    pass


class ThresholdNotMet(TurnpikeError, ValueError):
    """Switching cost too small for the constant-control reduction."""


class VacuumReached(TurnpikeError, ArithmeticError):
    pass


class DegenerateDensity(TurnpikeError, ValueError):
    pass


class NotDiagonal(TurnpikeError, ValueError):
    pass


class ParseError(TurnpikeError, ValueError):
    pass


class ValidationError(TurnpikeError, ValueError):
    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
