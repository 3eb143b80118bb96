"""Exception hierarchy shared by every qewarp module."""


class QEError(Exception):
    """Base class for all qewarp errors."""


class DomainError(QEError, ValueError):
    """Evaluation point outside a function's domain or at a singularity."""


class DivisionByZero(QEError, ZeroDivisionError):
    pass


class ParamError(QEError, ValueError):
    """Invalid or inconsistent family / flow parameters."""


class UnsupportedFiber(QEError):
    """A fiber block has no concrete curvature realization."""


class StencilOutOfRange(QEError):
    pass


class NonPositiveDefinite(QEError):
    pass


class NoRealRoot(ParamError):
    pass


class DegenerateRoot(ParamError):
    pass


class DomainEmpty(ParamError):
    pass


class BlowUp(QEError):
    """Integration left the admissible region; carries the last valid state."""

    def __init__(self, s, last_state, reason=""):
        self.s = s
        self.last_state = last_state
        self.reason = reason
        super().__init__(f"blow-up at s={s:.6g}: {reason}")


class StepTooLarge(QEError):
    def __init__(self, s, drift, name):
        self.s = s
        self.drift = drift
        self.name = name
        super().__init__(f"monitor {name!r} drifted by {drift:.3e} at s={s:.6g}")
