"""Verification engine for warped quasi-Einstein metrics with harmonic Weyl curvature."""

from .errors import (
    BlowUp,
    DegenerateRoot,
    DivisionByZero,
    DomainEmpty,
    DomainError,
    NonPositiveDefinite,
    NoRealRoot,
    ParamError,
    QEError,
    StencilOutOfRange,
    StepTooLarge,
    UnsupportedFiber,
)

__version__ = "0.1.0"
