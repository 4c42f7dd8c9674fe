"""Exception hierarchy shared by every package in the repository."""

from __future__ import annotations


class LabError(Exception):
    """Base class for all errors raised on purpose by this code base."""


class ConfigError(LabError, ValueError):
    """Invalid configuration value, flag or file."""


class ShapeError(LabError, ValueError):
    """Operands whose shapes do not fit together."""


class NumericError(LabError, ArithmeticError):
    """Non-finite input or intermediate value."""


class GeometryError(LabError, ValueError):
    """Token geometry misuse, e.g. asking a text token for its 2D position."""


class MaskError(LabError, ValueError):
    """Invalid mask parameters, fully masked rows or malformed bitmaps."""


class TapeError(LabError):
    """A value was used with a tape that never recorded it."""


class PlanError(LabError, ValueError):
    """A patch plan that cannot keep local attention exact."""


class CommunicationError(LabError):
    """Failure in the simulated message transport."""


class MissingHaloError(CommunicationError):
    """A worker did not receive the halo rows it needs."""


class DeadlockError(CommunicationError):
    """A worker waited too long or received a message with the wrong tag."""


class DivergenceError(NumericError):
    """Training produced a non-finite loss."""
