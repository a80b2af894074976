"""Exception hierarchy shared by every core module.

Each error keeps the measured quantity that triggered it so that reports can show
the offending value next to the tolerance it violated.
"""

from typing import Any, Optional


class HeisenbergError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def __init__(self, message: str, value: Optional[Any] = None):
        super().__init__(message)
        self.value = value


class ConfigError(HeisenbergError):
    exit_code = 2


class DimensionMismatch(HeisenbergError):
    exit_code = 2


class InsufficientShells(HeisenbergError):
    exit_code = 2


class ResidualsNotMonotone(HeisenbergError):
    pass


class DegenerateLeviForm(HeisenbergError):
    pass


class ContourHitsSpectrum(HeisenbergError):
    def __init__(self, message: str, value: Optional[float] = None, sector: Optional[int] = None):
        super().__init__(message, value)
        self.sector = sector


class NotInvertible(HeisenbergError):
    def __init__(self, message: str, value: Optional[float] = None, fiber: Optional[str] = None):
        super().__init__(message, value)
        self.fiber = fiber


class EquatorUnresolved(HeisenbergError):
    pass


class QuadratureUnstable(HeisenbergError):
    pass


class GapTooSmall(HeisenbergError):
    pass


class RangesDiffer(HeisenbergError):
    pass


class YConditionFails(HeisenbergError):
    exit_code = 3

    def __init__(self, message: str, q: Optional[int] = None):
        super().__init__(message, q)
        self.q = q


class TailNotConverged(HeisenbergError):
    pass


class MeshTooCoarse(HeisenbergError):
    pass


class PathError(HeisenbergError):
    pass


class DegenerateFrame(HeisenbergError):
    pass
