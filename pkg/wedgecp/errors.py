"""Exceptions raised by wedgecp modules."""


class WedgeError(Exception):
    """Base class of all wedgecp errors."""


class InvalidArgumentError(WedgeError, ValueError):
    """Invalid input parameters (parity, integrality, rates, empty window, ...)."""


class OutOfWindowError(WedgeError):
    """A query or an evolution reaches outside the timeline window or horizon."""


class WindowTooSmallError(WedgeError):
    """Too many replicas touched the window boundary."""

    def __init__(self, touched: int, replicas: int) -> None:
        self.touched = touched
        self.replicas = replicas
        super().__init__(f'{touched}/{replicas} replicas touched the window boundary; increase the window margin.')


class DegenerateGeometryError(WedgeError, ValueError):
    """Y-region parameters for which a bounding line is vertical or undefined."""


class SearchExhaustedError(WedgeError):
    """Integer-solution search exceeded its configured bound."""


class InternalConsistencyError(WedgeError):
    """A geometric identity that should always hold failed."""


class AcceptanceError(WedgeError):
    """An acceptance threshold failed in --check mode."""

    def __init__(self, failures: list[str]) -> None:
        self.failures = failures
        super().__init__('acceptance check failed: ' + '; '.join(failures))
