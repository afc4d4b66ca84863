"""Exception types raised across the workbench."""

from __future__ import annotations


class HazardBenchError(Exception):
    """Base class for all workbench errors."""


# scene
class LevelOutOfRange(HazardBenchError, ValueError):
    pass


class FactorMismatch(HazardBenchError, ValueError):
    pass


class InvalidScene(HazardBenchError, ValueError):
    pass


# render
class NonPositiveDepth(HazardBenchError, ValueError):
    pass


class EmptyMask(HazardBenchError, ValueError):
    pass


class ShapeMismatch(HazardBenchError, ValueError):
    pass


# hazard / match
class WindowTooLarge(HazardBenchError, ValueError):
    pass


# eval
class EmptyRegion(HazardBenchError, ValueError):
    pass


class DegenerateInput(HazardBenchError, ValueError):
    pass


class IncompleteGrid(HazardBenchError, ValueError):
    pass


# io
class ParseError(HazardBenchError, ValueError):
    pass


class MalformedHeader(ParseError):
    pass


class TruncatedPayload(ParseError):
    pass


class WrongBitDepth(ParseError):
    pass


class ConfigError(HazardBenchError, ValueError):
    pass
