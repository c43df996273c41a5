"""Exception hierarchy. Each class carries the CLI exit code for its category."""


class PointScatterError(Exception):
    exit_code = 1


class DimensionError(PointScatterError, ValueError):
    exit_code = 2


class BoundsError(PointScatterError, IndexError):
    exit_code = 3


class CapacityError(PointScatterError, ValueError):
    exit_code = 4


class ParameterError(PointScatterError, ValueError):
    exit_code = 5


class ParseError(PointScatterError, ValueError):
    exit_code = 6


class PairingError(PointScatterError, ValueError):
    exit_code = 7


class UndefinedMetricError(PointScatterError, ValueError):
    exit_code = 8


class StaleGradientError(PointScatterError, RuntimeError):
    exit_code = 9


class TrainingDivergedError(PointScatterError, FloatingPointError):
    exit_code = 10


class ArtifactIOError(PointScatterError, OSError):
    exit_code = 11
