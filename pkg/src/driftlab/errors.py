"""Exception types shared across the package."""


class DriftLabError(Exception):
    """Base class for all library errors."""


class DegenerateRowError(DriftLabError):
    """A row had (near-)zero norm where a unit direction was required."""


class DimensionMismatchError(DriftLabError):
    """Operands disagree on a dimension they must share."""


class ShapeMismatchError(DriftLabError):
    """Parameter-shaped containers do not mirror each other."""


class NonpositiveTemperatureError(DriftLabError):
    """A softmax temperature must be strictly positive."""


class NonfiniteGradientError(DriftLabError):
    """A gradient contained NaN or Inf."""


class TooFewSamplesError(DriftLabError):
    """A dataset is too small for the requested split."""


class MissingPretrainError(DriftLabError):
    """Continual training was started without a pretrained snapshot."""


class MissingRecordsError(DriftLabError):
    """A run directory contains no phase records to report on."""


class EmptyCorrectSetError(DriftLabError):
    """No sample was correctly retrieved by the reference snapshot."""


class ConstructionFailureError(DriftLabError):
    """A seeded demo instance could not be constructed within the retry bound."""


class ConfigError(DriftLabError):
    """Invalid configuration file or option value."""
