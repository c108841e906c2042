"""Exception types raised across the package."""


class SSLCurvesError(Exception):
    """Base class for all package errors."""


class MissingClass(SSLCurvesError):
    pass


class TooFewPerClass(SSLCurvesError):
    pass


class DimensionMismatch(SSLCurvesError):
    pass


class EmptyInput(SSLCurvesError):
    pass


class InvalidSpec(SSLCurvesError):
    pass


class DatasetError(SSLCurvesError):
    """Raised when a dataset file fails to load or validate."""


class ShapeMismatch(DatasetError):
    pass


class PriorMismatch(DatasetError):
    pass


class ParseError(DatasetError):
    pass


class NotTwoClass(DatasetError):
    pass


class RedrawLimitExceeded(SSLCurvesError):
    pass


class UnknownMetric(SSLCurvesError):
    pass


class MalformedCSV(SSLCurvesError):
    pass


class ConfigError(SSLCurvesError):
    pass
