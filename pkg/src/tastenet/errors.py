"""Exception hierarchy. Everything raised on purpose derives from TasteNetError."""


class TasteNetError(Exception):
    """Base class for all errors raised by this package."""


class SchemaError(TasteNetError):
    """A column or label required by a FeatureSchema is missing or malformed."""


class ParseError(TasteNetError):
    """A CSV cell could not be parsed; carries the offending row index."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class DataError(TasteNetError):
    """A dataset is empty or violates an observation-level invariant."""


class SpecError(TasteNetError):
    """A utility specification references an unresolved coefficient or column."""


class ConfigError(TasteNetError):
    """A run configuration file is invalid."""


class TrainingError(TasteNetError):
    """Estimation failed (non-finite loss, divergence, ...)."""


class IndicatorError(TasteNetError):
    """An economic indicator is not computable under the model's conventions."""


class RegressionError(TasteNetError):
    """The taste-recovery design matrix is rank deficient."""

    def __init__(self, message, dependent_columns=()):
        super().__init__(message)
        self.dependent_columns = tuple(dependent_columns)


class ProbeError(TasteNetError):
    """Hidden-unit probing requested on a model without hidden layers."""
