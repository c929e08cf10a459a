"""Exception types shared across the package."""


class AmimputeError(Exception):
    """Base class for all package-specific errors."""


class DataError(AmimputeError, ValueError):
    """Invalid input data (shape, range, or content)."""


class CsvFormatError(DataError):
    """A CSV file could not be parsed; message carries row/column context."""


class DegenerateBasisError(AmimputeError):
    """Too few distinct covariate values to build a spline basis."""


class DegenerateFitError(AmimputeError):
    """An additive-model fit is not identifiable; callers may fall back."""


class NoRespondentsError(AmimputeError):
    """Imputation was requested on a sample with zero respondents."""


class NumericalError(AmimputeError):
    """A linear system remained singular after the ridge fallback."""


class ConfigError(AmimputeError):
    """An experiment configuration failed validation.

    ``errors`` holds one message per violated constraint.
    """

    def __init__(self, errors):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))
