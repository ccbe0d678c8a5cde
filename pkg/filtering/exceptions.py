# filtering/exceptions.py


class FilteringError(Exception):
    """Base class for every error raised by the filtering library"""


class DimensionError(FilteringError, ValueError):
    """Array shapes do not fit together"""


class ContractError(FilteringError, ValueError):
    """An input violates a documented precondition (e.g. asymmetric covariance)"""


class InsufficientEnsembleError(FilteringError, ValueError):
    """Fewer than two ensemble members where moments are required"""


class ModelValidationError(FilteringError, ValueError):
    """A filtering problem declaration is inconsistent or degenerate"""


class UnsupportedVariantError(FilteringError, ValueError):
    """A filter variant was requested for a model it is not defined for"""


class NumericalError(FilteringError, ArithmeticError):
    """
    Integration broke down. `step` is the index of the grid step whose
    update produced the failure, if known.
    """

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)


class ExplosionError(NumericalError):
    """A state became non-finite"""


class NumericalFailureError(NumericalError):
    """A covariance lost symmetry or positivity beyond tolerance"""


VALIDATION_ERRORS = (
    DimensionError,
    ContractError,
    InsufficientEnsembleError,
    ModelValidationError,
    UnsupportedVariantError,
)
