"""Exception types shared across the package."""


class GridcastError(Exception):
    """Base class for all gridcast errors."""


# --- datastore ---

class DuplicateTimestamp(GridcastError):
    pass


class GapTooLarge(GridcastError):
    pass


class NotFound(GridcastError):
    pass


class AlignmentError(GridcastError):
    pass


class ConflictError(GridcastError):
    pass


class ConfigError(GridcastError):
    pass


class RepositoryError(GridcastError):
    pass


# --- numerics / model ---

class ShapeError(GridcastError):
    pass


class StateError(GridcastError):
    pass


class EmptyData(GridcastError):
    pass


class InsufficientData(GridcastError):
    pass


class VarianceError(GridcastError):
    pass


class DivergenceError(GridcastError):
    def __init__(self, message: str, epoch: int):
        super().__init__(message)
        self.epoch = epoch


class SingularError(GridcastError):
    pass


class DomainError(GridcastError):
    pass


class NothingToLearn(GridcastError):
    """Raised when an AL cycle finds no new complete windows. Reported, not fatal."""


class ModelFormatError(GridcastError):
    """Unreadable or newer-versioned model file."""


class ScaleWarning(UserWarning):
    """Inference inputs look unscaled (far outside the fitted [0, 1] range)."""
