"""Exception types shared across the package."""


class GenerationError(RuntimeError):
    """Raised when rejection sampling of a coefficient field exhausts its attempt cap."""

    def __init__(self, message, hyperparams=None):
        super().__init__(message)
        self.hyperparams = hyperparams


class SingularSystemError(RuntimeError):
    """Raised when an elimination pivot falls below the representable floor."""


class ResourceLimitError(RuntimeError):
    """Raised when a solve would exceed the configured memory cap."""


class TrainingFailure(RuntimeError):
    """Raised when training produces a non-finite loss; carries the last good checkpoint."""

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class PartialReportError(RuntimeError):
    """Raised when a sensitivity evaluator fails on some inputs; lists the failures."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class StoreError(RuntimeError):
    """Base class for persistence failures."""


class UnsupportedFormatError(StoreError):
    """Magic or format version not recognized."""


class CorruptDataError(StoreError):
    """Truncated payload or checksum mismatch in a dataset file."""


class CorruptCheckpointError(StoreError):
    """Truncated payload or checksum mismatch in a checkpoint file."""
