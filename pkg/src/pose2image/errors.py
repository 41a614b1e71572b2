"""Exception hierarchy shared across the package.

Everything raised on purpose derives from :class:`P2IError` so CLI and
service layers can map failures to exit codes / HTTP statuses in one place.
"""


class P2IError(Exception):
    """Base class for all errors raised by pose2image."""


class InvalidPoseError(P2IError):
    """Degenerate or malformed camera pose (e.g. zero-norm quaternion)."""


class InvalidBoundsError(P2IError):
    """Scene bounds with non-positive extent or otherwise unusable."""


class InvalidParamsError(P2IError):
    """Bad arguments to a constructive operation (trajectories, ranges)."""


class DataFormatError(P2IError):
    """Dataset on disk is missing files or violates the layout contract."""


class SplitError(P2IError):
    """A train/test split cannot be built as requested."""


class ConfigError(P2IError):
    """Network/trainer configuration inconsistent with data or checkpoint."""


class CheckpointError(P2IError):
    """Checkpoint directory is missing, corrupt, or mismatched."""


class TrainingStateError(P2IError):
    """Operation requires a different training phase than the bundle has."""


class TrainingDiverged(P2IError):
    """Non-finite loss encountered; carries a diagnostic payload."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class MetricError(P2IError):
    """Metric inputs are malformed (shape mismatch, too small, empty)."""
