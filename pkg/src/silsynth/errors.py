"""Exception types shared across the toolkit.

Every error raised by silsynth derives from :class:`SilsynthError` and
carries a short machine-parseable ``code`` used by the CLI and the HTTP
service when mapping failures to exit codes and status codes.
"""


class SilsynthError(Exception):
    """Base class for all toolkit errors."""

    code = "error"


class AudioIoError(SilsynthError):
    code = "audio-io"


class SilhouetteError(SilsynthError):
    code = "silhouette"


class FormatError(SilsynthError):
    """Malformed or invariant-violating serialized document."""

    code = "format"

    def __init__(self, message: str, frame_index: int | None = None):
        super().__init__(message)
        self.frame_index = frame_index


class FeatureError(SilsynthError):
    code = "features"


class ModelError(SilsynthError):
    code = "model"


class CheckpointError(SilsynthError):
    code = "checkpoint"


class ConfigError(SilsynthError):
    code = "config"


class TrainingError(SilsynthError):
    code = "training"


class EvaluationError(SilsynthError):
    code = "evaluation"
