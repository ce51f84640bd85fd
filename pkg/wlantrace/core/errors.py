class TraceError(Exception):
    """Base class for errors raised by wlantrace"""


class ConfigError(TraceError, ValueError):
    """A config value is missing, malformed or out of range"""


class LogFileError(TraceError, OSError):
    """An input file could not be opened or read"""


class InsufficientDataError(TraceError, ValueError):
    """The trajectory store does not cover the requested span"""


class StageError(TraceError):
    """A pipeline stage failed; carries the stage name"""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")
