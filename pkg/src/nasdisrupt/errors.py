"""Exception types shared across the pipeline.

Each carries the process exit code the CLI reports when it escapes a stage.
"""


class PipelineError(Exception):
    exit_code = 1


class ConfigError(PipelineError, ValueError):
    exit_code = 2


class DataError(PipelineError, ValueError):
    exit_code = 3


class NumericError(PipelineError, ArithmeticError):
    exit_code = 4


class StageError(PipelineError):
    """A failure inside a named pipeline stage."""

    def __init__(self, stage, cause):
        self.stage = stage
        self.cause = cause
        self.exit_code = getattr(cause, "exit_code", 3)
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
