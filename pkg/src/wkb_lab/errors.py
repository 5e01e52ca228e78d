"""Exception types shared across the package."""


class WkbLabError(Exception):
    """Base class for all package-specific errors."""


class NonFinite(WkbLabError):
    """A numerical quantity became NaN or infinite."""


class StepUnderflow(WkbLabError):
    """Adaptive integrator needed a step below the representable minimum."""


class VersionMismatch(WkbLabError):
    """Checkpoint file has an unsupported format version."""


class CorruptFile(WkbLabError):
    """Checkpoint or data file failed structural validation."""


class ArchitectureMismatch(WkbLabError):
    """Checkpoint layer widths do not chain into a valid network."""


class ParseError(WkbLabError):
    """Text file could not be parsed; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SizeMismatch(WkbLabError):
    """Two point clouds that must have equal size do not."""


class ConfigError(WkbLabError):
    """Run-configuration file is malformed or out of range."""
