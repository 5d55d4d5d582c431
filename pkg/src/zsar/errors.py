"""Exception taxonomy shared across the package.

Every error raised by zsar code derives from ZsarError so callers can catch
the whole family; CLI maps them to nonzero exit codes with the message.
"""


class ZsarError(Exception):
    """Base class for all package errors."""


class MalformedInputError(ZsarError, ValueError):
    """Input violates a documented precondition (empty text, bad shape)."""


class DegenerateEmbeddingError(ZsarError, ArithmeticError):
    """A projection produced a numerically zero vector; cannot normalize."""


class InvalidArgumentError(ZsarError, ValueError):
    """An argument is outside its valid range (e.g. k larger than class count)."""


class InvalidLabelError(ZsarError, ValueError):
    """A label row has no positive entry where a loss requires one."""


class InvalidDatasetError(ZsarError, ValueError):
    """Dataset fails a structural requirement (e.g. a class with no samples)."""


class NonFiniteLossError(ZsarError, ArithmeticError):
    """Training encountered a non-finite loss; carries a diagnostic snapshot."""

    def __init__(self, message: str, snapshot: dict | None = None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class ManifestVersionError(ZsarError):
    """Manifest or feature file was written by an incompatible version."""


class TruncatedPayloadError(ZsarError):
    """Feature file is shorter than its header claims."""


class ChecksumError(ZsarError):
    """Stored checksum does not match the payload."""


class SplitLeakageError(ZsarError):
    """A split spec shares classes between seen and unseen partitions."""


class IncompleteExportError(ZsarError):
    """Export requested while classes are still pending annotation."""


class DependencyError(ZsarError):
    """A required artifact (checkpoint, manifest, split file) is missing."""


class ConfigError(ZsarError, ValueError):
    """Configuration file or override could not be parsed or has unknown keys."""


class NumericError(ZsarError, ArithmeticError):
    """A linear solve or factorization failed; message carries diagnostics."""


class CrawlError(ZsarError):
    """All candidate sources were unreachable; retryable."""


class TruncationWarning(UserWarning):
    """Token sequence exceeded the encoder window and was truncated."""
