"""Exception hierarchy shared by the simulator, the checkers and the CLI."""


class QGErgoError(Exception):
    """Base class; ``category`` is the machine-readable tag used by the CLI."""

    category = "error"


class DomainError(QGErgoError, ValueError):
    category = "domain_error"


class TruncationMismatchError(QGErgoError, ValueError):
    category = "truncation_mismatch"


class InsufficientSamplesError(QGErgoError, ValueError):
    category = "insufficient_samples"


class GridMismatchError(QGErgoError, ValueError):
    category = "grid_mismatch"


class InstabilityError(QGErgoError, FloatingPointError):
    """Raised when the coefficient norm leaves the configured envelope."""

    category = "instability"

    def __init__(self, message, *, t=None, mode=None, member=None):
        super().__init__(message)
        self.t = t
        self.mode = mode
        self.member = member


class TheoremConditionError(QGErgoError):
    """Noise does not meet a hypothesis of the uniqueness theorem."""

    def __init__(self, message, failed=(), root=None):
        super().__init__(message)
        self.failed = tuple(failed)
        self.root = tuple(failed if root is None else root)

    @property
    def category(self):
        return "theorem_condition_failed:" + ",".join(self.root)


class ConfigError(QGErgoError, ValueError):
    category = "config_error"


class ConfigParseError(ConfigError):
    category = "config_parse_error"

    def __init__(self, message, line=None, column=None):
        super().__init__(message)
        self.line = line
        self.column = column


class CheckpointError(QGErgoError, ValueError):
    category = "checkpoint_error"


class BadMagicError(CheckpointError):
    category = "checkpoint_bad_magic"


class VersionMismatchError(CheckpointError):
    category = "checkpoint_version_mismatch"


class TruncatedPayloadError(CheckpointError):
    category = "checkpoint_truncated"
