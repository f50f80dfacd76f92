"""Exception hierarchy shared by every subsystem.

Exit-code mapping used by the CLI: usage/config/dimension problems exit 1,
malformed files exit 2, numerical failures (divergence, degenerate inputs,
non-convergence) exit 3.
"""


class MochaError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class UsageError(MochaError):
    """A call violated an API contract (bad arguments, missing prerequisite)."""

    exit_code = 1


class ConfigError(MochaError):
    """Run configuration is invalid (unknown key, bad value, bad combination)."""

    exit_code = 1


class DimensionError(MochaError):
    """Tensor shapes violate an operation's contract."""

    exit_code = 1


class FormatError(MochaError):
    """A file on disk is malformed. Carries the byte offset when known."""

    exit_code = 2

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class NumericalError(MochaError):
    """A numerical procedure failed (NaN loss, non-convergence)."""

    exit_code = 3


class DegenerateInputError(MochaError):
    """Input is degenerate for the requested statistic (e.g. zero variance)."""

    exit_code = 3
