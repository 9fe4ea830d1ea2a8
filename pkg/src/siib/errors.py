"""Exception types shared by the pipeline and mapped to CLI exit codes."""


class SiibError(Exception):
    """Base class for all errors raised by this package."""


class AudioIOError(SiibError, OSError):
    """A file could not be opened, parsed, or written."""


class ValidationError(SiibError, ValueError):
    """Input data violates a precondition (too short, all silence, bad range)."""
