"""Exception types shared across the package."""


class ImmcError(Exception):
    """Base class for all errors raised by this package."""


class CorpusFormatError(ImmcError):
    """A corpus file could not be parsed.

    Carries the 1-based line number of the offending record when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class EmptyCorpusError(ImmcError):
    """A corpus contained no sequences."""


class EmptySequenceError(ImmcError):
    """A sequence contained no events."""


class AlphabetMismatchError(ImmcError):
    """Two artifacts disagree about the observation alphabet."""


class ModelFormatError(ImmcError):
    """A model file is malformed."""


class ModelVersionError(ModelFormatError):
    """A model file declares an unsupported format version."""


class DegenerateModelError(ImmcError):
    """Sampling hit an all-zero or non-finite probability row.

    This signals degenerate parameters (for example a transition row that
    assigns zero mass to every admissible continuation) rather than a
    recoverable numerical hiccup, so the sampler aborts with context instead
    of silently renormalizing.
    """


class ConfigError(ImmcError):
    """A CLI config file could not be parsed."""
