"""Error hierarchy for Lattice Spectra.

Every error derives from :class:`SpectralError` and carries the exit code the
command-line front-end maps it to.
"""
from typing import Any, Dict, Optional


class SpectralError(Exception):
    """Base class for all library errors."""

    exit_code: int = 1


class ConfigParseError(SpectralError, ValueError):
    """A model file could not be parsed.

    Attributes:
        path: File being parsed.
        line: 1-based line number the problem was detected at.
    """

    exit_code = 2

    def __init__(self, message: str, path: str = "<string>", line: int = 0) -> None:
        self.path = path
        self.line = line
        super().__init__(f"{path}:{line}: {message}")


class ModelValidationError(SpectralError, ValueError):
    """A coefficient table violates a model hypothesis.

    Attributes:
        subject: What was validated, e.g. ``"dispersion 1"``.
        clause: Name of the failed clause, e.g. ``"dispersion.sign"``.
    """

    exit_code = 2

    def __init__(self, subject: str, clause: str, detail: str = "") -> None:
        self.subject = subject
        self.clause = clause
        message = f"{subject} fails {clause}"
        if detail:
            message += f": {detail}"
        super().__init__(message)


class InvalidResolutionError(SpectralError, ValueError):
    exit_code = 2


class InvalidMassError(SpectralError, ValueError):
    exit_code = 2


class DegenerateDispersionError(SpectralError, ValueError):
    exit_code = 2


class PreconditionError(SpectralError, ValueError):
    """An operation was called outside its documented domain."""

    exit_code = 3


class NotOnFiberError(PreconditionError):
    pass


class OutOfDomainError(PreconditionError):
    pass


class SingularDenominatorError(PreconditionError):
    pass


class IncompatibleDiscretizationError(PreconditionError):
    pass


class ChannelSpectrumError(PreconditionError):
    """The spectral parameter lies in (or on) a channel spectrum."""


class NumericalFailureError(SpectralError, ArithmeticError):
    """A numerical routine failed to converge.

    Attributes:
        diagnostics: Iteration counts, residuals and similar details.
    """

    exit_code = 4

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None) -> None:
        self.diagnostics: Dict[str, Any] = dict(diagnostics or {})
        if self.diagnostics:
            details = ", ".join(f"{key}={value}" for key, value in sorted(self.diagnostics.items()))
            message = f"{message} ({details})"
        super().__init__(message)
