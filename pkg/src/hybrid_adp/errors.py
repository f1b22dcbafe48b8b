"""Exception hierarchy shared by the library and the command-line front end."""


class AdpError(Exception):
    """Base class for all library errors."""


class UsageError(AdpError, ValueError):
    """Bad arguments: dimension mismatches, empty inputs, out-of-range values."""


class ConfigurationError(AdpError):
    """An experiment or closed-loop configuration is inconsistent."""


class CertificateRequired(AdpError):
    """An operation needs a positive data-richness level and did not get one."""


class DiagnosticUnavailable(AdpError):
    """A diagnostic needs a reference solution that was not supplied."""


class NumericalFailure(AdpError, ArithmeticError):
    """Integration produced non-finite values.

    ``stamp`` holds the last hybrid time ``(t, j)`` at which the state was
    still finite, when known.
    """

    def __init__(self, message, stamp=None):
        super().__init__(message)
        self.stamp = stamp


class ValidationFailed(AdpError):
    """Tuning or data certification did not pass and the caller did not force the run."""
