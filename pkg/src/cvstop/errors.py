"""Exception types raised across the package.

Each error carries enough context to locate the failure (a field name, a
state, a draw index). The command line maps ``ConfigError`` and
``CertificateError`` to exit code 2 and every other ``CvstopError`` to 3.
"""


class CvstopError(Exception):
    """Base class for package errors."""


class ConfigError(CvstopError):
    """Invalid configuration, parameter or argument value."""


class InputError(ConfigError):
    """Malformed numeric input such as NaN states or bad shapes."""


class CertificateError(ConfigError):
    """A drift certificate is invalid or no certificate exists for the parameters."""


class EvaluationError(CvstopError):
    """A payoff or integrand produced a non-finite value."""


class NoThresholdError(CvstopError):
    """No reservation threshold exists inside the expanded bracket."""


class BoundaryDerivativeError(CvstopError):
    """A central difference was requested at a boundary node."""


class DiagnosticUnavailable(CvstopError):
    """Too few or degenerate iterates to form a diagnostic."""


class PosteriorError(InputError):
    """A belief update received an impossible prior or likelihood."""
