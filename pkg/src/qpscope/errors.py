"""Exception hierarchy shared across the toolkit.

The CLI maps these onto process exit codes, so analysis code should raise
the most specific class that applies.
"""


class QpscopeError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(QpscopeError, ValueError):
    """Invalid parameter values or malformed inputs."""


class ConfigError(QpscopeError):
    """Bad experiment configuration (missing file, unknown keys, bad schema).

    ``kind`` is a short machine-readable class, e.g. ``"config-not-found"``.
    """

    def __init__(self, message, kind="config-invalid"):
        super().__init__(message)
        self.kind = kind


class SolverError(QpscopeError):
    """An eigensolver or linear solver failed to produce a usable result."""


class DegenerateModelError(SolverError):
    """Rate model whose stationary state is not unique."""


class CalibrationError(QpscopeError):
    """Root-finding for a calibration target failed; carries the bracket."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class FitError(QpscopeError):
    """Nonlinear fit did not converge; carries the last iterate."""

    def __init__(self, message, last_iterate=None, n_iter=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.n_iter = n_iter


class NoDipError(FitError):
    """Resonance fit requested on data with no discernible dip."""


class RejectionError(QpscopeError):
    """Data rejected by a quality gate (e.g. parity splitting too small)."""


class InsufficientStatisticsError(QpscopeError):
    """Too few events to form the requested estimate."""

    def __init__(self, message, counts=None):
        super().__init__(message)
        self.counts = counts
