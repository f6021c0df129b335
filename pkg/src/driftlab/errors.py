"""Exception types shared across the package.

The CLI maps these onto process exit codes, so keep the hierarchy flat
and the names aligned with the failure they report.
"""


class DriftLabError(Exception):
    """Base class for all package-specific failures."""


class ConfigError(DriftLabError):
    """Malformed or inconsistent experiment configuration."""


class QuadratureError(DriftLabError):
    """Adaptive quadrature failed to converge to the requested tolerance."""


class Condition1Violated(DriftLabError):
    """No positive certificate gap: the forcing admits no isolated minimum.

    Carries the offending frequencies and the certificates computed so far
    so callers can report how far the scan got.
    """

    def __init__(self, message, omegas=None, certificates=None):
        super().__init__(message)
        self.omegas = list(omegas) if omegas is not None else []
        self.certificates = list(certificates) if certificates is not None else []


class MinimumOnBoundary(DriftLabError):
    """Junction search found no interior minimum of the glued action."""


class SolverDidNotConverge(DriftLabError):
    """Descent ran out of its iteration budget before reaching tolerance."""

    def __init__(self, message, iterations=None, grad_max=None):
        super().__init__(message)
        self.iterations = iterations
        self.grad_max = grad_max


class IntegrationError(DriftLabError):
    """Time integration blew up or the stepper reported failure."""


class ChainAborted(DriftLabError):
    """A transition inside a diffusion chain failed; partial report attached."""

    def __init__(self, message, partial_report=None, cause=None):
        super().__init__(message)
        self.partial_report = partial_report
        self.cause = cause
