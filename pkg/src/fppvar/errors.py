"""Exception types raised across the toolkit."""


class FPPError(Exception):
    """Base class for toolkit errors."""


class ConfigurationError(FPPError, ValueError):
    """Invalid distribution, medium, window or job parameters."""


class BoundsError(FPPError, IndexError):
    """Lattice access outside an open-box window."""


class TopologyError(FPPError, ValueError):
    """Operation needs a different window topology (e.g. a torus)."""


class DomainTooSmallError(FPPError, RuntimeError):
    """A reachable set touched the window boundary, so the answer would be clipped."""


class ConvergenceError(FPPError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics


class BoundUnavailableError(FPPError, ValueError):
    """A bound whose hypotheses are not met (e.g. zero density floor)."""
