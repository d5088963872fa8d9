"""Exception types shared across the package."""


class SpikeVortexError(Exception):
    """Base class for all package errors."""


class MeshError(SpikeVortexError):
    """Invalid mesh construction or use (too few nodes, bad grading)."""


class MeshMismatchError(MeshError):
    """Two fields that must share a mesh do not."""


class NaNInputError(SpikeVortexError):
    """Non-finite samples fed to a quadrature or norm."""


class InsufficientWindowError(SpikeVortexError):
    """Fit window contains too few nodes (or grid points)."""


class NoBracketError(SpikeVortexError):
    """Shooting bisection failed to bracket the ground state."""


class NonconvergenceError(SpikeVortexError):
    """Iterative solver stopped above tolerance."""

    def __init__(self, message, last_iterate=None, history=None):
        super().__init__(message)
        self.last_iterate = last_iterate
        self.history = history or []


class DivergedError(NonconvergenceError):
    """Damped Newton exhausted its step budget."""


class StallError(NonconvergenceError):
    """Descent stalled above tolerance; carries the last iterate."""


class SingularJacobianError(SpikeVortexError):
    """Jacobian factorization failed (possible bifurcation crossing)."""


class ZeroDenominatorError(SpikeVortexError):
    """Projection denominator (e.g. integral of u^4) vanished."""


class BoundaryViolationError(SpikeVortexError):
    """State violates required boundary data beyond tolerance."""


class InvalidRadiusError(SpikeVortexError):
    """Polygon radius must be positive."""


class CoreExclusionError(SpikeVortexError):
    """Phase extraction requested inside the vortex core exclusion zone."""


class NoRootError(SpikeVortexError):
    """Balance equation has no root on the large-l branch."""


class NoSignChangeError(SpikeVortexError):
    """Reduced force does not change sign over the bracket."""


class NondegeneracyError(SpikeVortexError):
    """Bordered/projected linear system is numerically singular."""


class InsufficientDataError(SpikeVortexError):
    """Not enough grid points for the requested fit."""


class ConfigError(SpikeVortexError):
    """Malformed experiment configuration."""
