"""Exception hierarchy shared by every module."""


class RenyiLabError(Exception):
    """Base class for all library errors."""


class ValidationError(RenyiLabError, ValueError):
    """Input failed a precondition (normalization, grid mismatch, bad parameter)."""


class TailMassError(ValidationError):
    """Quantization would discard more probability mass than allowed."""

    def __init__(self, lost_mass, tolerance):
        self.lost_mass = float(lost_mass)
        self.tolerance = float(tolerance)
        super().__init__(
            f"truncation discards mass {self.lost_mass:.6g} > tolerance {self.tolerance:.3g}"
        )


class InfeasibleError(RenyiLabError):
    """No density satisfies the cost constraint."""


class BracketError(RenyiLabError):
    """The dual bisection could not bracket a root."""


class ConstructionError(RenyiLabError):
    """A block or process could not be constructed as requested."""

    def __init__(self, message, achieved=None):
        self.achieved = achieved
        super().__init__(message)


class SamplingError(RenyiLabError):
    """A sampler starved (acceptance too low)."""


class ModeError(RenyiLabError):
    """An operation needs exact (enumerate-mode) statistics that are unavailable."""


class NotPositiveDefiniteError(ValidationError):
    """An autocovariance Toeplitz matrix is not positive definite."""


class InstabilityError(RenyiLabError):
    """A simulated recursion blew past the overflow guard."""
