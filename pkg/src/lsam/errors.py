"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid parameters or a violated step-size cap."""


class DivergedPartitionError(ArithmeticError):
    """A partition function estimate is infinite or the grid misses the mass."""


class ChainDivergenceError(ArithmeticError):
    """A sampler or optimizer left the confinement ball or produced NaN/Inf."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ProtocolError(RuntimeError):
    """Sync protocol of the distributed runtime was violated."""


class SamplerHealthWarning(UserWarning):
    """MALA acceptance rate outside the healthy band."""
