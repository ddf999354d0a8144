"""Exception types raised by splitmax."""


class SplitmaxError(Exception):
    """Base class for all library errors."""


class StencilError(SplitmaxError, ValueError):
    """A grid line is too short for the finite-difference stencils."""


class DimensionError(SplitmaxError, ValueError):
    """Operands live on different grids or have incompatible shapes."""


class BoundaryConsistencyError(SplitmaxError, ValueError):
    """A field violates the PEC trace conditions required by an operation."""


class ConfigurationError(SplitmaxError, ValueError):
    """Invalid experiment or noise configuration."""


class StatisticsError(SplitmaxError, ValueError):
    """Too few Monte Carlo samples for the requested estimate."""


class DegenerateFitError(SplitmaxError, ValueError):
    """Order fit requested on too few or non-positive error values."""
