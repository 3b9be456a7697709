"""Exception types shared across the package."""


class VortexmfError(Exception):
    """Base class for all package errors."""


class SingularEvaluation(VortexmfError):
    """An unregularized singular kernel was evaluated at (or hit) the origin."""


class DomainMismatch(VortexmfError):
    """A point lies outside the declared periodic box."""


class UnsupportedFamily(VortexmfError):
    """The requested analysis has no analytic formula for this kernel family."""


class CutoffViolation(VortexmfError):
    """Cell-list cutoff is below the kernel's declared decay radius."""


class NonFinite(VortexmfError):
    """A state acquired NaN or Inf coordinates."""


class FileFormat(VortexmfError):
    """An input file does not match the expected layout."""


class GridTooCoarse(VortexmfError):
    """KDE bandwidth is too small for the target grid resolution."""


class NegativeDensity(VortexmfError):
    """A density grid expected to be nonnegative has significantly negative values."""


class TooLarge(VortexmfError):
    """Enumeration requested beyond the supported size."""


class CflViolation(VortexmfError):
    """Advective CFL bound violated by the requested time step."""


class ConfigError(VortexmfError):
    """A configuration file failed validation."""
