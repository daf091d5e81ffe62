"""Exception types shared across the package.

The CLI maps these onto process exit codes: configuration problems
exit 2, solver failures exit 3, safety-line violations exit 4.
"""


class SoftcrawlError(Exception):
    """Base class for all package errors."""


class ConfigError(SoftcrawlError):
    """Invalid configuration, scenario file, or input data."""


class ShapeSolveError(SoftcrawlError):
    """The contact solver failed to converge or factorize."""


class UnboundedShapeError(ShapeSolveError):
    """Free-shape solve requested with distributed weight present."""


class OptimizerError(SoftcrawlError):
    """Voltage optimization failed (degenerate loss or GP breakdown)."""


class SafetyViolationError(SoftcrawlError):
    """An executed posture crossed the safety line."""
