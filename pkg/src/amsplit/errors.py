class AmsError(Exception):
    """Base class for amsplit errors."""


class ConfigError(AmsError, ValueError):
    """Invalid model, run or experiment configuration."""


class DegenerateConditioningError(AmsError, ValueError):
    """Conditioning on an event of probability zero."""


class InfiniteLambdaError(AmsError, ValueError):
    """Cumulative hazard evaluated at or beyond the essential supremum."""


class RunawayError(AmsError, RuntimeError):
    """An AMS run exceeded its iteration cap."""


class ConditioningError(AmsError, ArithmeticError):
    """Spectral system too close to singular (near-coincident roots)."""


class ConvergenceError(AmsError, ArithmeticError):
    """A root finder or grid refinement failed to converge."""
