"""Exception hierarchy shared by the engine, trajectory runner and CLI."""


class QJumpError(Exception):
    """Base class for all simulator errors."""


class ConfigError(QJumpError, ValueError):
    """Invalid parameters or unparseable scenario configuration."""


class NumericalError(QJumpError, ArithmeticError):
    """Integration could not proceed with the requested settings."""


class StepTooLargeError(NumericalError):
    """Time step exceeds the stability bound of the fixed-step integrator."""


class TruncationOverflowError(NumericalError):
    """Probability mass beyond the n-ladder exceeds the leak budget."""


class FitError(NumericalError):
    """Relaxation-time fit failed or its input is not a monotone decay."""
