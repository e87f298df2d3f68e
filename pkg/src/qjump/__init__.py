"""Continuous measurement of a double-dot electron by a point-contact detector."""

from .errors import (ConfigError, FitError, NumericalError, QJumpError, StepTooLargeError,
                     TruncationOverflowError)
from .model import (DetectorParams, ICKind, InitialCondition, ModelParams, derive_rate,
                    make_initial_state)
from .state import CountingDistribution, NResolvedState, ReducedState

__version__ = "0.1.0"
