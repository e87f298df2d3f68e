"""Physical parameters, unit conventions and initial-condition presets.

Units: hbar = e = 1.  Energies and rates share inverse-time units and a
detector current is a rate of electrons per unit time, so ``I1 == d1``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .state import NResolvedState

__all__ = [
    "DetectorParams",
    "ModelParams",
    "ICKind",
    "InitialCondition",
    "derive_rate",
    "make_initial_state",
]


@dataclass(frozen=True)
class DetectorParams:
    """Point-contact transmissions and bias ``mu_L - mu_R``.

    ``transmission_blocked`` is carried for completeness but must be zero:
    the contact is closed whenever the right dot is occupied.
    """

    transmission_open: float
    bias: float
    transmission_blocked: float = 0.0

    def __post_init__(self) -> None:
        for name in ("transmission_open", "transmission_blocked"):
            value = getattr(self, name)
            if not (0.0 <= value <= 1.0):
                raise ConfigError(f"{name} must lie in [0, 1], got {value!r}")
        if self.transmission_blocked > self.transmission_open:
            raise ConfigError("transmission_blocked cannot exceed transmission_open")
        if not self.bias > 0.0:
            raise ConfigError(f"bias must be positive, got {self.bias!r}")
        if self.transmission_blocked != 0.0:
            raise ConfigError("only a fully blocked contact (transmission_blocked=0) is modelled")


def derive_rate(d: DetectorParams) -> float:
    """Detector transfer rate ``T1 * (mu_L - mu_R) / (2 pi)``."""
    if not isinstance(d, DetectorParams):
        raise ConfigError("derive_rate expects DetectorParams")
    return d.transmission_open * d.bias / (2.0 * math.pi)


@dataclass(frozen=True)
class ModelParams:
    """Effective double-dot + detector parameters.

    Parameters
    ----------
    omega0 : float
        Interdot tunnel coupling (>= 0).
    epsilon : float
        Level detuning ``E2 - E1``.
    d1 : float
        Collector transfer rate while the left dot is occupied (>= 0).
    """

    omega0: float
    epsilon: float = 0.0
    d1: float = 1.0

    def __post_init__(self) -> None:
        for name in ("omega0", "epsilon", "d1"):
            if not math.isfinite(getattr(self, name)):
                raise ConfigError(f"{name} must be finite")
        if self.omega0 < 0.0:
            raise ConfigError(f"omega0 must be >= 0, got {self.omega0!r}")
        if self.d1 < 0.0:
            raise ConfigError(f"d1 must be >= 0, got {self.d1!r}")

    @classmethod
    def from_detector(cls, detector: DetectorParams, omega0: float,
                      epsilon: float = 0.0) -> "ModelParams":
        return cls(omega0=omega0, epsilon=epsilon, d1=derive_rate(detector))

    @property
    def zeno_time(self) -> float:
        """``d1 / (8 omega0**2)``; infinite without interdot coupling."""
        if self.omega0 == 0.0:
            return math.inf
        return self.d1 / (8.0 * self.omega0 ** 2)

    @property
    def max_rate(self) -> float:
        return max(self.d1, abs(self.epsilon), self.omega0, 1.0)

    def stable_dt(self) -> float:
        """Largest step admitted by the fixed-step integrators."""
        return 0.01 / self.max_rate


class ICKind(str, enum.Enum):
    LEFT_LOCALIZED = "LeftLocalized"
    RIGHT_LOCALIZED = "RightLocalized"
    EQUAL_MIXTURE = "EqualMixture"
    EQUAL_SUPERPOSITION = "EqualSuperposition"


@dataclass(frozen=True)
class InitialCondition:
    kind: ICKind
    n0: int = 0

    def __post_init__(self) -> None:
        try:
            kind = ICKind(self.kind)
        except ValueError:
            raise ConfigError(f"unknown initial condition {self.kind!r}") from None
        object.__setattr__(self, "kind", kind)
        if int(self.n0) != self.n0 or self.n0 < 0:
            raise ConfigError(f"n0 must be a nonnegative integer, got {self.n0!r}")
        object.__setattr__(self, "n0", int(self.n0))

    def block(self) -> tuple[float, float, complex]:
        """Dot density matrix ``(s11, s22, s12)`` of the preset."""
        return _BLOCKS[self.kind]


_BLOCKS = {
    ICKind.LEFT_LOCALIZED: (1.0, 0.0, 0.0j),
    ICKind.RIGHT_LOCALIZED: (0.0, 1.0, 0.0j),
    ICKind.EQUAL_MIXTURE: (0.5, 0.5, 0.0j),
    ICKind.EQUAL_SUPERPOSITION: (0.5, 0.5, 0.5 + 0.0j),
}


def make_initial_state(ic: InitialCondition, n_max: int) -> NResolvedState:
    """Ladder with all probability in block ``ic.n0`` at ``t = 0``."""
    if n_max < 0:
        raise ConfigError("n_max must be nonnegative")
    if ic.n0 > n_max:
        raise ConfigError(f"n0={ic.n0} exceeds n_max={n_max}")
    s11, s22, s12 = ic.block()
    state = NResolvedState.zeros(n_max)
    state.s11[ic.n0] = s11
    state.s22[ic.n0] = s22
    state.s12[ic.n0] = s12
    return state
