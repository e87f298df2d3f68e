"""Value types for the n-resolved ladder, the reduced dot state and P(n, t)."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = ["NResolvedState", "ReducedState", "CountingDistribution"]


@dataclass
class NResolvedState:
    """Density-matrix blocks conditioned on ``n`` collector electrons.

    Stored struct-of-arrays: ``s11[n]``, ``s22[n]`` (real) and ``s12[n]``
    (complex).  ``s21`` is the conjugate of ``s12`` and is never stored.
    ``leaked`` is the mass that has flowed past block ``n_max``.
    """

    s11: np.ndarray
    s22: np.ndarray
    s12: np.ndarray
    t: float = 0.0
    leaked: float = 0.0

    def __post_init__(self) -> None:
        self.s11 = np.asarray(self.s11, dtype=float)
        self.s22 = np.asarray(self.s22, dtype=float)
        self.s12 = np.asarray(self.s12, dtype=complex)
        if not (self.s11.shape == self.s22.shape == self.s12.shape) or self.s11.ndim != 1:
            raise ValueError("s11, s22 and s12 must be 1-d arrays of equal length")

    @classmethod
    def zeros(cls, n_max: int, t: float = 0.0) -> "NResolvedState":
        n = n_max + 1
        return cls(np.zeros(n), np.zeros(n), np.zeros(n, dtype=complex), t=t)

    @property
    def n_max(self) -> int:
        return self.s11.size - 1

    def trace(self) -> float:
        """Total probability including the leaked mass."""
        return float(self.s11.sum() + self.s22.sum()) + self.leaked

    def reduced(self) -> "ReducedState":
        """Trace out the collector count."""
        return ReducedState(s11=float(self.s11.sum()), s12=complex(self.s12.sum()), t=self.t)

    def mean_n(self) -> float:
        n = np.arange(self.s11.size)
        return float(np.dot(n, self.s11 + self.s22))

    def copy(self) -> "NResolvedState":
        return NResolvedState(self.s11.copy(), self.s22.copy(), self.s12.copy(),
                              t=self.t, leaked=self.leaked)

    def grown(self, n_max: int) -> "NResolvedState":
        """Copy padded with empty blocks up to ``n_max``."""
        if n_max <= self.n_max:
            return self.copy()
        pad = n_max - self.n_max
        return NResolvedState(
            np.concatenate([self.s11, np.zeros(pad)]),
            np.concatenate([self.s22, np.zeros(pad)]),
            np.concatenate([self.s12, np.zeros(pad, dtype=complex)]),
            t=self.t,
            leaked=self.leaked,
        )

    def to_real(self) -> np.ndarray:
        """``(4, n_max + 1)`` array with rows s11, s22, Re s12, Im s12."""
        return np.stack([self.s11, self.s22, self.s12.real, self.s12.imag])

    @classmethod
    def from_real(cls, arr: np.ndarray, t: float, leaked: float) -> "NResolvedState":
        return cls(arr[0].copy(), arr[1].copy(), arr[2] + 1j * arr[3], t=t, leaked=leaked)


@dataclass
class ReducedState:
    """Dot density matrix after tracing out the detector; ``s22 = 1 - s11``."""

    s11: float
    s12: complex = 0.0j
    t: float = 0.0

    @property
    def s22(self) -> float:
        return 1.0 - self.s11

    def positivity_gap(self) -> float:
        """``s11 s22 - |s12|^2``; negative means an unphysical state."""
        return self.s11 * self.s22 - abs(self.s12) ** 2

    def matrix(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [np.conj(self.s12), self.s22]])


@dataclass
class CountingDistribution:
    """``P(n, t)`` over collector electrons at a single time."""

    t: float
    p: np.ndarray
    leaked: float = 0.0
    n: np.ndarray = field(init=False, repr=False)

    def __post_init__(self) -> None:
        self.p = np.asarray(self.p, dtype=float)
        self.n = np.arange(self.p.size)

    def mean(self) -> float:
        return float(np.dot(self.n, self.p) / self.p.sum())

    def variance(self) -> float:
        mu = self.mean()
        return float(np.dot((self.n - mu) ** 2, self.p) / self.p.sum())

    def mass(self, mask: np.ndarray) -> float:
        return float(self.p[mask].sum())
