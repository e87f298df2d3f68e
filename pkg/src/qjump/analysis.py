"""Analytic counting laws, the Zeno relaxation fit and steady-state checks."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.optimize import least_squares
from scipy.special import gammaln

from .engine import _reduced_rhs, evolve_reduced
from .errors import ConfigError, FitError
from .model import ModelParams
from .state import ReducedState

__all__ = [
    "gaussian_counting",
    "gaussian_lattice",
    "poisson_pmf",
    "total_variation",
    "RelaxationFit",
    "fit_zeno_time",
    "steady_state",
    "steady_state_check",
    "reduced_derivative",
]


def gaussian_counting(n, t: float, d1: float):
    """Large-count density ``(2 pi D1 t)^-1/2 exp(-(D1 t - n)^2 / (2 D1 t))``."""
    if not t > 0.0:
        raise ConfigError(f"t must be positive, got {t!r}")
    if not d1 > 0.0:
        raise ConfigError(f"d1 must be positive, got {d1!r}")
    mu = d1 * t
    n = np.asarray(n, dtype=float)
    out = np.exp(-((mu - n) ** 2) / (2.0 * mu)) / math.sqrt(2.0 * math.pi * mu)
    return float(out) if out.ndim == 0 else out


def gaussian_lattice(n_max: int, t: float, d1: float) -> np.ndarray:
    """:func:`gaussian_counting` on ``n = 0..n_max`` renormalized to unit mass."""
    p = gaussian_counting(np.arange(n_max + 1), t, d1)
    return p / p.sum()


def poisson_pmf(n_max: int, mu: float) -> np.ndarray:
    n = np.arange(n_max + 1)
    if mu == 0.0:
        return (n == 0).astype(float)
    return np.exp(n * math.log(mu) - mu - gammaln(n + 1))


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Half the l1 distance; the shorter input is zero-padded."""
    size = max(len(p), len(q))
    pp = np.zeros(size)
    qq = np.zeros(size)
    pp[:len(p)] = p
    qq[:len(q)] = q
    return 0.5 * float(np.abs(pp - qq).sum())


@dataclass(frozen=True)
class RelaxationFit:
    t0_fit: float
    t0_formula: float
    residual: float

    @property
    def ratio(self) -> float:
        return self.t0_fit / self.t0_formula


def fit_zeno_time(series: Sequence[ReducedState], params: ModelParams) -> RelaxationFit:
    """Fit ``s11(t) = 1/2 + exp(-t / t0) / 2`` to a left-localized relaxation.

    ``residual`` is the RMS misfit of ``s11``.

    Raises
    ------
    ConfigError
        The series is shorter than five formula times or the coupling is
        outside the overdamped regime ``d1 >= 8 omega0``.
    FitError
        The data do not decay monotonically or the optimizer fails.
    """
    if params.omega0 <= 0.0 or params.d1 < 8.0 * params.omega0:
        raise ConfigError("Zeno fit needs omega0 > 0 and d1 >= 8*omega0")
    t = np.array([s.t for s in series], dtype=float)
    s11 = np.array([s.s11 for s in series], dtype=float)
    t0_formula = params.zeno_time
    if t.size < 3 or t[-1] - t[0] < 5.0 * t0_formula * (1.0 - 1e-9):
        raise ConfigError("series must span at least five formula relaxation times")
    if np.any(np.diff(s11) > 1e-9) or s11[-1] >= s11[0]:
        raise FitError("s11(t) is not a monotone decay")

    def resid(p):
        return 0.5 + 0.5 * np.exp(-(t - t[0]) / p[0]) - s11

    res = least_squares(resid, x0=[t0_formula], bounds=([1e-12 * t0_formula], [np.inf]))
    if not res.success:
        raise FitError(f"least-squares fit failed: {res.message}")
    return RelaxationFit(t0_fit=float(res.x[0]), t0_formula=t0_formula,
                         residual=float(np.sqrt(np.mean(res.fun ** 2))))


def _steady_time(params: ModelParams) -> float:
    return 20.0 * max(params.zeno_time, 1.0 / params.omega0)


def steady_state(params: ModelParams, initial: ReducedState | None = None,
                 t_end: float | None = None, dt: float | None = None) -> ReducedState:
    """Long-time reduced state, integrated to ``20 * max(t0, 1/omega0)`` by default."""
    if params.omega0 <= 0.0 or params.d1 <= 0.0:
        raise ConfigError("steady state needs omega0 > 0 and d1 > 0")
    initial = ReducedState(1.0) if initial is None else initial
    t_end = _steady_time(params) if t_end is None else t_end
    return evolve_reduced(initial, params, t_end, params.stable_dt() if dt is None else dt)


def steady_state_check(params: ModelParams, initial: ReducedState | None = None,
                       t_end: float | None = None) -> float:
    """``max(|s11 - 1/2|, |s12|)`` after long-time integration."""
    final = steady_state(params, initial, t_end)
    return max(abs(final.s11 - 0.5), abs(final.s12))


def reduced_derivative(state: ReducedState, params: ModelParams) -> float:
    """Max-norm of ``(ds11/dt, ds12/dt)`` at ``state``."""
    a, b, c = _reduced_rhs(state.s11, state.s12.real, state.s12.imag,
                           params.d1, params.omega0, params.epsilon)
    return max(abs(a), math.hypot(b, c))
