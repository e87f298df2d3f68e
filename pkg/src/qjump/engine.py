"""Integration of the n-resolved and reduced Bloch-type equations.

The ladder is advanced with fixed-step classical RK4 on a real
``(4, n_max + 1)`` array whose rows are ``s11, s22, Re s12, Im s12``.
With ``s21 = conj(s12)`` the coherent population term
``i*omega0*(s12 - s21)`` reduces to ``-2*omega0*Im s12``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numba
import numpy as np

from .errors import ConfigError, StepTooLargeError, TruncationOverflowError
from .linalg import expm
from .model import ModelParams
from .state import CountingDistribution, NResolvedState, ReducedState

__all__ = [
    "LEAK_BUDGET",
    "ORACLE_MAX_N",
    "CurrentSeries",
    "rhs_n_resolved",
    "required_n_max",
    "evolve",
    "evolve_history",
    "evolve_reduced",
    "reduced_history",
    "counting_distribution",
    "mean_current",
    "generator_matrix",
    "evolve_oracle",
]

LEAK_BUDGET = 1e-9
ORACLE_MAX_N = 64
N_MAX_CAP = 200_000


def _block_matrix(params: ModelParams) -> np.ndarray:
    """Per-block generator acting on ``(s11, s22, Re s12, Im s12)``.

    The collector transfer ``+d1 * s11[n-1]`` is the only inter-block term
    and is added separately.
    """
    d, w, e = params.d1, params.omega0, params.epsilon
    return np.array([
        [-d, 0.0, 0.0, -2.0 * w],
        [0.0, 0.0, 0.0, 2.0 * w],
        [0.0, 0.0, -0.5 * d, -e],
        [w, -w, e, -0.5 * d],
    ])


def _rhs(a: np.ndarray, y: np.ndarray, d1: float, out: np.ndarray) -> float:
    np.matmul(a, y, out=out)
    out[0, 1:] += d1 * y[0, :-1]
    return d1 * y[0, -1]


def rhs_n_resolved(state: NResolvedState, params: ModelParams) -> NResolvedState:
    """Time derivative of the ladder; the returned ``leaked`` is its rate."""
    y = state.to_real()
    out = np.empty_like(y)
    dleak = _rhs(_block_matrix(params), y, params.d1, out)
    return NResolvedState.from_real(out, t=state.t, leaked=dleak)


def _check_dt(params: ModelParams, dt: float) -> None:
    if not dt > 0.0:
        raise StepTooLargeError(f"dt must be positive, got {dt!r}")
    bound = params.stable_dt()
    if dt > bound * (1.0 + 1e-12):
        raise StepTooLargeError(f"dt={dt:g} exceeds the stability bound {bound:g}")


def required_n_max(state: NResolvedState, params: ModelParams, t_end: float) -> int:
    """Ladder size that keeps the leaked mass negligible up to ``t_end``.

    ``ceil(D1*t + 10*sqrt(D1*t) + 10)`` counted from the highest block
    that currently carries probability.
    """
    occupied = np.nonzero((state.s11 != 0.0) | (state.s22 != 0.0) | (state.s12 != 0.0))[0]
    top = int(occupied[-1]) if occupied.size else 0
    mu = params.d1 * max(t_end - state.t, 0.0)
    return max(state.n_max, top + math.ceil(mu + 10.0 * math.sqrt(mu) + 10.0))


def _prepare(state, params, t_end, grow, n_max_cap):
    if t_end < state.t:
        raise ConfigError(f"t_end={t_end!r} precedes the state time {state.t!r}")
    if grow:
        n_req = required_n_max(state, params, t_end)
        state = state.grown(min(n_req, max(n_max_cap, state.n_max)))
    return state


def _rk4(y: np.ndarray, leaked: float, params: ModelParams, h: float, n_steps: int) -> float:
    """Advance ``y`` in place; returns the updated leaked mass."""
    a = _block_matrix(params)
    d1 = params.d1
    k1 = np.empty_like(y)
    k2 = np.empty_like(y)
    k3 = np.empty_like(y)
    k4 = np.empty_like(y)
    tmp = np.empty_like(y)
    h2, h6 = 0.5 * h, h / 6.0
    for _ in range(n_steps):
        l1 = _rhs(a, y, d1, k1)
        np.multiply(k1, h2, out=tmp)
        tmp += y
        l2 = _rhs(a, tmp, d1, k2)
        np.multiply(k2, h2, out=tmp)
        tmp += y
        l3 = _rhs(a, tmp, d1, k3)
        np.multiply(k3, h, out=tmp)
        tmp += y
        l4 = _rhs(a, tmp, d1, k4)
        k2 += k3
        k2 *= 2.0
        k2 += k1
        k2 += k4
        k2 *= h6
        y += k2
        leaked += h6 * (l1 + 2.0 * (l2 + l3) + l4)
    return leaked


def _steps(span: float, dt: float) -> tuple[int, float]:
    if span <= 0.0:
        return 0, 0.0
    n = max(1, math.ceil(span / dt - 1e-9))
    return n, span / n


def evolve(
    state: NResolvedState,
    params: ModelParams,
    t_end: float,
    dt: float,
    *,
    leak_budget: float = LEAK_BUDGET,
    grow: bool = True,
    n_max_cap: int = N_MAX_CAP,
) -> NResolvedState:
    """Advance the ladder from ``state.t`` to ``t_end`` with classical RK4.

    The step actually used is ``(t_end - t) / ceil((t_end - t) / dt)``, never
    larger than ``dt``.  Unless ``grow`` is false the ladder is first padded
    per :func:`required_n_max` (capped at ``n_max_cap``).

    Raises
    ------
    StepTooLargeError
        ``dt`` violates ``dt <= 0.01 / max(d1, |epsilon|, omega0, 1)``.
    TruncationOverflowError
        The leaked mass ends above ``leak_budget``.
    """
    _check_dt(params, dt)
    state = _prepare(state, params, t_end, grow, n_max_cap)
    n_steps, h = _steps(t_end - state.t, dt)
    y = state.to_real()
    leaked = _rk4(y, state.leaked, params, h, n_steps)
    if leaked > leak_budget:
        raise TruncationOverflowError(
            f"leaked mass {leaked:.3e} exceeds budget {leak_budget:.1e} at n_max={state.n_max}")
    return NResolvedState.from_real(y, t=float(t_end), leaked=leaked)


def evolve_history(
    state: NResolvedState,
    params: ModelParams,
    times: Sequence[float],
    dt: float,
    **kwargs,
) -> list[NResolvedState]:
    """Snapshots of :func:`evolve` at increasing ``times``."""
    times = np.asarray(times, dtype=float)
    if times.size == 0:
        return []
    if np.any(np.diff(times) < 0):
        raise ConfigError("sample times must be nondecreasing")
    if kwargs.get("grow", True):
        state = _prepare(state, params, float(times[-1]), True,
                         kwargs.get("n_max_cap", N_MAX_CAP))
    kwargs["grow"] = False
    out = []
    for t in times:
        state = evolve(state, params, float(t), dt, **kwargs)
        out.append(state)
    return out


@numba.njit(cache=True)
def _reduced_rhs(s11, x, y, d1, w, e):
    return (-2.0 * w * y,
            -0.5 * d1 * x - e * y,
            e * x + w * (2.0 * s11 - 1.0) - 0.5 * d1 * y)


@numba.njit(cache=True)
def _reduced_rk4(s, x, y, d1, w, e, h, n_steps):
    for _ in range(n_steps):
        a1, b1, c1 = _reduced_rhs(s, x, y, d1, w, e)
        a2, b2, c2 = _reduced_rhs(s + 0.5 * h * a1, x + 0.5 * h * b1, y + 0.5 * h * c1, d1, w, e)
        a3, b3, c3 = _reduced_rhs(s + 0.5 * h * a2, x + 0.5 * h * b2, y + 0.5 * h * c2, d1, w, e)
        a4, b4, c4 = _reduced_rhs(s + h * a3, x + h * b3, y + h * c3, d1, w, e)
        s += h / 6.0 * (a1 + 2.0 * (a2 + a3) + a4)
        x += h / 6.0 * (b1 + 2.0 * (b2 + b3) + b4)
        y += h / 6.0 * (c1 + 2.0 * (c2 + c3) + c4)
    return s, x, y


def evolve_reduced(state: ReducedState, params: ModelParams, t_end: float,
                   dt: float) -> ReducedState:
    """RK4 for the detector-averaged equations of ``s11`` and ``s12``."""
    _check_dt(params, dt)
    if t_end < state.t:
        raise ConfigError(f"t_end={t_end!r} precedes the state time {state.t!r}")
    n_steps, h = _steps(t_end - state.t, dt)
    s, x, y = _reduced_rk4(float(state.s11), float(state.s12.real), float(state.s12.imag),
                           float(params.d1), float(params.omega0), float(params.epsilon),
                           h, n_steps)
    return ReducedState(s11=s, s12=complex(x, y), t=float(t_end))


def reduced_history(state: ReducedState, params: ModelParams, times: Sequence[float],
                    dt: float) -> list[ReducedState]:
    out = []
    for t in np.asarray(times, dtype=float):
        state = evolve_reduced(state, params, float(t), dt)
        out.append(state)
    return out


def counting_distribution(state: NResolvedState) -> CountingDistribution:
    return CountingDistribution(t=state.t, p=state.s11 + state.s22, leaked=state.leaked)


@dataclass
class CurrentSeries:
    """Ensemble-mean detector current ``I = d1 * s11`` on a uniform grid.

    ``dndt`` is the finite-difference slope of the mean collector count and
    is only available for n-resolved histories.
    """

    t: np.ndarray
    current: np.ndarray
    dndt: np.ndarray | None = None


def mean_current(history: Sequence[ReducedState | NResolvedState],
                 params: ModelParams) -> CurrentSeries:
    if len(history) == 0:
        raise ValueError("mean_current needs a nonempty history")
    t = np.array([s.t for s in history], dtype=float)
    if t.size > 2:
        steps = np.diff(t)
        if np.ptp(steps) > 1e-9 * max(abs(steps).max(), 1.0):
            raise ValueError("history must be sampled on a uniform grid")
    resolved = all(isinstance(s, NResolvedState) for s in history)
    s11 = np.array([s.reduced().s11 if isinstance(s, NResolvedState) else s.s11
                    for s in history])
    dndt = None
    if resolved and t.size >= 2:
        mean_n = np.array([s.mean_n() for s in history])
        dndt = np.gradient(mean_n, t, edge_order=2 if t.size >= 3 else 1)
    return CurrentSeries(t=t, current=params.d1 * s11, dndt=dndt)


def generator_matrix(params: ModelParams, n_max: int) -> np.ndarray:
    """Dense generator on ``(s11, s22, Re s12, Im s12)`` per block plus leaked.

    Index ``4*n + k`` addresses component ``k`` of block ``n``; the final
    row/column is the leaked mass fed by the top block.
    """
    d, w, e = params.d1, params.omega0, params.epsilon
    dim = 4 * (n_max + 1) + 1
    g = np.zeros((dim, dim))
    for n in range(n_max + 1):
        p11, p22, re, im = 4 * n, 4 * n + 1, 4 * n + 2, 4 * n + 3
        g[p11, p11] = -d
        g[p11, im] = -2.0 * w
        dest = 4 * (n + 1) if n < n_max else dim - 1
        g[dest, p11] += d
        g[p22, im] = 2.0 * w
        g[re, re] = -d / 2.0
        g[re, im] = -e
        g[im, im] = -d / 2.0
        g[im, re] = e
        g[im, p11] = w
        g[im, p22] = -w
    return g


def evolve_oracle(state: NResolvedState, params: ModelParams, t_end: float) -> NResolvedState:
    """Exact propagation ``exp(G (t_end - t))`` of a small ladder."""
    if state.n_max > ORACLE_MAX_N:
        raise ConfigError(f"oracle is limited to n_max <= {ORACLE_MAX_N}, got {state.n_max}")
    n = state.n_max + 1
    v = np.empty(4 * n + 1)
    v[0:4 * n:4] = state.s11
    v[1:4 * n:4] = state.s22
    v[2:4 * n:4] = state.s12.real
    v[3:4 * n:4] = state.s12.imag
    v[-1] = state.leaked
    v = expm(generator_matrix(params, state.n_max) * (t_end - state.t)) @ v
    return NResolvedState(v[0:4 * n:4], v[1:4 * n:4], v[2:4 * n:4] + 1j * v[3:4 * n:4],
                          t=float(t_end), leaked=float(v[-1]))
