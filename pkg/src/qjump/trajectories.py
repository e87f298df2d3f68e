"""Quantum-jump unraveling of the n-resolved equations.

Each trajectory carries a conditional 2x2 dot state.  Between detector
events it follows the no-jump generator (coherent dynamics plus the loss
``-d1*s11`` on the population and ``-d1/2*s12`` on the coherence) and is
renormalized; a collector electron is registered in a step with the
probability lost by the unnormalized state, after which the dot is
left-localized.  Averaging over trajectories reproduces the master
equation: a jump is exactly the ``n -> n+1`` transfer term.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numba
import numpy as np

from .engine import _block_matrix, _check_dt, _steps
from .errors import ConfigError, StepTooLargeError
from .model import InitialCondition, ModelParams

__all__ = [
    "RNG_ALGORITHM",
    "Trajectory",
    "TelegraphStats",
    "EnsembleCurrent",
    "trajectory_rng",
    "default_trajectory_dt",
    "simulate_trajectory",
    "simulate_ensemble",
    "synthesize_current",
    "telegraph_stats",
    "mean_over_trajectories",
    "empirical_counting",
    "batch_mean",
    "dwell_times",
    "jump_rate_regression",
]

RNG_ALGORITHM = "numpy.Philox4x64-10/SeedSequence(master_seed,spawn_key=(index,))"
JUMP_GUARD = 0.01


def trajectory_rng(master_seed: int, index: int) -> np.random.Generator:
    """Independent counter-based stream for trajectory ``index``."""
    ss = np.random.SeedSequence(int(master_seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def no_jump_propagator(params: ModelParams, h: float) -> np.ndarray:
    """One RK4 step of the no-jump generator as a 4x4 matrix."""
    a = _block_matrix(params) * h
    a2 = a @ a
    a3 = a2 @ a
    return np.eye(4) + a + a2 / 2.0 + a3 / 6.0 + a3 @ a / 24.0


@numba.njit(cache=True)
def _unravel(m, state0, u, sample_every, rate_edges, rate_sum, rate_jumps, rate_count):
    n_steps = u.size
    n_samples = n_steps // sample_every + 1
    samples = np.empty((n_samples, 3))
    counts = np.empty(n_samples, dtype=np.int64)
    jumps = np.empty(n_steps, dtype=np.int64)
    n_jumps = 0
    a, b, x, y = state0[0], state0[1], state0[2], state0[3]
    samples[0, 0] = a
    samples[0, 1] = x
    samples[0, 2] = y
    counts[0] = 0
    n_bins = rate_edges.size - 1
    for k in range(n_steps):
        na = m[0, 0] * a + m[0, 1] * b + m[0, 2] * x + m[0, 3] * y
        nb = m[1, 0] * a + m[1, 1] * b + m[1, 2] * x + m[1, 3] * y
        nx = m[2, 0] * a + m[2, 1] * b + m[2, 2] * x + m[2, 3] * y
        ny = m[3, 0] * a + m[3, 1] * b + m[3, 2] * x + m[3, 3] * y
        norm = na + nb
        jumped = u[k] < 1.0 - norm
        if n_bins > 0:
            i = np.searchsorted(rate_edges, a, side="right") - 1
            if i < 0:
                i = 0
            elif i >= n_bins:
                i = n_bins - 1
            rate_sum[i] += a
            rate_count[i] += 1
            if jumped:
                rate_jumps[i] += 1
        if jumped:
            a, b, x, y = 1.0, 0.0, 0.0, 0.0
            jumps[n_jumps] = k + 1
            n_jumps += 1
        else:
            a, b, x, y = na / norm, nb / norm, nx / norm, ny / norm
        if (k + 1) % sample_every == 0:
            j = (k + 1) // sample_every
            samples[j, 0] = a
            samples[j, 1] = x
            samples[j, 2] = y
            counts[j] = n_jumps
    return samples, counts, jumps[:n_jumps].copy()


@dataclass
class Trajectory:
    """One measurement record.

    Times are kept as integer step indices (``*_steps``) so that windowed
    counts are exact; the float views are derived from them.
    """

    seed: int
    index: int
    params: ModelParams
    ic: InitialCondition
    h: float
    n_steps: int
    jump_steps: np.ndarray
    sample_steps: np.ndarray
    cond_s11: np.ndarray
    cond_s12: np.ndarray
    n_cum: np.ndarray
    window: float | None = None
    rng_algorithm: str = RNG_ALGORITHM
    current_trace: np.ndarray | None = field(default=None, repr=False)

    @property
    def t_end(self) -> float:
        return self.n_steps * self.h

    @property
    def jump_times(self) -> np.ndarray:
        return self.jump_steps * self.h

    @property
    def sample_times(self) -> np.ndarray:
        return self.sample_steps * self.h

    @property
    def n_jumps(self) -> int:
        return int(self.jump_steps.size)

    def counts_at_steps(self, steps: np.ndarray) -> np.ndarray:
        """Collector electrons registered by the end of each step index."""
        return self.ic.n0 + np.searchsorted(self.jump_steps, steps, side="right")


def _grid(params: ModelParams, t_end: float, dt: float, sample_dt: float | None):
    _check_dt(params, dt)
    if params.d1 * dt > JUMP_GUARD * (1.0 + 1e-12):
        raise StepTooLargeError(f"d1*dt={params.d1 * dt:g} exceeds the jump guard {JUMP_GUARD}")
    if not t_end > 0.0:
        raise ConfigError("t_end must be positive")
    n_steps, h = _steps(t_end, dt)
    if sample_dt is None:
        sample_every = max(1, n_steps // 400)
    else:
        sample_every = max(1, int(round(sample_dt / h)))
    return n_steps, h, sample_every


def default_trajectory_dt(params: ModelParams) -> float:
    """A tenth of the engine bound; keeps the one-event-per-step bias below MC noise."""
    return 0.1 * params.stable_dt()


def default_window(params: ModelParams) -> float | None:
    return 20.0 / params.d1 if params.d1 > 0.0 else None


def _batch(ic, params, t_end, dt, master_seed, indices, sample_dt, window, rate_edges):
    n_steps, h, sample_every = _grid(params, t_end, dt, sample_dt)
    m = no_jump_propagator(params, h)
    s11, s22, s12 = ic.block()
    state0 = np.array([s11, s22, s12.real, s12.imag])
    n_bins = 0 if rate_edges is None else rate_edges.size - 1
    edges = np.zeros(0) if rate_edges is None else np.asarray(rate_edges, dtype=float)
    rate_sum = np.zeros(n_bins)
    rate_jumps = np.zeros(n_bins, dtype=np.int64)
    rate_count = np.zeros(n_bins, dtype=np.int64)
    out = []
    for idx in indices:
        u = trajectory_rng(master_seed, idx).random(n_steps)
        samples, counts, jumps = _unravel(m, state0, u, sample_every, edges,
                                          rate_sum, rate_jumps, rate_count)
        traj = Trajectory(
            seed=int(master_seed), index=int(idx), params=params, ic=ic, h=h,
            n_steps=n_steps, jump_steps=jumps,
            sample_steps=np.arange(samples.shape[0], dtype=np.int64) * sample_every,
            cond_s11=samples[:, 0], cond_s12=samples[:, 1] + 1j * samples[:, 2],
            n_cum=ic.n0 + counts,
        )
        if window is not None:
            traj.window = window
            traj.current_trace = synthesize_current(traj, window)[1]
        out.append(traj)
    return out, (rate_sum, rate_jumps, rate_count)


def simulate_trajectory(ic: InitialCondition, params: ModelParams, t_end: float, dt: float,
                        seed: int, *, index: int = 0, sample_dt: float | None = None,
                        window: float | None = None) -> Trajectory:
    """Simulate a single jump trajectory.

    ``seed`` is the master seed; ``index`` selects the stream, so trajectory
    ``i`` of :func:`simulate_ensemble` is reproduced by ``index=i``.  The
    windowed current is attached when ``window`` (default ``20/d1``) is set.
    """
    if window is None:
        window = default_window(params)
        if window is not None and window > t_end:
            window = None
    trajs, _ = _batch(ic, params, t_end, dt, seed, [index], sample_dt, window, None)
    return trajs[0]


def _worker_count(n_traj: int, workers: int | None) -> int:
    if workers is None:
        workers = os.cpu_count() or 1
        cap = os.environ.get("QJUMP_THREADS")
        if cap:
            workers = min(workers, max(1, int(cap)))
    return max(1, min(workers, n_traj))


def simulate_ensemble(ic: InitialCondition, params: ModelParams, t_end: float, dt: float,
                      n_traj: int, master_seed: int, *, sample_dt: float | None = None,
                      window: float | None = None, workers: int | None = None,
                      ) -> list[Trajectory]:
    """Run ``n_traj`` independent trajectories, ordered by index.

    Work is split into contiguous index ranges across processes; the
    result does not depend on the split.
    """
    if n_traj < 1:
        raise ConfigError("n_traj must be >= 1")
    if window is None:
        window = default_window(params)
        if window is not None and window > t_end:
            window = None
    workers = _worker_count(n_traj, workers)
    chunks = [c.tolist() for c in np.array_split(np.arange(n_traj), workers)]
    args = (ic, params, t_end, dt, master_seed)
    if workers == 1:
        return _batch(*args, chunks[0], sample_dt, window, None)[0]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_batch, *args, c, sample_dt, window, None) for c in chunks]
        results = [f.result()[0] for f in futures]
    return [t for part in results for t in part]


def synthesize_current(traj: Trajectory, window: float) -> tuple[np.ndarray, np.ndarray]:
    """Forward windowed event rate ``(N(t + w) - N(t)) / w`` at sample times.

    Only sample times with ``t + w <= t_end`` are returned.
    """
    d1 = traj.params.d1
    if not window > 0.0 or (d1 > 0.0 and window < 10.0 / d1 * (1.0 - 1e-12)):
        raise ConfigError(f"window={window!r} is below 10/d1; levels cannot be resolved")
    w_steps = max(1, int(round(window / traj.h)))
    start = traj.sample_steps[traj.sample_steps + w_steps <= traj.n_steps]
    rate = (traj.counts_at_steps(start + w_steps) - traj.counts_at_steps(start)) / (w_steps * traj.h)
    return start * traj.h, rate


@dataclass
class EnsembleCurrent:
    t: np.ndarray
    mean: np.ndarray
    sem: np.ndarray


def mean_over_trajectories(ensemble: Sequence[Trajectory], window: float) -> EnsembleCurrent:
    """Pointwise average of the synthesized single-run currents."""
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    t, first = synthesize_current(ensemble[0], window)
    traces = np.empty((len(ensemble), first.size))
    traces[0] = first
    for i, traj in enumerate(ensemble[1:], start=1):
        ti, traces[i] = synthesize_current(traj, window)
        if ti.size != t.size:
            raise ValueError("trajectories are sampled on different grids")
    n = len(ensemble)
    sem = traces.std(axis=0, ddof=1) / math.sqrt(n) if n > 1 else np.zeros_like(first)
    return EnsembleCurrent(t=t, mean=traces.mean(axis=0), sem=sem)


def batch_mean(values: np.ndarray, n_batches: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Mean over axis 0 and its standard error from batch means."""
    values = np.asarray(values, dtype=float)
    n_batches = min(n_batches, values.shape[0])
    if n_batches < 2:
        raise ValueError("need at least two samples for a batch-means error")
    batches = np.array([b.mean(axis=0) for b in np.array_split(values, n_batches)])
    return values.mean(axis=0), batches.std(axis=0, ddof=1) / math.sqrt(n_batches)


def empirical_counting(ensemble: Sequence[Trajectory], sample_index: int,
                       n_max: int | None = None) -> np.ndarray:
    """Per-trajectory one-hot collector counts at a sample, shape ``(n_traj, n_max+1)``."""
    counts = np.array([traj.n_cum[sample_index] for traj in ensemble])
    if n_max is None:
        n_max = int(counts.max())
    onehot = np.zeros((counts.size, n_max + 1))
    keep = counts <= n_max
    onehot[np.nonzero(keep)[0], counts[keep]] = 1.0
    return onehot


def dwell_times(high: np.ndarray, dt: float) -> tuple[np.ndarray, np.ndarray]:
    """Durations of complete high and low runs; the censored ends are dropped."""
    high = np.asarray(high, dtype=bool)
    if high.size < 2:
        return np.zeros(0), np.zeros(0)
    change = np.nonzero(np.diff(high.astype(np.int8)))[0] + 1
    if change.size < 2:
        return np.zeros(0), np.zeros(0)
    lengths = np.diff(change) * dt
    levels = high[change[:-1]]
    return lengths[levels], lengths[~levels]


@dataclass
class TelegraphStats:
    """Threshold classification of single-run currents.

    ``p_high`` is the ensemble fraction above threshold at ``probe_time``;
    ``high_fraction`` the mean fraction of record time above threshold over
    ``t >= t_min``.  ``histogram`` counts the probe-time currents in
    ``bin_edges`` and sums to the ensemble size.
    """

    high_fraction: float
    p_high: float
    dwell_high: np.ndarray
    dwell_low: np.ndarray
    histogram: np.ndarray
    bin_edges: np.ndarray
    probe_time: float
    threshold: float
    per_trajectory_high: np.ndarray

    @property
    def p_low(self) -> float:
        return 1.0 - self.p_high


def telegraph_stats(ensemble: Sequence[Trajectory], params: ModelParams, probe_time: float,
                    threshold: float | None = None, *, window: float | None = None,
                    t_min: float = 0.0, bins: int = 40, min_size: int = 1000) -> TelegraphStats:
    if len(ensemble) == 0:
        raise ValueError("empty ensemble")
    if len(ensemble) < min_size:
        raise ConfigError(f"telegraph statistics need >= {min_size} trajectories")
    if threshold is None:
        threshold = params.d1 / 2.0
    if not 0.0 < threshold < params.d1:
        raise ConfigError("threshold must lie strictly between 0 and d1")
    if window is None:
        window = default_window(params)

    probe_vals = np.empty(len(ensemble))
    fractions = np.empty(len(ensemble))
    dwell_hi, dwell_lo = [], []
    for i, traj in enumerate(ensemble):
        t, current = synthesize_current(traj, window)
        k = int(np.argmin(np.abs(t - probe_time)))
        probe_vals[i] = current[k]
        high = current[t >= t_min - 1e-12] > threshold
        fractions[i] = high.mean() if high.size else np.nan
        hi, lo = dwell_times(high, t[1] - t[0] if t.size > 1 else traj.h)
        dwell_hi.append(hi)
        dwell_lo.append(lo)

    top = max(2.0 * params.d1, float(probe_vals.max())) * (1.0 + 1e-9)
    hist, edges = np.histogram(probe_vals, bins=bins, range=(0.0, top))
    return TelegraphStats(
        high_fraction=float(np.nanmean(fractions)),
        p_high=float(np.mean(probe_vals > threshold)),
        dwell_high=np.concatenate(dwell_hi),
        dwell_low=np.concatenate(dwell_lo),
        histogram=hist,
        bin_edges=edges,
        probe_time=float(probe_time),
        threshold=float(threshold),
        per_trajectory_high=fractions,
    )


def jump_rate_regression(ic: InitialCondition, params: ModelParams, t_end: float, dt: float,
                         n_traj: int, master_seed: int, bins: int = 20) -> tuple[float, float]:
    """Slope and intercept of the empirical jump rate against ``d1 * s11``.

    Steps are binned by the conditional ``s11`` at step start; the fit is
    weighted by the number of steps per bin.
    """
    if params.d1 <= 0.0:
        raise ConfigError("jump-rate regression needs d1 > 0")
    edges = np.linspace(0.0, 1.0, bins + 1)
    _, (s_sum, jumps, count) = _batch(ic, params, t_end, dt, master_seed, range(n_traj),
                                      None, None, edges)
    n_steps, h, _ = _grid(params, t_end, dt, None)
    used = count > 0
    expected = params.d1 * s_sum[used] / count[used]
    observed = jumps[used] / (count[used] * h)
    slope, intercept = np.polyfit(expected, observed, 1, w=np.sqrt(count[used]))
    return float(slope), float(intercept)
