import math

import numpy as np
import pytest

from qjump import (ConfigError, FitError, ICKind, InitialCondition, ModelParams, ReducedState,
                   make_initial_state)
from qjump.analysis import (fit_zeno_time, gaussian_counting, gaussian_lattice, poisson_pmf,
                            reduced_derivative, steady_state, steady_state_check,
                            total_variation)
from qjump.engine import counting_distribution, evolve, evolve_reduced, reduced_history


def relaxation(omega0, d1, span=5.0, points=501):
    p = ModelParams(omega0=omega0, epsilon=0.0, d1=d1)
    times = np.linspace(0.0, span * p.zeno_time, points)
    return reduced_history(ReducedState(1.0), p, times, p.stable_dt()), p


# ---- counting laws -----------------------------------------------------

def test_gaussian_peak():
    assert gaussian_counting(100, 50.0, 2.0) == pytest.approx(1 / math.sqrt(2 * math.pi * 100))
    assert gaussian_counting(99, 50.0, 2.0) < gaussian_counting(100, 50.0, 2.0)


def test_gaussian_vectorised():
    n = np.arange(5)
    assert np.allclose(gaussian_counting(n, 2.0, 1.0),
                       [gaussian_counting(int(k), 2.0, 1.0) for k in n])


@pytest.mark.parametrize("t, d1", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0)])
def test_gaussian_rejects_bad_args(t, d1):
    with pytest.raises(ConfigError):
        gaussian_counting(0, t, d1)


def test_gaussian_vs_poisson_at_100():
    assert total_variation(gaussian_lattice(400, 100.0, 1.0), poisson_pmf(400, 100.0)) < 0.03


@pytest.mark.parametrize("mu", [25.0, 50.0, 100.0, 400.0])
def test_gaussian_lattice_mass(mu):
    n = np.arange(int(mu + 20 * math.sqrt(mu)))
    assert gaussian_counting(n, mu, 1.0).sum() == pytest.approx(1.0, abs=1e-6)


def test_engine_counting_matches_gaussian():
    p = ModelParams(omega0=0.0, d1=2.0)
    dist = counting_distribution(evolve(make_initial_state(InitialCondition(ICKind.LEFT_LOCALIZED), 0),
                                        p, 50.0, p.stable_dt()))
    assert total_variation(dist.p, gaussian_lattice(dist.p.size - 1, 50.0, 2.0)) < 0.03


def test_poisson_pmf_edges():
    assert np.array_equal(poisson_pmf(3, 0.0), [1, 0, 0, 0])
    assert poisson_pmf(200, 30.0).sum() == pytest.approx(1.0, abs=1e-12)


def test_total_variation_pads():
    assert total_variation(np.array([1.0]), np.array([0.0, 1.0])) == 1.0
    assert total_variation(np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0


# ---- Zeno fit ----------------------------------------------------------

def test_zeno_fit_d16():
    series, p = relaxation(1.0, 16.0)
    fit = fit_zeno_time(series, p)
    assert 1.6 <= fit.t0_fit <= 2.4
    assert fit.t0_formula == 2.0
    assert fit.ratio == pytest.approx(fit.t0_fit / 2.0)


def test_zeno_fit_linear_in_d1():
    f16 = fit_zeno_time(*relaxation(1.0, 16.0))
    f32 = fit_zeno_time(*relaxation(1.0, 32.0))
    assert f32.t0_fit / f16.t0_fit == pytest.approx(2.0, rel=0.2)


def test_zeno_fit_inverse_square_in_omega():
    f1 = fit_zeno_time(*relaxation(1.0, 32.0))
    f2 = fit_zeno_time(*relaxation(2.0, 32.0))
    assert f1.t0_fit / f2.t0_fit == pytest.approx(4.0, rel=0.25)


def test_zeno_fit_residual_decreases():
    residuals = [fit_zeno_time(*relaxation(1.0, r)).residual for r in (8.0, 16.0, 32.0, 64.0)]
    assert all(a > b for a, b in zip(residuals, residuals[1:]))


def test_zeno_fit_preconditions():
    series, p = relaxation(1.0, 16.0, span=2.0)
    with pytest.raises(ConfigError):
        fit_zeno_time(series, p)
    series, _ = relaxation(1.0, 16.0)
    with pytest.raises(ConfigError):
        fit_zeno_time(series, ModelParams(omega0=1.0, d1=4.0))
    with pytest.raises(ConfigError):
        fit_zeno_time(series, ModelParams(omega0=0.0, d1=4.0))


def test_zeno_fit_rejects_oscillation():
    p = ModelParams(omega0=1.0, d1=8.0)
    t0 = p.zeno_time
    times = np.linspace(0.0, 5 * t0, 101)
    series = [ReducedState(0.5 + 0.5 * math.cos(3 * t) ** 2, t=t) for t in times]
    with pytest.raises(FitError):
        fit_zeno_time(series, p)


# ---- steady state ------------------------------------------------------

@pytest.mark.parametrize("d1", [4.0, 16.0, 64.0])
def test_steady_mixture(d1):
    assert steady_state_check(ModelParams(omega0=1.0, epsilon=0.0, d1=d1)) < 1e-3


def test_no_coupling_negative_control():
    p = ModelParams(omega0=0.0, d1=4.0)
    with pytest.raises(ConfigError):
        steady_state_check(p)
    final = evolve_reduced(ReducedState(1.0), p, 200.0, p.stable_dt())
    assert max(abs(final.s11 - 0.5), abs(final.s12)) == 0.5


def test_detuned_steady_state_is_stationary():
    p = ModelParams(omega0=1.0, epsilon=4.0, d1=16.0)
    early = evolve_reduced(ReducedState(1.0), p, 1.0, p.stable_dt())
    final = steady_state(p)
    assert reduced_derivative(final, p) < 1e-6
    assert reduced_derivative(final, p) < 1e-3 * reduced_derivative(early, p)


def test_steady_deviation_monotone_after_five_t0():
    p = ModelParams(omega0=1.0, epsilon=0.0, d1=16.0)
    times = np.linspace(5 * p.zeno_time, 20 * p.zeno_time, 31)
    dev = [max(abs(s.s11 - 0.5), abs(s.s12))
           for s in reduced_history(ReducedState(1.0), p, times, p.stable_dt())]
    assert all(b <= a for a, b in zip(dev, dev[1:]))


def test_reduced_derivative_vanishes_at_mixture():
    assert reduced_derivative(ReducedState(0.5), ModelParams(omega0=1.0, d1=3.0)) == 0.0
    assert reduced_derivative(ReducedState(1.0), ModelParams(omega0=1.0, d1=3.0)) == 1.0
