import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qjump import (ConfigError, DetectorParams, ICKind, InitialCondition, ModelParams,
                   derive_rate, make_initial_state)


@pytest.mark.parametrize("t1, bias, expected", [
    (0.0, 1.0, 0.0),
    (1.0, 2 * math.pi, 1.0),
    (0.5, math.pi, 0.25),
])
def test_derive_rate_examples(t1, bias, expected):
    assert derive_rate(DetectorParams(transmission_open=t1, bias=bias)) == pytest.approx(expected)


@given(t1=st.floats(0.0, 1.0), bias=st.floats(1e-3, 1e3), k=st.floats(0.0, 1.0))
def test_derive_rate_is_linear(t1, bias, k):
    base = derive_rate(DetectorParams(t1, bias))
    assert derive_rate(DetectorParams(t1, 2 * bias)) == pytest.approx(2 * base)
    assert derive_rate(DetectorParams(k * t1, bias)) == pytest.approx(k * base, rel=1e-12, abs=1e-300)


@pytest.mark.parametrize("kwargs", [
    dict(transmission_open=0.5, bias=0.0),
    dict(transmission_open=0.5, bias=-1.0),
    dict(transmission_open=1.5, bias=1.0),
    dict(transmission_open=-0.1, bias=1.0),
    dict(transmission_open=0.2, bias=1.0, transmission_blocked=0.3),
    dict(transmission_open=0.5, bias=1.0, transmission_blocked=0.1),
])
def test_detector_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        DetectorParams(**kwargs)


def test_model_params_from_detector():
    p = ModelParams.from_detector(DetectorParams(1.0, 2 * math.pi), omega0=0.5)
    assert p.d1 == pytest.approx(1.0)
    assert p.zeno_time == pytest.approx(1.0 / (8 * 0.25))


@pytest.mark.parametrize("kwargs", [dict(omega0=-1.0), dict(omega0=1.0, d1=-1.0),
                                    dict(omega0=float("nan"))])
def test_model_params_rejects_invalid(kwargs):
    with pytest.raises(ConfigError):
        ModelParams(**kwargs)


def test_stable_dt():
    assert ModelParams(omega0=1.0, epsilon=-40.0, d1=16.0).stable_dt() == pytest.approx(0.01 / 40)
    assert ModelParams(omega0=0.1, d1=0.2).stable_dt() == pytest.approx(0.01)


def test_left_localized_initial_state():
    s = make_initial_state(InitialCondition(ICKind.LEFT_LOCALIZED), n_max=10)
    assert s.n_max == 10
    assert s.s11[0] == 1.0
    assert s.trace() == 1.0
    assert np.count_nonzero(s.s11) + np.count_nonzero(s.s22) + np.count_nonzero(s.s12) == 1


def test_mixture_and_superposition_initial_state():
    mix = make_initial_state(InitialCondition(ICKind.EQUAL_MIXTURE), n_max=10)
    assert (mix.s11[0], mix.s22[0], mix.s12[0]) == (0.5, 0.5, 0.0)
    sup = make_initial_state(InitialCondition(ICKind.EQUAL_SUPERPOSITION), n_max=10)
    assert sup.s12[0] == 0.5
    assert sup.s11[0] * sup.s22[0] == pytest.approx(abs(sup.s12[0]) ** 2)


def test_initial_state_offset_and_errors():
    s = make_initial_state(InitialCondition(ICKind.RIGHT_LOCALIZED, n0=3), n_max=5)
    assert s.s22[3] == 1.0 and s.trace() == 1.0
    with pytest.raises(ConfigError):
        make_initial_state(InitialCondition(ICKind.LEFT_LOCALIZED, n0=6), n_max=5)
    with pytest.raises(ConfigError):
        InitialCondition("Sideways")
    with pytest.raises(ConfigError):
        InitialCondition(ICKind.LEFT_LOCALIZED, n0=-1)


@given(kind=st.sampled_from(list(ICKind)), n0=st.integers(0, 20))
def test_presets_are_positive_unit_trace(kind, n0):
    s = make_initial_state(InitialCondition(kind, n0), n_max=20)
    assert s.trace() == pytest.approx(1.0)
    assert np.all(s.s11 >= 0) and np.all(s.s22 >= 0)
    assert np.all(s.s11 * s.s22 >= np.abs(s.s12) ** 2 - 1e-15)
