import numpy as np
import pytest
import scipy.linalg

from qjump.linalg import expm


def test_zero_and_identity():
    assert np.array_equal(expm(np.zeros((3, 3))), np.eye(3))
    assert np.allclose(expm(np.eye(2)), np.e * np.eye(2), rtol=1e-15)


@pytest.mark.parametrize("theta", [0.1, 1.0, np.pi, 25.0])
def test_rotation_generator(theta):
    a = np.array([[0.0, -theta], [theta, 0.0]])
    expected = np.array([[np.cos(theta), -np.sin(theta)], [np.sin(theta), np.cos(theta)]])
    assert np.allclose(expm(a), expected, atol=1e-12)


def test_nilpotent_is_finite_taylor():
    a = np.diag([1.0, 2.0, 3.0], k=1)
    expected = np.eye(4) + a + a @ a / 2 + a @ a @ a / 6
    assert np.allclose(expm(a), expected, rtol=1e-14)


@pytest.mark.parametrize("scale", [0.01, 1.0, 30.0])
def test_matches_scipy(rng, scale):
    a = rng.normal(size=(40, 40)) * scale / 5
    ref = scipy.linalg.expm(a)
    assert np.allclose(expm(a), ref, rtol=1e-11, atol=1e-11 * np.abs(ref).max())


def test_complex_input(rng):
    a = rng.normal(size=(6, 6)) + 1j * rng.normal(size=(6, 6))
    assert np.allclose(expm(a), scipy.linalg.expm(a), rtol=1e-12)


def test_rejects_non_square():
    with pytest.raises(ValueError):
        expm(np.zeros((2, 3)))
