import numpy as np
import pytest

from qpscope.errors import FitError
from qpscope.fitting import damped_gauss_newton


def test_exact_linear_problem():
    xs = np.linspace(0, 1, 20)
    data = 3.0 * xs - 0.5
    res = damped_gauss_newton(lambda t: t[0] * xs + t[1] - data, np.array([1.0, 0.0]))
    assert res.x == pytest.approx([3.0, -0.5], abs=1e-10)
    assert res.rss < 1e-18


def test_nonlinear_exponential_recovery():
    xs = np.linspace(0, 2, 40)
    data = 2.5 * np.exp(-1.7 * xs) + 0.2

    def resid(t):
        return t[0] * np.exp(-t[1] * xs) + t[2] - data

    res = damped_gauss_newton(resid, np.array([1.0, 1.0, 0.0]))
    assert res.x == pytest.approx([2.5, 1.7, 0.2], rel=1e-6)


def test_covariance_scales_with_noise():
    xs = np.linspace(0, 1, 200)
    rng = np.random.default_rng(0)
    data = 2.0 * xs + rng.normal(0, 0.1, xs.size)
    res = damped_gauss_newton(lambda t: t[0] * xs - data, np.array([1.0]))
    # var(slope) ~ sigma^2 / sum(x^2)
    assert res.covariance[0, 0] == pytest.approx(0.01 / np.sum(xs**2), rel=0.3)


def test_iteration_cap_carries_last_iterate():
    # a residual that keeps shrinking but never converges within the cap
    def resid(t):
        return np.array([np.exp(-abs(t[0]) * 1e-8) + 1.0])

    with pytest.raises(FitError) as info:
        damped_gauss_newton(resid, np.array([1.0]), max_iter=3)
    assert info.value.last_iterate is not None


def test_deterministic():
    xs = np.linspace(0, 3, 50)
    rng = np.random.default_rng(5)
    data = np.sin(1.3 * xs) + 0.05 * rng.standard_normal(50)

    def resid(t):
        return np.sin(t[0] * xs) - data

    a = damped_gauss_newton(resid, np.array([1.0]))
    b = damped_gauss_newton(resid, np.array([1.0]))
    assert a.x[0] == b.x[0] and a.rss == b.rss and a.n_iter == b.n_iter
