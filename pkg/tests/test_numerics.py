"""Damped Gauss-Newton least squares on problems with known answers."""

import numpy as np
import pytest

from nanobeam.numerics import levenberg_marquardt


def test_linear_fit_exact_and_covariance():
    # y = 2 x + 1 with known Gaussian residuals: LM must land on the
    # normal-equation solution, and the covariance must match the
    # closed form sigma^2 (X^T X)^{-1}
    rng = np.random.default_rng(7)
    x = np.linspace(0.0, 1.0, 50)
    noise = 0.05 * rng.standard_normal(50)
    y = 2.0 * x + 1.0 + noise

    def residual(p):
        return p[0] * x + p[1] - y

    p, cov, info = levenberg_marquardt(residual, np.array([0.0, 0.0]))
    X = np.column_stack([x, np.ones_like(x)])
    expect = np.linalg.lstsq(X, y, rcond=None)[0]
    assert np.allclose(p, expect, rtol=1e-9)
    assert info["converged"]
    r = residual(p)
    s2 = (r @ r) / (len(x) - 2)
    cov_expect = s2 * np.linalg.inv(X.T @ X)
    assert np.allclose(cov, cov_expect, rtol=1e-6)


def test_rosenbrock_valley():
    # classic curved valley, residual form r = (1 - p0, 10 (p1 - p0^2))
    def residual(p):
        return np.array([1.0 - p[0], 10.0 * (p[1] - p[0] ** 2)])

    p, cov, info = levenberg_marquardt(residual, np.array([-1.2, 1.0]))
    assert np.allclose(p, [1.0, 1.0], atol=1e-8)
    assert info["converged"]
    assert info["ssr"] < 1e-16


def test_exponential_decay_recovery():
    t = np.linspace(0.0, 10.0, 200)
    y = 3.0 * np.exp(-0.7 * t)

    def residual(p):
        return p[0] * np.exp(-p[1] * t) - y

    p, cov, info = levenberg_marquardt(residual, np.array([1.0, 0.1]))
    assert p[0] == pytest.approx(3.0, rel=1e-8)
    assert p[1] == pytest.approx(0.7, rel=1e-8)


def test_analytic_jacobian_path():
    x = np.linspace(0.0, 1.0, 30)
    y = 1.5 * x - 0.5

    def residual(p):
        return p[0] * x + p[1] - y

    def jac(p):
        return np.column_stack([x, np.ones_like(x)])

    p, cov, info = levenberg_marquardt(residual, np.zeros(2), jac=jac)
    assert np.allclose(p, [1.5, -0.5], atol=1e-10)


def test_iteration_budget_honored():
    def residual(p):
        return np.array([np.tanh(p[0]) - 2.0])  # unattainable target

    p, cov, info = levenberg_marquardt(residual, np.array([0.0]),
                                       max_iter=5)
    assert info["n_iter"] <= 5
