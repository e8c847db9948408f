import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ispls.pls import first_direction
from ispls.spls import (
    OrthogonalSurrogateError,
    SplsConfig,
    fit_spls,
    multiplier_equation,
    solve_multiplier,
    spls_objective,
    spls_w_step,
    threshold_scale,
    w_step_multiplier,
)
from ispls.penalties import soft_threshold


def _instance(seed, n=30, p=8, q=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    beta = np.zeros((p, q))
    beta[:3] = rng.normal(size=(3, q)) * 2
    return X, X @ beta + rng.normal(size=(n, q))


def test_w_step_examples():
    np.testing.assert_allclose(spls_w_step([[1.0], [0.0]], np.array([0.6, 0.8])), [1.0, 0.0])
    rng = np.random.default_rng(0)
    u = rng.normal(size=5)
    u /= np.linalg.norm(u)
    Z = np.outer(u, [2.0, -1.0])
    for kappa in (0.1, 0.3, 0.5):
        w = spls_w_step(Z, 3.0 * u, kappa)
        assert abs(abs(w @ u) - 1.0) < 1e-10
    with pytest.raises(OrthogonalSurrogateError):
        spls_w_step(Z, _orth(u))


def _orth(u):
    v = np.zeros_like(u)
    v[0], v[1] = u[1], -u[0]
    return v


@pytest.mark.parametrize("seed", range(10))
def test_w_step_stationarity_kappa_04(seed):
    rng = np.random.default_rng(seed)
    Z = rng.normal(size=(4, 2))
    c = rng.normal(size=4)
    kappa = 0.4
    kp = (1 - kappa) / (1 - 2 * kappa)
    w = spls_w_step(Z, c, kappa)
    assert abs(np.linalg.norm(w) - 1) < 1e-8
    lam = w_step_multiplier(Z, c, kappa)
    M = Z @ Z.T
    if lam is None:
        mc = M @ c
        np.testing.assert_allclose(w, mc / np.linalg.norm(mc), atol=1e-10)
    else:
        # the multiplier is fixed by kappa' ||(M + lam)^-1 M c|| = 1
        v = kp * np.linalg.solve(M + lam * np.eye(4), M @ c)
        assert abs(np.linalg.norm(v) - 1) < 1e-8
        assert np.linalg.norm((M + lam * np.eye(4)) @ w - kp * M @ c) < 1e-6 * max(1, np.linalg.norm(M @ c))


def test_multiplier_function_decreasing_and_bisection():
    sigma = np.array([3.0, 1.0])
    proj = np.array([0.5, 2.0])
    vals = [multiplier_equation(sigma, proj, lam) for lam in np.linspace(0, 50, 200)]
    assert np.all(np.diff(vals) < 0)
    lam = solve_multiplier(sigma, proj, 0.3)
    kp = 0.7 / 0.4
    assert multiplier_equation(sigma, proj, lam) == pytest.approx(1 / kp**2, rel=1e-8)
    assert solve_multiplier(sigma, 1e-3 * proj, 0.3) is None


def test_zero_penalty_gives_pls_direction():
    X, Y = _instance(1)
    fit = fit_spls(X, Y, SplsConfig(lambda1=0.0, tol=1e-10, max_iter=500))
    w0 = first_direction(X.T @ Y)
    assert abs(abs(fit.directions[0] @ w0) - 1) < 1e-8
    assert fit.selected.all()
    assert fit.converged and not fit.fully_penalized


def test_threshold_above_scale_zeroes_everything():
    X, Y = _instance(2)
    M = threshold_scale(X.T @ Y)
    fit = fit_spls(X, Y, SplsConfig(lambda1=M * 1.0001))
    assert fit.fully_penalized and fit.converged
    assert not fit.selected.any()
    assert not fit.beta[0].any()
    assert fit_spls(X, Y, SplsConfig(eta=0.0)).selected.all()


def _separable_oracle(z, lambda1, grid):
    """Exhaustive minimization of c'c/2 - max_w w'zz'c + lambda1|c|_1 for q=1.

    With q = 1 the best unit w gives |z'c| ||z||, so the objective splits per
    coordinate once the sign of z'c is fixed; each coordinate is then a 1-D
    grid search.
    """
    best, arg = np.inf, None
    nz = np.linalg.norm(z)
    for sigma in (1.0, -1.0):
        c = np.empty_like(z)
        total = 0.0
        for j, zj in enumerate(z):
            obj = 0.5 * grid**2 - nz * sigma * zj * grid + lambda1 * np.abs(grid)
            k = np.argmin(obj)
            c[j], total = grid[k], total + obj[k]
        if total < best:
            best, arg = total, c
    return arg


@pytest.mark.parametrize("lam", [1.5, 2.5, 4.5])
def test_small_instance_selects_first_variable(lam):
    z = np.array([5.0, 1.0, 0.2])
    X = np.diag([1.0, 1.0, 1.0])
    Y = z[:, None]
    nz = np.linalg.norm(z)
    fit = fit_spls(X, Y, SplsConfig(lambda1=lam * nz))
    assert fit.selected[0].tolist() == [True, False, False]
    oracle = _separable_oracle(z, lam * nz, np.linspace(-40, 40, 80001))
    assert (oracle != 0).tolist() == [True, False, False]
    np.testing.assert_allclose(fit.directions[0], oracle / np.linalg.norm(oracle), atol=1e-4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 0.9))
def test_objective_trace_non_increasing(seed, eta):
    X, Y = _instance(seed)
    fit = fit_spls(X, Y, SplsConfig(eta=eta, tol=1e-12, max_iter=50))
    tr = np.array(fit.objective_trace)
    assert np.all(np.diff(tr) <= 1e-8 * np.maximum(1.0, np.abs(tr[:-1])))


def test_response_scaling_leaves_direction():
    X, Y = _instance(3)
    a = fit_spls(X, Y, SplsConfig(tol=1e-10, max_iter=500)).directions[0]
    b = fit_spls(X, 7.5 * Y, SplsConfig(tol=1e-10, max_iter=500)).directions[0]
    np.testing.assert_allclose(a, b, atol=1e-8)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_one_step_sparsity_monotone(seed, f1, f2):
    X, Y = _instance(seed)
    Z = X.T @ Y
    w0 = first_direction(Z)
    s = Z @ (Z.T @ w0)
    lo, hi = sorted((f1, f2))
    scale = np.abs(s).max()
    sel_lo = soft_threshold(s, lo * scale) != 0
    sel_hi = soft_threshold(s, hi * scale) != 0
    assert np.all(sel_hi <= sel_lo)


def test_objective_formula():
    Z = np.array([[1.0, 0.0], [0.0, 2.0]])
    w = np.array([1.0, 0.0])
    c = np.array([2.0, -1.0])
    assert spls_objective(Z, w, c, 0.5) == pytest.approx(0.5 * 5 - 2.0 + 0.5 * 3)


def test_config_validation():
    for kw in (dict(kappa=0.0), dict(kappa=0.7), dict(lambda1=-1), dict(eta=1.0), dict(tol=0.0), dict(max_iter=0)):
        with pytest.raises(ValueError):
            SplsConfig(**kw)
