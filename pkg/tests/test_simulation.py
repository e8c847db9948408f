import numpy as np
import pytest

from ispls.simulation import (
    Scenario,
    ScenarioSpec,
    ar1_factor,
    draw_studies,
    gen_scenario,
    gen_test_data,
    make_truth,
)


@pytest.mark.parametrize("rho", [0.2, 0.7])
def test_predictor_moments(rho):
    spec = ScenarioSpec(p=20, n=10_000, rho=rho, L=1, q=1)
    data, _ = gen_scenario(spec)
    X = data[0].X
    assert np.abs(X.mean(axis=0)).max() < 0.05
    var = X.var(axis=0)
    assert var.min() > 0.9 and var.max() < 1.1
    lag1 = [np.corrcoef(X[:, j], X[:, j + 1])[0, 1] for j in range(19)]
    assert np.abs(np.array(lag1) - rho).max() < 0.05


@pytest.mark.parametrize("rho", [0.0, 0.3, 0.9])
def test_ar1_factor_reconstructs_correlation(rho):
    F = ar1_factor(6, rho)
    idx = np.arange(6)
    want = rho ** np.abs(idx[:, None] - idx[None, :])
    np.testing.assert_allclose(F @ F.T, want, atol=1e-12)
    assert np.allclose(F, np.tril(F))


def test_ar1_factor_rejects_bad_rho():
    with pytest.raises(ValueError):
        ar1_factor(3, 1.0)


def _truth(scenario, seed=0, **kw):
    spec = ScenarioSpec(scenario=scenario, seed=seed, **kw)
    return spec, make_truth(spec, np.random.default_rng(seed))


@pytest.mark.parametrize("seed", range(5))
def test_support_laws(seed):
    _, t1 = _truth(Scenario.S1, seed)
    _, t2 = _truth(Scenario.S2, seed)
    for t in (t1, t2):
        assert (t.support == t.support[0]).all() and t.support[0].sum() == 10
    assert (t1.beta1 == t1.beta1[0]).all()
    assert not (t2.beta1 == t2.beta1[0]).all()

    _, t3 = _truth(Scenario.S3, seed)
    shared = np.arange(5)
    for l in range(4):
        assert t3.support[l].sum() == 10
        for k in range(l + 1, 4):
            both = np.flatnonzero(t3.support[l] & t3.support[k])
            np.testing.assert_array_equal(both, shared)

    _, t4 = _truth(Scenario.S4, seed)
    assert (t4.support.sum(axis=1) == 10).all()


def test_coefficients_match_support_and_growth():
    spec, t = _truth(Scenario.S2, 3)
    np.testing.assert_array_equal(t.beta1 != 0, t.support)
    mags = np.abs(t.beta1[t.support])
    assert mags.min() >= 0.5 and mags.max() <= 4.0
    for k in range(spec.q):
        np.testing.assert_allclose(t.beta[:, :, k], t.beta1 * 1.2**k)
    # signs are shared across studies
    signs = np.sign(t.beta1)
    for j in range(10):
        assert len(set(signs[:, j])) == 1


def test_s3_small_p_rejected():
    with pytest.raises(ValueError, match="p >= 25"):
        ScenarioSpec(scenario=Scenario.S3, p=20)
    ScenarioSpec(scenario=Scenario.S3, p=25)


def test_spec_validation():
    with pytest.raises(ValueError):
        ScenarioSpec(rho=1.0)
    with pytest.raises(ValueError):
        ScenarioSpec(p=5)
    with pytest.raises(ValueError):
        ScenarioSpec(noise_sd=0)


def test_seed_determinism_and_independence():
    spec = ScenarioSpec(seed=9, p=30)
    a, ta = gen_scenario(spec)
    b, tb = gen_scenario(spec)
    for sa, sb in zip(a, b):
        np.testing.assert_array_equal(sa.X, sb.X)
        np.testing.assert_array_equal(sa.Y, sb.Y)
    np.testing.assert_array_equal(ta.beta, tb.beta)
    test = gen_test_data(spec, ta, n=50)
    assert test[0].n == 50
    assert not np.array_equal(test[0].X[:40], a[0].X)


def test_noise_level():
    spec = ScenarioSpec(p=20, n=20_000, L=1, q=2, noise_sd=1.0)
    data, truth = gen_scenario(spec)
    resid = data[0].Y - data[0].X @ truth.beta[0]
    assert abs(resid.var() - 1.0) < 0.05


def test_draw_shapes():
    spec = ScenarioSpec(p=30, n=12, q=3, L=3)
    truth = make_truth(spec, np.random.default_rng(0))
    data = draw_studies(spec, truth, np.random.default_rng(1))
    assert data.L == 3 and data[0].X.shape == (12, 30) and data[0].Y.shape == (12, 3)
