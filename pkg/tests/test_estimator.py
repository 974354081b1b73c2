import math

import numpy as np
import pytest

from gamma_regress.contamination import CovariateSpec, generate_clean
from gamma_regress.divergence import RegressionDataset, empirical_cross_entropy
from gamma_regress.errors import NoDescent, SingularDesign
from gamma_regress.estimator import (
    FitConfig,
    bfgs,
    fit,
    fit_multistart,
    gaussian_mle,
    logistic_mle,
    mle_init,
    poisson_mle,
)
from gamma_regress.models import ConditionalModel, GaussianLinearModel, LogisticModel, PoissonModel

BETA = (0.0, 1.0, -1.0, 1.0, -1.0, 0.0)


def irls_logistic(x, y, iters=100):
    # textbook iteratively reweighted least squares, written without the library
    X = np.column_stack([np.ones(len(y)), x])
    beta = np.zeros(X.shape[1])
    for _ in range(iters):
        p = 1 / (1 + np.exp(-(X @ beta)))
        w = p * (1 - p)
        z = X @ beta + (y - p) / w
        new = np.linalg.solve(X.T @ (w[:, None] * X), X.T @ (w * z))
        if np.max(np.abs(new - beta)) < 1e-13:
            return new
        beta = new
    return beta


class UnitScaleLocation(ConditionalModel):
    """N(mu, 1) with mu the intercept; test-only one-parameter family."""

    name = "unit-location"
    _base = GaussianLinearModel()

    def _full(self, theta):
        return np.append(theta, 1.0)

    def log_density(self, theta, x, y):
        return self._base.log_density(self._full(theta), x, y)

    def log_density_gradient(self, theta, x, y):
        return self._base.log_density_gradient(self._full(theta), x, y)[..., :-1]

    def log_power_integral(self, theta, x, gamma):
        return self._base.log_power_integral(self._full(theta), x, gamma)

    def log_power_integral_gradient(self, theta, x, gamma):
        return self._base.log_power_integral_gradient(self._full(theta), x, gamma)[..., :-1]


def logistic_data(n=1000, seed=0):
    return generate_clean(LogisticModel(), BETA, CovariateSpec(), n, seed)


# --- configuration -----------------------------------------------------------


@pytest.mark.parametrize(
    "kwargs",
    [{"max_iters": 0}, {"grad_tol": 0.0}, {"step_tol": -1.0}, {"gamma": 0.0}, {"init": "warm"}, {"kind": 3}],
)
def test_config_rejects(kwargs):
    with pytest.raises(ValueError):
        FitConfig(**kwargs)


def test_custom_init_length_checked():
    data = logistic_data(50)
    with pytest.raises(ValueError):
        fit(LogisticModel(), data, FitConfig(init=(0.0, 1.0)))


# --- maximum likelihood initializers -----------------------------------------


def test_logistic_mle_matches_irls():
    rng = np.random.default_rng(3)
    for seed in range(5):
        data = logistic_data(300, seed)
        np.testing.assert_allclose(logistic_mle(data.x, data.y), irls_logistic(data.x, data.y), atol=1e-8)
    x = rng.normal(size=(200, 2))
    y = (rng.random(200) < 0.4).astype(float)
    np.testing.assert_allclose(mle_init(LogisticModel(), RegressionDataset(x, y)), irls_logistic(x, y), atol=1e-8)


def test_logistic_intercept_only_closed_form():
    y = np.array([1.0, 0.0, 1.0, 1.0, 0.0, 1.0])
    beta = logistic_mle(np.zeros((6, 0)), y)
    assert beta[0] == pytest.approx(math.log(4 / 2))


def test_logistic_separation_falls_back_to_ridge():
    x = np.array([[-2.0], [-1.0], [-0.5], [0.5], [1.0], [2.0]])
    y = np.array([0.0, 0.0, 0.0, 1.0, 1.0, 1.0])
    with pytest.warns(UserWarning, match="ridge"):
        beta = logistic_mle(x, y)
    assert np.all(np.isfinite(beta)) and beta[1] > 0


def test_gaussian_noiseless_recovers_exactly():
    x = np.random.default_rng(0).normal(size=(20, 3))
    zeta = np.array([0.5, 1.0, -2.0, 3.0])
    theta = gaussian_mle(x, zeta[0] + x @ zeta[1:])
    np.testing.assert_allclose(theta[:-1], zeta, atol=1e-12)
    assert theta[-1] == 1e-6


def test_poisson_mle_score_vanishes():
    rng = np.random.default_rng(1)
    x = rng.normal(size=(400, 2))
    y = rng.poisson(np.exp(0.3 + x @ [0.5, -0.2])).astype(float)
    beta = poisson_mle(x, y)
    X = np.column_stack([np.ones(400), x])
    np.testing.assert_allclose(X.T @ (y - np.exp(X @ beta)), 0.0, atol=1e-8)


def test_rank_deficient_design():
    x = np.random.default_rng(0).normal(size=(30, 1))
    data = RegressionDataset(np.hstack([x, 2 * x]), (x[:, 0] > 0).astype(float))
    with pytest.raises(SingularDesign):
        fit(LogisticModel(), data, FitConfig())


# --- fits --------------------------------------------------------------------


@pytest.mark.parametrize("kind", [1, 2])
def test_clean_logistic_recovers_truth(kind):
    data = logistic_data()
    res = fit(LogisticModel(), data, FitConfig(gamma=0.5, kind=kind))
    assert res.converged and res.grad_norm <= 1e-8
    assert np.max(np.abs(res.theta_hat - BETA)) <= 0.25
    assert np.mean((res.theta_hat - BETA) ** 2) < 0.05


@pytest.mark.parametrize("kind", [1, 2])
def test_small_gamma_matches_newton_mle(kind):
    data = logistic_data(500, 4)
    res = fit(LogisticModel(), data, FitConfig(gamma=1e-4, kind=kind, init="zero"))
    np.testing.assert_allclose(res.theta_hat, irls_logistic(data.x, data.y), atol=1e-3)


@pytest.mark.parametrize("kind", [1, 2])
def test_tiny_location_fit_matches_grid_search(kind):
    data = RegressionDataset(np.zeros((3, 0)), [-0.4, 0.3, 1.1])
    model = UnitScaleLocation()
    grid = np.round(np.arange(-10.0, 10.0 + 5e-5, 1e-4), 4)
    values = [empirical_cross_entropy(model, np.array([m]), data, 0.5, kind).value for m in grid[::100]]
    coarse = grid[::100][int(np.argmin(values))]
    fine = grid[np.abs(grid - coarse) <= 0.01]
    best = fine[int(np.argmin([empirical_cross_entropy(model, np.array([m]), data, 0.5, kind).value for m in fine]))]
    res = fit(model, data, FitConfig(gamma=0.5, kind=kind, init="zero"))
    assert abs(res.theta_hat[0] - best) <= 1e-4


def test_objective_history_non_increasing():
    data = logistic_data(400, 2)
    res = fit(LogisticModel(), data, FitConfig(gamma=1.0, kind=1, init="zero"))
    hist = np.array(res.history)
    assert hist.size >= 2 and np.all(np.diff(hist) <= 0)
    assert res.objective == hist[-1]


def test_fit_is_deterministic():
    data = logistic_data(300, 5)
    cfg = FitConfig(gamma=0.5, kind=2, init="random", seed=9)
    a, b = fit(LogisticModel(), data, cfg), fit(LogisticModel(), data, cfg)
    assert a.theta_hat.tobytes() == b.theta_hat.tobytes()
    assert a.objective == b.objective and a.iters == b.iters


def test_gaussian_scale_stays_positive_and_types_agree():
    rng = np.random.default_rng(6)
    x = rng.normal(size=(200, 2))
    y = 1.0 + x @ [2.0, -1.0] + 0.3 * rng.standard_normal(200)
    y[:20] += 15.0
    fits = [fit(GaussianLinearModel(), RegressionDataset(x, y), FitConfig(gamma=0.5, kind=k)) for k in (1, 2)]
    assert all(f.theta_hat[-1] > 0 for f in fits)
    np.testing.assert_allclose(fits[0].theta_hat, fits[1].theta_hat, atol=1e-5)
    # the robust fit ignores the shifted block
    np.testing.assert_allclose(fits[0].theta_hat[:3], [1.0, 2.0, -1.0], atol=0.1)


def test_poisson_fit_clean():
    rng = np.random.default_rng(7)
    x = rng.normal(size=(800, 1))
    y = rng.poisson(np.exp(1.0 + 0.5 * x[:, 0])).astype(float)
    res = fit(PoissonModel(), RegressionDataset(x, y), FitConfig(gamma=0.5))
    assert res.converged
    np.testing.assert_allclose(res.theta_hat, [1.0, 0.5], atol=0.1)


def test_converged_flag_respects_tolerance():
    data = logistic_data(200, 8)
    res = fit(LogisticModel(), data, FitConfig(gamma=0.5, max_iters=1, init="zero"))
    assert not res.converged or res.grad_norm <= 1e-8
    assert res.iters <= 1


# --- optimizer ---------------------------------------------------------------


def test_bfgs_rosenbrock():
    def rosen(u):
        a, b = u
        return (1 - a) ** 2 + 100 * (b - a * a) ** 2, np.array([-2 * (1 - a) - 400 * a * (b - a * a), 200 * (b - a * a)])

    u, f, g, iters, converged, _, hist = bfgs(rosen, [-1.2, 1.0], max_iters=500)
    assert converged
    np.testing.assert_allclose(u, [1.0, 1.0], atol=1e-6)
    assert np.all(np.diff(hist) <= 0)


def test_bfgs_nonfinite_start():
    with pytest.raises(NoDescent):
        bfgs(lambda u: (float("nan"), np.zeros(1)), [0.0])


def test_bfgs_no_descent_at_start():
    # the reported gradient points uphill, so no step can satisfy the Armijo test
    with pytest.raises(NoDescent):
        bfgs(lambda u: (float(u @ u), -2 * u - 1.0), np.zeros(2))


def test_multistart_keeps_lowest_objective():
    data = logistic_data(300, 1)
    cfg = FitConfig(gamma=0.5, kind=1)
    best = fit_multistart(LogisticModel(), data, cfg, ["mle", "zero", BETA])
    singles = [fit(LogisticModel(), data, FitConfig(gamma=0.5, kind=1, init=i)).objective for i in ("mle", "zero", BETA)]
    assert best.objective == min(singles)


def test_mle_init_unknown_model():
    with pytest.raises(TypeError):
        mle_init(UnitScaleLocation(), RegressionDataset(np.zeros((3, 0)), [0.0, 1.0, 2.0]))
