"""Parametric conditional models f(y|x; theta).

Each model is a stateless family: the parameter vector is passed to every
method, so one instance can be shared freely between threads and processes.
Covariates never include the intercept column; every model prepends the
implicit leading 1 itself, which puts the intercept at ``theta[0]``.

All methods are vectorized over rows. Passing a single covariate vector
(1-D ``x``) returns a scalar (or a 1-D gradient) instead of an array.
"""

import math

import numpy as np
from scipy.special import expit, gammaln, log_expit, logsumexp
from scipy.stats import poisson

from .errors import NonFiniteDensity, TruncationNotConverged, UnsupportedResponse

ETA_CLAMP = 700.0
LOG_2PI = math.log(2.0 * math.pi)


def _rows(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    if x.ndim != 2:
        raise ValueError(f"covariates must be 1-D or 2-D, got shape {x.shape}")
    return x, False


def _out(v, single):
    return v[0] if single else v


def add_intercept(x):
    """Prepend the implicit leading column of ones."""
    x = np.asarray(x, dtype=float)
    return np.hstack([np.ones((x.shape[0], 1)), x])


class ConditionalModel:
    """Interface shared by the concrete families below."""

    name = "abstract"
    discrete = False

    def n_params(self, p):
        return p + 1

    def check_theta(self, theta, p):
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_params(p),):
            raise ValueError(
                f"{self.name}: expected {self.n_params(p)} parameters for p={p}, got shape {theta.shape}"
            )
        if not np.all(np.isfinite(theta)):
            raise ValueError(f"{self.name}: non-finite parameter vector")
        return theta

    def check_response(self, y):
        return np.asarray(y, dtype=float)

    # Unconstrained reparametrization used by the optimizer; identity by default.
    def to_unconstrained(self, theta):
        return np.array(theta, dtype=float)

    def from_unconstrained(self, u):
        return np.array(u, dtype=float)

    def unconstrained_jacobian(self, u):
        """Diagonal of d theta / d u."""
        return np.ones_like(np.asarray(u, dtype=float))

    def power_integral(self, theta, x, gamma):
        return np.exp(self.log_power_integral(theta, x, gamma))

    def density(self, theta, x, y):
        return np.exp(self.log_density(theta, x, y))


class LogisticModel(ConditionalModel):
    """Binary logistic regression, Pr(y=1|x) = expit(beta_0 + x^T beta_{1:})."""

    name = "logistic"
    discrete = True

    def _eta(self, theta, X):
        theta = self.check_theta(theta, X.shape[1])
        return np.clip(theta[0] + X @ theta[1:], -ETA_CLAMP, ETA_CLAMP)

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        bad = (y != 0.0) & (y != 1.0)
        if np.any(bad):
            raise UnsupportedResponse(f"logistic responses must be 0 or 1, got {y[bad][:3]}")
        return y

    def prob(self, theta, x):
        X, single = _rows(x)
        return _out(expit(self._eta(theta, X)), single)

    def log_density(self, theta, x, y):
        X, single = _rows(x)
        y = self.check_response(np.broadcast_to(y, X.shape[:1]))
        eta = self._eta(theta, X)
        return _out(np.where(y == 1.0, log_expit(eta), log_expit(-eta)), single)

    def log_density_gradient(self, theta, x, y):
        X, single = _rows(x)
        y = self.check_response(np.broadcast_to(y, X.shape[:1]))
        eta = self._eta(theta, X)
        return _out((y - expit(eta))[:, None] * add_intercept(X), single)

    def log_power_integral(self, theta, x, gamma):
        X, single = _rows(x)
        eta = self._eta(theta, X)
        a = 1.0 + gamma
        return _out(np.logaddexp(a * log_expit(eta), a * log_expit(-eta)), single)

    def log_power_integral_gradient(self, theta, x, gamma):
        X, single = _rows(x)
        eta = self._eta(theta, X)
        a = 1.0 + gamma
        lp1, lp0 = log_expit(eta), log_expit(-eta)
        log_p = np.logaddexp(a * lp1, a * lp0)
        w1 = np.exp(a * lp1 - log_p)
        w0 = np.exp(a * lp0 - log_p)
        pi = expit(eta)
        d_eta = a * (w1 * (1.0 - pi) - w0 * pi)
        return _out(d_eta[:, None] * add_intercept(X), single)

    def log_cross_integral(self, theta_g, theta_f, x, gamma):
        """log of sum_y f(y|x; theta_g) f(y|x; theta_f)^gamma."""
        X, single = _rows(x)
        eg, ef = self._eta(theta_g, X), self._eta(theta_f, X)
        return _out(
            np.logaddexp(log_expit(eg) + gamma * log_expit(ef), log_expit(-eg) + gamma * log_expit(-ef)),
            single,
        )

    def support(self, theta, x):
        return np.array([0.0, 1.0])

    def sample_response(self, theta, x, rng):
        X, single = _rows(x)
        pi = expit(self._eta(theta, X))
        return _out((rng.random(X.shape[0]) < pi).astype(float), single)


class GaussianLinearModel(ConditionalModel):
    """Homoscedastic normal regression; theta = (zeta_0, ..., zeta_p, sigma).

    The scale does not depend on x, so this is the location-scale case where
    the power integral is constant across covariates.
    """

    name = "gaussian"
    discrete = False

    def n_params(self, p):
        return p + 2

    def check_theta(self, theta, p):
        theta = super().check_theta(theta, p)
        if theta[-1] <= 0.0:
            raise ValueError(f"gaussian: sigma must be positive, got {theta[-1]}")
        return theta

    def _loc_scale(self, theta, X):
        theta = self.check_theta(theta, X.shape[1])
        return theta[0] + X @ theta[1:-1], theta[-1]

    def location(self, theta, x):
        X, single = _rows(x)
        return _out(self._loc_scale(theta, X)[0], single)

    def to_unconstrained(self, theta):
        u = np.array(theta, dtype=float)
        u[-1] = math.log(u[-1])
        return u

    def from_unconstrained(self, u):
        theta = np.array(u, dtype=float)
        theta[-1] = math.exp(theta[-1])
        return theta

    def unconstrained_jacobian(self, u):
        jac = np.ones(len(u))
        jac[-1] = math.exp(u[-1])
        return jac

    def log_density(self, theta, x, y):
        X, single = _rows(x)
        q, sigma = self._loc_scale(theta, X)
        r = np.asarray(y, dtype=float) - q
        return _out(-0.5 * LOG_2PI - math.log(sigma) - 0.5 * (r / sigma) ** 2, single)

    def log_density_gradient(self, theta, x, y):
        X, single = _rows(x)
        q, sigma = self._loc_scale(theta, X)
        r = np.asarray(y, dtype=float) - q
        grad = np.empty((X.shape[0], X.shape[1] + 2))
        grad[:, :-1] = (r / sigma**2)[:, None] * add_intercept(X)
        grad[:, -1] = -1.0 / sigma + r**2 / sigma**3
        return _out(grad, single)

    def log_power_integral(self, theta, x, gamma):
        X, single = _rows(x)
        _, sigma = self._loc_scale(theta, X)
        value = -0.5 * gamma * (LOG_2PI + 2.0 * math.log(sigma)) - 0.5 * math.log1p(gamma)
        return _out(np.full(X.shape[0], value), single)

    def log_power_integral_gradient(self, theta, x, gamma):
        X, single = _rows(x)
        _, sigma = self._loc_scale(theta, X)
        grad = np.zeros((X.shape[0], X.shape[1] + 2))
        grad[:, -1] = -gamma / sigma
        return _out(grad, single)

    def log_cross_integral(self, theta_g, theta_f, x, gamma):
        # f_f^gamma is an unnormalized normal with variance sigma_f^2/gamma; the
        # product integral against f_g is then a normal density in the mean gap.
        X, single = _rows(x)
        qg, sg = self._loc_scale(theta_g, X)
        qf, sf = self._loc_scale(theta_f, X)
        v = sf**2 / gamma
        s2 = sg**2 + v
        value = (
            -0.5 * gamma * (LOG_2PI + 2.0 * math.log(sf))
            + 0.5 * (LOG_2PI + math.log(v))
            - 0.5 * (LOG_2PI + math.log(s2))
            - 0.5 * (qg - qf) ** 2 / s2
        )
        return _out(value, single)

    def response_window(self, theta, x, half_width):
        X, single = _rows(x)
        q, sigma = self._loc_scale(theta, X)
        return _out(np.stack([q - half_width * sigma, q + half_width * sigma], axis=-1), single)

    def sample_response(self, theta, x, rng):
        X, single = _rows(x)
        q, sigma = self._loc_scale(theta, X)
        return _out(q + sigma * rng.standard_normal(X.shape[0]), single)


class PoissonModel(ConditionalModel):
    """Log-linear Poisson regression, rate exp(beta_0 + x^T beta_{1:}).

    Power integrals are series over k = 0..K with
    K = max(50, ceil(lambda + 12 sqrt(lambda))); the neglected tail is bounded
    by the Poisson survival function at K and must sit below ``tail_tol``
    relative to the retained sum.
    """

    name = "poisson"
    discrete = True
    max_terms = 20000
    tail_tol = 1e-12

    def _eta(self, theta, X):
        theta = self.check_theta(theta, X.shape[1])
        return np.clip(theta[0] + X @ theta[1:], -ETA_CLAMP, ETA_CLAMP)

    def check_response(self, y):
        y = np.asarray(y, dtype=float)
        bad = (y < 0) | (y != np.floor(y))
        if np.any(bad):
            raise UnsupportedResponse(f"poisson responses must be non-negative integers, got {y[bad][:3]}")
        return y

    def rate(self, theta, x):
        X, single = _rows(x)
        return _out(np.exp(self._eta(theta, X)), single)

    def _cap(self, lam):
        k = np.maximum(50, np.ceil(lam + 12.0 * np.sqrt(lam))).astype(float)
        if np.any(k > self.max_terms):
            raise TruncationNotConverged(
                f"poisson rate {lam.max():.4g} needs more than {self.max_terms} series terms"
            )
        return k.astype(int)

    def _log_pmf_table(self, eta, kmax):
        k = np.arange(kmax + 1, dtype=float)
        return k[None, :] * eta[:, None] - np.exp(eta)[:, None] - gammaln(k + 1.0)[None, :], k

    def _check_tail(self, lam, caps, log_sum, power):
        # Terms beyond the cap are bounded by the pmf tail since pmf <= 1.
        tail = poisson.sf(caps, lam)
        with np.errstate(divide="ignore"):
            bad = np.log(np.maximum(tail, 1e-320)) > log_sum + math.log(self.tail_tol)
        if np.any(bad & (tail > 0)):
            raise TruncationNotConverged(
                f"poisson series tail {tail[bad].max():.3g} exceeds tolerance for power {power}"
            )

    def log_density(self, theta, x, y):
        X, single = _rows(x)
        y = self.check_response(np.broadcast_to(y, X.shape[:1]))
        eta = self._eta(theta, X)
        return _out(y * eta - np.exp(eta) - gammaln(y + 1.0), single)

    def log_density_gradient(self, theta, x, y):
        X, single = _rows(x)
        y = self.check_response(np.broadcast_to(y, X.shape[:1]))
        eta = self._eta(theta, X)
        return _out((y - np.exp(eta))[:, None] * add_intercept(X), single)

    def _power_terms(self, theta, X, gamma):
        eta = self._eta(theta, X)
        lam = np.exp(eta)
        caps = self._cap(lam)
        table, k = self._log_pmf_table(eta, caps.max())
        terms = np.where(k[None, :] <= caps[:, None], (1.0 + gamma) * table, -np.inf)
        log_p = logsumexp(terms, axis=1)
        self._check_tail(lam, caps, log_p, 1.0 + gamma)
        return terms, log_p, k, lam

    def log_power_integral(self, theta, x, gamma):
        X, single = _rows(x)
        return _out(self._power_terms(theta, X, gamma)[1], single)

    def log_power_integral_gradient(self, theta, x, gamma):
        X, single = _rows(x)
        terms, log_p, k, lam = self._power_terms(theta, X, gamma)
        w = np.exp(terms - log_p[:, None])
        d_eta = (1.0 + gamma) * (w @ k - lam)
        return _out(d_eta[:, None] * add_intercept(X), single)

    def log_cross_integral(self, theta_g, theta_f, x, gamma):
        X, single = _rows(x)
        eg, ef = self._eta(theta_g, X), self._eta(theta_f, X)
        caps = np.maximum(self._cap(np.exp(eg)), self._cap(np.exp(ef)))
        tg, k = self._log_pmf_table(eg, caps.max())
        tf, _ = self._log_pmf_table(ef, caps.max())
        terms = np.where(k[None, :] <= caps[:, None], tg + gamma * tf, -np.inf)
        return _out(logsumexp(terms, axis=1), single)

    def support(self, theta, x):
        X, _ = _rows(x)
        lam = np.exp(self._eta(theta, X))
        return np.arange(self._cap(lam).max() + 1, dtype=float)

    def sample_response(self, theta, x, rng):
        X, single = _rows(x)
        return _out(rng.poisson(np.exp(self._eta(theta, X))).astype(float), single)


MODELS = {
    "logistic": LogisticModel,
    "gaussian": GaussianLinearModel,
    "poisson": PoissonModel,
}


def get_model(name):
    try:
        return MODELS[name]()
    except KeyError:
        raise ValueError(f"unknown model {name!r}; choose from {sorted(MODELS)}") from None


def check_finite_log_density(values):
    values = np.asarray(values)
    if np.any(np.isnan(values)) or np.any(values == np.inf):
        raise NonFiniteDensity("density evaluation produced NaN or infinity")
    return values
