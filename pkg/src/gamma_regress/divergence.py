"""Gamma cross entropies for regression, empirical and population.

Two extensions of the gamma cross entropy to conditional densities differ in
where the covariate base measure enters:

* type 1 normalizes each f(y|x)^gamma by its own power integral at x and
  takes a single log over the joint average;
* type 2 averages the numerator and the power integral over x separately.

Everything is evaluated in log space (log-sum-exp) because the outlier
covariates used in the experiments push linear predictors to |eta| ~ 40.
"""

from dataclasses import dataclass, field
import enum
import math
from typing import Callable, Union

import numpy as np
from scipy.special import logsumexp, softmax

from .errors import DegenerateObjective, NonFiniteDensity, QuadratureFailure
from .models import ConditionalModel
from .quadrature import QuadratureSpec, composite_rule, normal_logpdf, normal_rule


class Kind(enum.IntEnum):
    TYPE1 = 1
    TYPE2 = 2

    @classmethod
    def parse(cls, value):
        if isinstance(value, cls):
            return value
        if isinstance(value, str):
            key = value.strip().lower().replace("-", "").replace("_", "")
            aliases = {"1": cls.TYPE1, "type1": cls.TYPE1, "2": cls.TYPE2, "type2": cls.TYPE2}
            if key in aliases:
                return aliases[key]
            raise ValueError(f"unknown divergence kind {value!r}")
        return cls(int(value))

    @property
    def label(self):
        return f"Type{int(self)}"


def check_gamma(gamma):
    gamma = float(gamma)
    if not gamma > 0.0 or not math.isfinite(gamma):
        raise ValueError(f"gamma must be a positive finite number, got {gamma}")
    return gamma


@dataclass(frozen=True, eq=False)
class RegressionDataset:
    """Paired observations; ``x`` excludes the intercept column."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim == 1:
            x = x[:, None]
        if y.ndim != 1 or x.ndim != 2:
            raise ValueError("expected x of shape (n, p) and y of shape (n,)")
        if x.shape[0] != y.shape[0]:
            raise ValueError(f"x has {x.shape[0]} rows but y has {y.shape[0]} entries")
        if y.shape[0] < 1:
            raise ValueError("dataset must contain at least one observation")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite entries")
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self):
        return self.y.shape[0]

    @property
    def p(self):
        return self.x.shape[1]

    def subset(self, mask):
        return RegressionDataset(self.x[mask], self.y[mask])


@dataclass(frozen=True)
class CrossEntropyValue:
    value: float
    kind: Kind
    transformed: bool = False

    def __float__(self):
        return float(self.value)


def transform(d, gamma):
    """Monotone map d -> -exp(-gamma d); keeps argmins, lands in (-inf, 0)."""
    return -np.exp(-check_gamma(gamma) * np.asarray(d, dtype=float))


def transformed_cross_entropy(value, gamma):
    if isinstance(value, CrossEntropyValue):
        if value.transformed:
            return value
        return CrossEntropyValue(float(transform(value.value, gamma)), value.kind, True)
    return float(transform(value, gamma))


# ---------------------------------------------------------------------------
# empirical objectives
# ---------------------------------------------------------------------------


def _point_terms(model, theta, data, gamma, gradient):
    log_f = np.asarray(model.log_density(theta, data.x, data.y), dtype=float)
    log_p = np.asarray(model.log_power_integral(theta, data.x, gamma), dtype=float)
    if np.any(np.isnan(log_f)) or np.any(log_f == np.inf) or not np.all(np.isfinite(log_p)):
        raise NonFiniteDensity(f"{model.name}: non-finite density or power integral at theta={theta}")
    if not gradient:
        return log_f, log_p, None, None
    return (
        log_f,
        log_p,
        model.log_density_gradient(theta, data.x, data.y),
        model.log_power_integral_gradient(theta, data.x, gamma),
    )


def _objective(model, theta, data, gamma, kind, gradient):
    gamma = check_gamma(gamma)
    kind = Kind.parse(kind)
    log_f, log_p, g_f, g_p = _point_terms(model, theta, data, gamma, gradient)
    log_n = math.log(data.n)
    if kind is Kind.TYPE1:
        a = gamma * log_f - (gamma / (1.0 + gamma)) * log_p
        lse = logsumexp(a)
        if not np.isfinite(lse):
            raise DegenerateObjective("all model densities vanish at the data")
        value = -(lse - log_n) / gamma
        if not gradient:
            return value, None
        w = softmax(a)
        return value, -(w @ (g_f - g_p / (1.0 + gamma)))
    a = gamma * log_f
    lse = logsumexp(a)
    if not np.isfinite(lse):
        raise DegenerateObjective("all model densities vanish at the data")
    value = -(lse - log_n) / gamma + (logsumexp(log_p) - log_n) / (1.0 + gamma)
    if not gradient:
        return value, None
    return value, -(softmax(a) @ g_f) + (softmax(log_p) @ g_p) / (1.0 + gamma)


def empirical_cross_entropy(model, theta, data, gamma, kind):
    value, _ = _objective(model, theta, data, gamma, kind, gradient=False)
    return CrossEntropyValue(float(value), Kind.parse(kind))


def empirical_cross_entropy_type1(model, theta, data, gamma):
    return empirical_cross_entropy(model, theta, data, gamma, Kind.TYPE1)


def empirical_cross_entropy_type2(model, theta, data, gamma):
    return empirical_cross_entropy(model, theta, data, gamma, Kind.TYPE2)


def empirical_objective(model, theta, data, gamma, kind):
    """Value and gradient (w.r.t. the natural parameters) of the empirical cross entropy."""
    value, grad = _objective(model, theta, data, gamma, kind, gradient=True)
    return float(value), grad


# ---------------------------------------------------------------------------
# populations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class PointMass:
    """Dirac outlier distribution at y(x); ``where`` is a constant or a callable of x."""

    where: Union[float, Callable] = 0.0

    def at(self, x):
        if callable(self.where):
            return np.asarray(self.where(x), dtype=float)
        return np.full(x.shape[0], float(self.where))


@dataclass(frozen=True)
class ModelOutlier:
    """Outlier distribution from the same family with a different parameter."""

    theta: tuple

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))


@dataclass(frozen=True)
class CovariateComponent:
    """Normal covariate component with its within-component contamination rate.

    ``contaminated`` is a constant in [0, 1] or a callable of x (rows) giving
    the fraction of responses drawn from the outlier distribution.
    """

    weight: float
    mean: tuple
    cov: object
    contaminated: Union[float, Callable] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mean", tuple(float(m) for m in np.atleast_1d(self.mean)))
        if not 0.0 <= self.weight <= 1.0:
            raise ValueError(f"component weight must lie in [0, 1], got {self.weight}")
        if not callable(self.contaminated) and not 0.0 <= self.contaminated <= 1.0:
            raise ValueError(f"contamination fraction must lie in [0, 1], got {self.contaminated}")

    def cov_matrix(self):
        cov = np.asarray(self.cov, dtype=float)
        p = len(self.mean)
        return np.eye(p) * cov if cov.ndim == 0 else cov

    def contaminated_at(self, x):
        if callable(self.contaminated):
            return np.clip(np.asarray(self.contaminated(x), dtype=float), 0.0, 1.0)
        return np.full(x.shape[0], float(self.contaminated))


@dataclass(frozen=True)
class Population:
    """Joint law g(x, y) = g(x) [(1 - eps(x)) f(y|x; theta) + eps(x) delta(y|x)].

    g(x) is the normal mixture given by ``components``; eps(x) is implied by
    each component's contamination fraction.
    """

    model: ConditionalModel
    theta: tuple
    components: tuple
    outlier: object = field(default_factory=PointMass)

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(t) for t in self.theta))
        object.__setattr__(self, "components", tuple(self.components))
        total = sum(c.weight for c in self.components)
        if not math.isclose(total, 1.0, abs_tol=1e-12):
            raise ValueError(f"component weights must sum to 1, got {total}")
        dims = {len(c.mean) for c in self.components}
        if len(dims) != 1:
            raise ValueError("covariate components disagree on dimension")

    @classmethod
    def clean(cls, model, theta, mean, cov):
        return cls(model, theta, (CovariateComponent(1.0, mean, cov, 0.0),))

    @property
    def p(self):
        return len(self.components[0].mean)

    def covariate_logpdf(self, x):
        parts = [
            math.log(c.weight) + normal_logpdf(x, c.mean, c.cov_matrix()) for c in self.components if c.weight > 0
        ]
        return logsumexp(np.stack(parts), axis=0)

    def outlier_ratio(self, x):
        """eps(x) = sum_c w_c phi_c(x) e_c(x) / g(x)."""
        x = np.atleast_2d(np.asarray(x, dtype=float))
        num, den = [], []
        for c in self.components:
            if c.weight == 0:
                continue
            lp = math.log(c.weight) + normal_logpdf(x, c.mean, c.cov_matrix())
            den.append(lp)
            with np.errstate(divide="ignore"):
                num.append(lp + np.log(c.contaminated_at(x)))
        ratio = np.exp(logsumexp(np.stack(num), axis=0) - logsumexp(np.stack(den), axis=0))
        return np.clip(ratio, 0.0, 1.0)

    def rule(self, spec):
        return _rule(self, spec)


@dataclass(frozen=True, eq=False)
class _Rule:
    """Quadrature nodes for g(x) with the conditional law evaluated there."""

    x: np.ndarray
    log_w: np.ndarray
    eps: np.ndarray

    def reweighted_clean(self):
        """Base measure (1 - eps(x)) g(x) with the clean conditional."""
        with np.errstate(divide="ignore"):
            log_w = self.log_w + np.log1p(-self.eps)
        keep = np.isfinite(log_w)
        return _Rule(self.x[keep], log_w[keep], np.zeros(int(keep.sum())))


def _rule(population, spec):
    xs, lws = [], []
    for c in population.components:
        if c.weight == 0:
            continue
        x, log_w = normal_rule(c.mean, c.cov_matrix(), spec)
        xs.append(x)
        lws.append(log_w + math.log(c.weight))
    x = np.concatenate(xs)
    return _Rule(x, np.concatenate(lws), population.outlier_ratio(x))


def _check_same_family(population, model):
    if model is not None and type(model) is not type(population.model):
        raise ValueError(
            f"population conditional is {population.model.name} but the fitted family is {model.name}; "
            "cross integrals need a common family"
        )


def _log_outlier_power(population, model, theta, x, gamma):
    """log of int delta(y|x) f(y|x; theta)^gamma dy at each node."""
    outlier = population.outlier
    if isinstance(outlier, ModelOutlier):
        return model.log_cross_integral(np.array(outlier.theta), theta, x, gamma)
    return gamma * model.log_density(theta, x, outlier.at(x))


def _log_inner(population, model, theta, rule, gamma, clean_only=False):
    """log of int g(y|x) f(y|x; theta)^gamma dy at each node."""
    clean = model.log_cross_integral(np.array(population.theta), theta, rule.x, gamma)
    if clean_only or not np.any(rule.eps > 0):
        return clean
    with np.errstate(divide="ignore"):
        out = _log_outlier_power(population, model, theta, rule.x, gamma)
        return np.logaddexp(np.log1p(-rule.eps) + clean, np.log(rule.eps) + out)


def _combine(log_w, log_inner, log_p, gamma, kind):
    if not np.any(np.isfinite(log_p)):
        raise QuadratureFailure("power integral underflows to zero at every quadrature node")
    if kind is Kind.TYPE1:
        lse = logsumexp(log_w + log_inner - (gamma / (1.0 + gamma)) * log_p)
        return -lse / gamma
    return -logsumexp(log_w + log_inner) / gamma + logsumexp(log_w + log_p) / (1.0 + gamma)


def _cross_on_rule(population, model, theta, rule, gamma, kind, clean_only=False):
    theta = np.asarray(theta, dtype=float)
    log_p = model.log_power_integral(theta, rule.x, gamma)
    log_inner = _log_inner(population, model, theta, rule, gamma, clean_only)
    return _combine(rule.log_w, log_inner, log_p, gamma, kind)


def _log_self_power(population, rule, gamma, spec):
    """log of int g(y|x)^{1+gamma} dy at each node."""
    model = population.model
    theta = np.array(population.theta)
    eps = rule.eps
    if not np.any(eps > 0):
        return model.log_power_integral(theta, rule.x, gamma)
    outlier = population.outlier
    if model.discrete:
        ys = model.support(theta, rule.x)
        if isinstance(outlier, PointMass):
            ys = np.union1d(ys, np.unique(outlier.at(rule.x)))
        else:
            ys = np.union1d(ys, model.support(np.array(outlier.theta), rule.x))
        n, m = rule.x.shape[0], ys.shape[0]
        xr = np.repeat(rule.x, m, axis=0)
        yr = np.tile(ys, n)
        log_clean = model.log_density(theta, xr, yr).reshape(n, m)
        if isinstance(outlier, PointMass):
            hit = (ys[None, :] == outlier.at(rule.x)[:, None]).astype(float)
            with np.errstate(divide="ignore"):
                log_out = np.log(hit)
        else:
            log_out = model.log_density(np.array(outlier.theta), xr, yr).reshape(n, m)
    else:
        if not isinstance(outlier, ModelOutlier):
            raise ValueError("a point-mass outlier has no density for a continuous response; d(g, g) is undefined")
        h = spec.response_half_width
        windows = np.stack(
            [
                model.response_window(theta, rule.x, h),
                model.response_window(np.array(outlier.theta), rule.x, h),
            ],
            axis=1,
        )
        ys, wy = composite_rule(windows, spec.response_nodes)
        n, m = ys.shape
        xr = np.repeat(rule.x, m, axis=0)
        log_clean = model.log_density(theta, xr, ys.ravel()).reshape(n, m)
        log_out = model.log_density(np.array(outlier.theta), xr, ys.ravel()).reshape(n, m)
    with np.errstate(divide="ignore"):
        log_g = np.logaddexp(np.log1p(-eps)[:, None] + log_clean, np.log(eps)[:, None] + log_out)
    if model.discrete:
        return logsumexp((1.0 + gamma) * log_g, axis=1)
    return logsumexp((1.0 + gamma) * log_g, b=wy, axis=1)


def _self_on_rule(population, rule, gamma, kind, spec, clean_only=False):
    if clean_only:
        log_s = population.model.log_power_integral(np.array(population.theta), rule.x, gamma)
    else:
        log_s = _log_self_power(population, rule, gamma, spec)
    return _combine(rule.log_w, log_s, log_s, gamma, kind)


def population_cross_entropy(population, theta, gamma, kind, quadrature=None, model=None):
    """d_{gamma,kind}(g(y|x), f(y|x; theta); g(x)) by nested quadrature.

    The outer integral runs over Gauss-Legendre nodes for each normal
    covariate component; the inner integral over y uses each model's closed
    form (exact sums for discrete responses).
    """
    _check_same_family(population, model)
    gamma = check_gamma(gamma)
    kind = Kind.parse(kind)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    value = _cross_on_rule(population, population.model, theta, rule, gamma, kind)
    return CrossEntropyValue(float(value), kind)


def self_cross_entropy(population, gamma, kind, quadrature=None):
    """d_{gamma,kind}(g, g; g(x)), the constant that turns cross entropy into divergence."""
    gamma = check_gamma(gamma)
    kind = Kind.parse(kind)
    spec = quadrature or QuadratureSpec()
    return CrossEntropyValue(float(_self_on_rule(population, population.rule(spec), gamma, kind, spec)), kind)


def gamma_divergence(population, theta, gamma, kind, quadrature=None, model=None):
    """D_{gamma,kind}(g, f_theta; g(x)) = d(g, f_theta) - d(g, g)."""
    spec = quadrature or QuadratureSpec()
    d_gf = population_cross_entropy(population, theta, gamma, kind, spec, model)
    d_gg = self_cross_entropy(population, gamma, kind, spec)
    return d_gf.value - d_gg.value
