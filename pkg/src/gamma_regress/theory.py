"""Quadrature checks of the robustness results for the two divergence types.

All quantities are population values computed on a ``Population`` by
Gauss-Legendre quadrature, so the checks carry no Monte Carlo noise. The
reweighted covariate measure (1 - eps(x)) g(x) is left unnormalized; its
total mass cancels in every type 1 divergence.
"""

from dataclasses import asdict, dataclass
import itertools
import math

import numpy as np
from scipy.special import logsumexp

from .divergence import (
    CovariateComponent,
    Kind,
    PointMass,
    Population,
    _combine,
    _cross_on_rule,
    _log_inner,
    _log_outlier_power,
    _self_on_rule,
    check_gamma,
    transform,
)
from .models import LogisticModel, PoissonModel
from .quadrature import QuadratureSpec


@dataclass(frozen=True)
class Theorem1Report:
    lhs: float
    rhs: float
    gap: float
    nu: float


@dataclass(frozen=True)
class PythagoreanReport:
    lhs: float
    rhs_a: float
    rhs_b: float
    residual: float
    nu_value: float


@dataclass(frozen=True)
class Type2BiasReport:
    argmin_type1: tuple
    argmin_type2: tuple
    bias_type1: float
    bias_type2: float
    grid_step: float


def contamination_nu(population, theta, gamma, quadrature=None):
    """nu_{f_theta, gamma} over the outlier covariate law eps(x) g(x) / int eps g.

    Zero when the population carries no contamination mass.
    """
    gamma = check_gamma(gamma)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    mask = rule.eps > 0
    if not mask.any():
        return 0.0
    x = rule.x[mask]
    log_w = rule.log_w[mask] + np.log(rule.eps[mask])
    log_pow = _log_outlier_power(population, population.model, np.asarray(theta, dtype=float), x, gamma)
    return float(math.exp((logsumexp(log_w + log_pow) - logsumexp(log_w)) / gamma))


def check_theorem1(population, theta, gamma, quadrature=None):
    """Compare the transformed type 1 cross entropy under g with the clean one under (1 - eps) g."""
    gamma = check_gamma(gamma)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    model = population.model
    d_g = _cross_on_rule(population, model, theta, rule, gamma, Kind.TYPE1)
    d_clean = _cross_on_rule(population, model, theta, rule.reweighted_clean(), gamma, Kind.TYPE1, clean_only=True)
    lhs, rhs = float(transform(d_g, gamma)), float(transform(d_clean, gamma))
    return Theorem1Report(lhs, rhs, abs(lhs - rhs), contamination_nu(population, theta, gamma, spec))


def check_pythagorean(population, theta, gamma, quadrature=None):
    """D1(g, f_theta) against D1(g, f_theta*) + D1(f_theta*, f_theta; (1 - eps) g)."""
    gamma = check_gamma(gamma)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    clean_rule = rule.reweighted_clean()
    model = population.model
    theta_star = np.array(population.theta)
    d_gg = _self_on_rule(population, rule, gamma, Kind.TYPE1, spec)
    d_g_theta = _cross_on_rule(population, model, theta, rule, gamma, Kind.TYPE1)
    d_g_star = _cross_on_rule(population, model, theta_star, rule, gamma, Kind.TYPE1)
    d_c_theta = _cross_on_rule(population, model, theta, clean_rule, gamma, Kind.TYPE1, clean_only=True)
    d_c_star = _self_on_rule(population, clean_rule, gamma, Kind.TYPE1, spec, clean_only=True)
    rhs_b = d_c_theta - d_c_star
    # d(g, g) cancels in the residual; form it without the subtraction
    residual = (d_g_theta - d_g_star) - rhs_b
    nu = max(
        contamination_nu(population, theta, gamma, spec),
        contamination_nu(population, theta_star, gamma, spec),
    )
    return PythagoreanReport(
        lhs=float(d_g_theta - d_gg),
        rhs_a=float(d_g_star - d_gg),
        rhs_b=float(rhs_b),
        residual=float(residual),
        nu_value=nu,
    )


def population_objectives(population, theta, gamma, quadrature=None, rule=None):
    """Population (type 1, type 2) cross entropies sharing one set of inner integrals."""
    spec = quadrature or QuadratureSpec()
    rule = rule if rule is not None else population.rule(spec)
    theta = np.asarray(theta, dtype=float)
    model = population.model
    log_p = model.log_power_integral(theta, rule.x, gamma)
    log_inner = _log_inner(population, model, theta, rule, gamma)
    return (
        float(_combine(rule.log_w, log_inner, log_p, gamma, Kind.TYPE1)),
        float(_combine(rule.log_w, log_inner, log_p, gamma, Kind.TYPE2)),
    )


def grid_points(grid):
    axes = [np.asarray(a, dtype=float) for a in grid]
    return np.array(list(itertools.product(*axes))), axes


def check_type2_bias(population, gamma, grid, quadrature=None):
    """Population argmins of both cross entropies over a Cartesian parameter grid.

    ``grid`` holds one 1-D array per parameter coordinate. Bias is the
    Euclidean distance from the clean parameter; ``grid_step`` is the
    largest spacing along any axis.
    """
    gamma = check_gamma(gamma)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    points, axes = grid_points(grid)
    values = np.array([population_objectives(population, t, gamma, spec, rule) for t in points])
    a1 = points[int(np.argmin(values[:, 0]))]
    a2 = points[int(np.argmin(values[:, 1]))]
    star = np.array(population.theta)
    step = max(float(np.max(np.diff(a))) for a in axes if a.size > 1)
    return Type2BiasReport(
        argmin_type1=tuple(a1.tolist()),
        argmin_type2=tuple(a2.tolist()),
        bias_type1=float(np.linalg.norm(a1 - star)),
        bias_type2=float(np.linalg.norm(a2 - star)),
        grid_step=step,
    )


def type2_homogeneous_ratio(population, theta, gamma, quadrature=None):
    """(transformed type 2 under g divided by (1 - eps), transformed type 2 of the clean model).

    Meaningful for homogeneous contamination, where the two agree up to O(nu^gamma).
    """
    gamma = check_gamma(gamma)
    spec = quadrature or QuadratureSpec()
    rule = population.rule(spec)
    eps = np.unique(np.round(rule.eps, 14))
    if eps.size != 1:
        raise ValueError("type 2 ratio identity needs a constant outlier ratio")
    model = population.model
    d_g = _cross_on_rule(population, model, theta, rule, gamma, Kind.TYPE2)
    d_c = _cross_on_rule(population, model, theta, rule, gamma, Kind.TYPE2, clean_only=True)
    return float(transform(d_g, gamma)) / (1.0 - float(eps[0])), float(transform(d_c, gamma))


def logistic_leverage_population(theta_star=(0.0, 1.0), epsilon=0.1, location=20.0, sd=0.5, response=0.0):
    """One-covariate analogue of the simulation design.

    Clean x ~ N(0, 1); a fraction ``epsilon`` of rows sits at
    N(location, sd^2) with the response fixed at ``response``.
    """
    comps = [CovariateComponent(1.0 - epsilon, (0.0,), 1.0, 0.0)]
    if epsilon > 0:
        comps.append(CovariateComponent(epsilon, (location,), sd**2, 1.0))
    return Population(LogisticModel(), theta_star, tuple(comps), PointMass(response))


def poisson_homogeneous_population(theta_star=(1.0, 0.5), epsilon=0.1, response=60.0):
    """Clean x ~ N(0, 1); a constant fraction ``epsilon`` of counts is replaced by ``response``."""
    comps = (CovariateComponent(1.0, (0.0,), 1.0, epsilon),)
    return Population(PoissonModel(), theta_star, comps, PointMass(response))


def poisson_leverage_population(theta_star=(1.0, 0.5), epsilon=0.1, location=4.0, sd=0.5, response=0.0):
    """Leverage contamination for counts: outlier rows sit at N(location, sd^2) with count ``response``."""
    comps = [CovariateComponent(1.0 - epsilon, (0.0,), 1.0, 0.0)]
    if epsilon > 0:
        comps.append(CovariateComponent(epsilon, (location,), sd**2, 1.0))
    return Population(PoissonModel(), theta_star, tuple(comps), PointMass(response))


SCENARIOS = {
    "logistic-leverage": logistic_leverage_population,
    "poisson-homogeneous": poisson_homogeneous_population,
    "poisson-leverage": poisson_leverage_population,
}


def sweep(populations, theta, gamma, quadrature=None):
    """Tail-approximation and Pythagorean reports for each population in order."""
    return [
        (check_theorem1(pop, theta, gamma, quadrature), check_pythagorean(pop, theta, gamma, quadrature))
        for pop in populations
    ]


def report_dict(report, **descriptor):
    out = dict(descriptor)
    out.update(asdict(report))
    return out
