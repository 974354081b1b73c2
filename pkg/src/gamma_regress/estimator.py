"""Minimum gamma cross entropy estimation.

``fit`` minimizes the empirical type 1 or type 2 cross entropy with BFGS and
a backtracking Armijo line search. The optimizer works in unconstrained
coordinates (log sigma for the Gaussian scale) and the starting point is
the maximum likelihood fit unless configured otherwise.
"""

from dataclasses import dataclass, field
import math
import warnings

import numpy as np
from scipy.special import expit, logit

from .divergence import Kind, check_gamma, empirical_objective
from .errors import NoDescent, SeparationDetected, SingularDesign
from .models import GaussianLinearModel, LogisticModel, PoissonModel, add_intercept

ARMIJO_C1 = 1e-4
MAX_BACKTRACKS = 60


@dataclass(frozen=True)
class FitConfig:
    """Optimizer settings.

    init: "mle", "zero", "random" (standard normal draw from ``seed``) or an
    explicit parameter vector in natural coordinates.
    """

    gamma: float = 0.5
    kind: Kind = Kind.TYPE1
    init: object = "mle"
    max_iters: int = 500
    grad_tol: float = 1e-8
    step_tol: float = 1e-10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "gamma", check_gamma(self.gamma))
        object.__setattr__(self, "kind", Kind.parse(self.kind))
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.grad_tol <= 0 or self.step_tol <= 0:
            raise ValueError("tolerances must be positive")
        if not isinstance(self.init, str):
            object.__setattr__(self, "init", tuple(float(v) for v in self.init))
        elif self.init not in ("mle", "zero", "random"):
            raise ValueError(f"unknown init {self.init!r}")


@dataclass(frozen=True, eq=False)
class FitResult:
    theta_hat: np.ndarray
    objective: float
    converged: bool
    iters: int
    grad_norm: float
    message: str = ""
    history: tuple = field(default=(), repr=False)


def _check_rank(design):
    if np.linalg.matrix_rank(design) < design.shape[1]:
        raise SingularDesign(f"design matrix with intercept has rank < {design.shape[1]}")


def _newton_glm(design, y, mean_fn, ridge=0.0, max_iter=100, tol=1e-10):
    """Newton-Raphson for a canonical-link GLM; returns coefficients."""
    beta = np.zeros(design.shape[1])
    penalty = ridge * np.eye(design.shape[1])
    penalty[0, 0] = 0.0
    for _ in range(max_iter):
        eta = design @ beta
        mu, var = mean_fn(eta)
        score = design.T @ (y - mu) - penalty @ beta
        hess = design.T @ (var[:, None] * design) + penalty
        try:
            step = np.linalg.solve(hess, score)
        except np.linalg.LinAlgError:
            raise SeparationDetected("information matrix became singular") from None
        beta = beta + step
        if np.max(np.abs(step)) < tol:
            return beta
        if np.max(np.abs(design @ beta)) > 30.0 and ridge == 0.0:
            # fitted probabilities pinned to 0/1: the likelihood has no finite maximizer
            mu, _ = mean_fn(design @ beta)
            if np.max(np.abs(y - mu)) < 1e-6:
                raise SeparationDetected("responses are perfectly separated by the covariates")
    if ridge == 0.0:
        raise SeparationDetected("Newton iterations did not settle; likely (quasi-)separation")
    return beta


def _logistic_moments(eta):
    pi = expit(eta)
    return pi, pi * (1.0 - pi)


def _poisson_moments(eta):
    lam = np.exp(np.clip(eta, -700, 700))
    return lam, lam


def logistic_mle(x, y, ridge=1e-3):
    """Logistic maximum likelihood; falls back to ridge-damped Newton on separation."""
    design = add_intercept(x)
    _check_rank(design)
    if design.shape[1] == 1:
        ybar = float(np.mean(y))
        if 0.0 < ybar < 1.0:
            return np.array([logit(ybar)])
    try:
        return _newton_glm(design, y, _logistic_moments)
    except SeparationDetected as exc:
        warnings.warn(f"{exc}; using ridge-damped Newton (ridge={ridge})", stacklevel=2)
        return _newton_glm(design, y, _logistic_moments, ridge=ridge)


def poisson_mle(x, y):
    design = add_intercept(x)
    _check_rank(design)
    beta = np.zeros(design.shape[1])
    beta[0] = math.log(max(float(np.mean(y)), 1e-8))
    for _ in range(200):
        eta = design @ beta
        lam = np.exp(np.clip(eta, -700, 700))
        step = np.linalg.solve(design.T @ (lam[:, None] * design), design.T @ (y - lam))
        loglik = float(np.sum(y * eta - lam))
        t = 1.0
        while t > 1e-10:
            cand = beta + t * step
            eta_c = design @ cand
            if np.sum(y * eta_c - np.exp(np.clip(eta_c, -700, 700))) >= loglik:
                break
            t *= 0.5
        beta = beta + t * step
        if np.max(np.abs(t * step)) < 1e-10:
            break
    return beta


def gaussian_mle(x, y, sigma_floor=1e-6):
    design = add_intercept(x)
    _check_rank(design)
    zeta, *_ = np.linalg.lstsq(design, y, rcond=None)
    sigma = math.sqrt(float(np.mean((y - design @ zeta) ** 2)))
    return np.append(zeta, max(sigma, sigma_floor))


def mle_init(model, data):
    """Maximum likelihood starting point for ``fit``."""
    if isinstance(model, LogisticModel):
        return logistic_mle(data.x, model.check_response(data.y))
    if isinstance(model, PoissonModel):
        return poisson_mle(data.x, model.check_response(data.y))
    if isinstance(model, GaussianLinearModel):
        return gaussian_mle(data.x, data.y)
    raise TypeError(f"no maximum likelihood initializer for {type(model).__name__}")


def initial_theta(model, data, config):
    k = model.n_params(data.p)
    if isinstance(config.init, tuple):
        theta = np.array(config.init)
        if theta.shape != (k,):
            raise ValueError(f"custom init has {theta.shape[0]} entries, expected {k}")
        return theta
    if config.init == "mle":
        return mle_init(model, data)
    if config.init == "random":
        theta = np.random.default_rng(config.seed).standard_normal(k)
    else:
        theta = np.zeros(k)
    if isinstance(model, GaussianLinearModel):
        theta[-1] = max(float(np.std(data.y)), 1e-6)
    return theta


def _unconstrained_objective(model, data, config):
    def fun(u):
        theta = model.from_unconstrained(u)
        value, grad = empirical_objective(model, theta, data, config.gamma, config.kind)
        return value, grad * model.unconstrained_jacobian(u)

    return fun


def bfgs(fun, u0, max_iters=500, grad_tol=1e-8, step_tol=1e-10):
    """Minimize ``fun`` (returning value and gradient) from ``u0``.

    Returns ``(u, value, grad, iters, converged, message, history)``; the
    history holds the objective at every accepted iterate and is
    non-increasing by construction of the Armijo test.
    """
    u = np.array(u0, dtype=float)
    f, g = fun(u)
    if not np.isfinite(f):
        raise NoDescent(f"objective is not finite at the starting point ({f})")
    hinv = np.eye(u.size)
    history = [f]
    for it in range(1, max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            return u, f, g, it - 1, True, "gradient tolerance reached", history
        d = -hinv @ g
        slope = float(g @ d)
        if slope >= 0.0:
            # inverse Hessian lost positive definiteness; restart along steepest descent
            hinv = np.eye(u.size)
            d, slope = -g, -float(g @ g)
        t = 1.0
        for _ in range(MAX_BACKTRACKS):
            u_new = u + t * d
            try:
                f_new, g_new = fun(u_new)
            except (ArithmeticError, ValueError):
                f_new = np.inf
            if np.isfinite(f_new) and f_new <= f + ARMIJO_C1 * t * slope:
                break
            t *= 0.5
        else:
            if it == 1:
                raise NoDescent("line search failed at the initial point")
            return u, f, g, it - 1, gnorm <= grad_tol, "line search failed", history
        s = u_new - u
        yk = g_new - g
        u, f, g = u_new, f_new, g_new
        history.append(f)
        sy = float(s @ yk)
        if sy > 1e-12 * float(np.linalg.norm(s) * np.linalg.norm(yk)):
            rho = 1.0 / sy
            hy = hinv @ yk
            hinv = hinv - rho * (np.outer(s, hy) + np.outer(hy, s)) + (rho * rho * float(yk @ hy) + rho) * np.outer(s, s)
        if float(np.linalg.norm(s)) <= step_tol:
            gnorm = float(np.linalg.norm(g))
            return u, f, g, it, gnorm <= grad_tol, "step tolerance reached", history
    gnorm = float(np.linalg.norm(g))
    return u, f, g, max_iters, gnorm <= grad_tol, "iteration limit reached", history


def fit(model, data, config=None):
    """Estimate theta by minimizing the empirical gamma cross entropy.

    Non-convergence is reported through ``FitResult.converged`` rather than
    raised; only a failed first line search raises ``NoDescent``.
    """
    config = config or FitConfig()
    model.check_response(data.y)
    theta0 = initial_theta(model, data, config)
    fun = _unconstrained_objective(model, data, config)
    u, f, g, iters, converged, message, history = bfgs(
        fun, model.to_unconstrained(theta0), config.max_iters, config.grad_tol, config.step_tol
    )
    return FitResult(
        theta_hat=model.from_unconstrained(u),
        objective=float(f),
        converged=bool(converged),
        iters=int(iters),
        grad_norm=float(np.linalg.norm(g)),
        message=message,
        history=tuple(history),
    )


def fit_multistart(model, data, config, inits):
    """Run ``fit`` from several starting points and keep the lowest objective."""
    best = None
    for init in inits:
        cfg = FitConfig(
            gamma=config.gamma,
            kind=config.kind,
            init=init,
            max_iters=config.max_iters,
            grad_tol=config.grad_tol,
            step_tol=config.step_tol,
            seed=config.seed,
        )
        try:
            result = fit(model, data, cfg)
        except NoDescent:
            continue
        if best is None or result.objective < best.objective:
            best = result
    if best is None:
        raise NoDescent("no starting point produced a descent step")
    return best
