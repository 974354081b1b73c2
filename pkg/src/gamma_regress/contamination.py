"""Contaminated regression data and the tail-overlap diagnostic nu.

A scheme describes g(y|x) = (1 - eps(x)) f(y|x; theta*) + eps(x) delta(y|x)
with a point-mass delta at a configurable outlier response. Three layouts:

* leverage (heterogeneous): outlier rows draw x from N(mu_out, sd^2 I), so
  eps(x) concentrates where that normal has mass;
* region rates (heterogeneous): x stays clean and eps(x) is piecewise
  constant along one covariate;
* homogeneous: x stays clean and a constant fraction of responses is replaced.
"""

import csv
from dataclasses import dataclass, field
import math
from typing import Callable, Optional, Union

import numpy as np
from scipy.special import logsumexp

from .divergence import CovariateComponent, PointMass, Population, RegressionDataset, check_gamma
from .models import ConditionalModel

HETEROGENEOUS = "heterogeneous"
HOMOGENEOUS = "homogeneous"


@dataclass(frozen=True)
class CovariateSpec:
    """Clean covariates x ~ N(mean, Sigma) with Sigma_ij = rho^|i-j|."""

    p: int = 5
    rho: float = 0.2
    mean: float = 0.0

    def __post_init__(self):
        if self.p < 1:
            raise ValueError("need at least one covariate")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")

    @property
    def covariance(self):
        idx = np.arange(self.p)
        return self.rho ** np.abs(np.subtract.outer(idx, idx)).astype(float)

    @property
    def mean_vector(self):
        return np.full(self.p, float(self.mean))


@dataclass(frozen=True)
class RegionRates:
    """Piecewise-constant eps(x) along covariate ``feature`` (0-based).

    ``rates[i]`` applies on ``[edges[i-1], edges[i])`` with open outer ends.
    """

    feature: int
    edges: tuple
    rates: tuple

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(float(e) for e in self.edges))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        if len(self.rates) != len(self.edges) + 1:
            raise ValueError("need one more rate than edges")
        if list(self.edges) != sorted(self.edges):
            raise ValueError("region edges must be increasing")
        if any(not 0.0 <= r < 1.0 for r in self.rates):
            raise ValueError("region rates must lie in [0, 1)")

    def __call__(self, x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        idx = np.searchsorted(np.array(self.edges), x[:, self.feature], side="right")
        return np.array(self.rates)[idx]


@dataclass(frozen=True)
class ContaminationScheme:
    model: ConditionalModel
    clean_theta: tuple
    outlier_ratio: Union[float, RegionRates] = 0.1
    mode: str = HETEROGENEOUS
    outlier_mean: Optional[tuple] = None
    outlier_sd: float = 0.5
    outlier_response: Union[float, Callable] = 0.0

    def __post_init__(self):
        object.__setattr__(self, "clean_theta", tuple(float(t) for t in self.clean_theta))
        if self.outlier_mean is not None:
            mu = tuple(float(m) for m in np.atleast_1d(self.outlier_mean))
            if not all(math.isfinite(m) for m in mu):
                raise ValueError("outlier mean must be finite")
            object.__setattr__(self, "outlier_mean", mu)
        if self.mode not in (HETEROGENEOUS, HOMOGENEOUS):
            raise ValueError(f"mode must be {HETEROGENEOUS!r} or {HOMOGENEOUS!r}")
        if isinstance(self.outlier_ratio, RegionRates):
            if self.mode != HETEROGENEOUS:
                raise ValueError("covariate-dependent rates are heterogeneous by definition")
        else:
            eps = float(self.outlier_ratio)
            if not 0.0 <= eps < 1.0:
                raise ValueError(f"outlier ratio must lie in [0, 1), got {eps}")
            object.__setattr__(self, "outlier_ratio", eps)
            if self.mode == HETEROGENEOUS and self.outlier_mean is None and eps > 0:
                raise ValueError("heterogeneous constant-rate contamination needs an outlier covariate mean")
        if self.outlier_sd <= 0:
            raise ValueError("outlier covariate sd must be positive")

    @property
    def leverage(self):
        return self.mode == HETEROGENEOUS and not isinstance(self.outlier_ratio, RegionRates)

    @property
    def delta(self):
        return PointMass(self.outlier_response)

    def outlier_y(self, x):
        return self.delta.at(np.atleast_2d(x))

    def population(self, cov):
        """The same law as a ``Population`` for quadrature."""
        mean, sigma = cov.mean_vector, cov.covariance
        if self.leverage:
            eps = self.outlier_ratio
            comps = [CovariateComponent(1.0 - eps, mean, sigma, 0.0)]
            if eps > 0:
                comps.append(CovariateComponent(eps, self.outlier_mean, self.outlier_sd**2, 1.0))
        else:
            comps = [CovariateComponent(1.0, mean, sigma, self.outlier_ratio)]
        return Population(self.model, self.clean_theta, tuple(comps), self.delta)


def _streams(seed):
    # independent child streams keep the clean draws identical whatever eps is
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return [np.random.default_rng(s) for s in seq.spawn(4)]


def _clean_x(cov, n, rng):
    chol = np.linalg.cholesky(cov.covariance)
    return cov.mean_vector + rng.standard_normal((n, cov.p)) @ chol.T


def generate_clean(model, theta, cov, n, seed):
    x_rng, _, _, y_rng = _streams(seed)
    x = _clean_x(cov, n, x_rng)
    return RegressionDataset(x, model.sample_response(np.array(theta), x, y_rng))


def generate(scheme, cov, n, seed):
    """Draw ``n`` rows; returns the dataset and boolean outlier flags.

    Each row is an outlier independently with probability eps (or eps(x)).
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if scheme.outlier_mean is not None and len(scheme.outlier_mean) != cov.p:
        raise ValueError(f"outlier mean has {len(scheme.outlier_mean)} entries for p={cov.p}")
    x_rng, flag_rng, out_rng, y_rng = _streams(seed)
    x = _clean_x(cov, n, x_rng)
    u = flag_rng.random(n)
    if isinstance(scheme.outlier_ratio, RegionRates):
        flags = u < scheme.outlier_ratio(x)
    else:
        flags = u < scheme.outlier_ratio
    shift = out_rng.standard_normal((n, cov.p))
    if scheme.leverage and flags.any():
        x[flags] = np.array(scheme.outlier_mean) + scheme.outlier_sd * shift[flags]
    y = scheme.model.sample_response(np.array(scheme.clean_theta), x, y_rng)
    if flags.any():
        y[flags] = scheme.outlier_y(x[flags])
    return RegressionDataset(x, y), flags


@dataclass(frozen=True, eq=False)
class NuDiagnostic:
    nu_x: np.ndarray
    nu: float
    x: np.ndarray = field(repr=False, default=None)


def _outlier_covariates(scheme, cov, n_mc, rng):
    if scheme.leverage:
        if scheme.outlier_ratio == 0:
            return np.empty((0, cov.p))
        return np.array(scheme.outlier_mean) + scheme.outlier_sd * rng.standard_normal((n_mc, cov.p))
    if not isinstance(scheme.outlier_ratio, RegionRates):
        if scheme.outlier_ratio == 0:
            return np.empty((0, cov.p))
        return _clean_x(cov, n_mc, rng)
    # draw from eps(x) g(x) / int eps g by thinning
    kept, total = [], 0
    for _ in range(1000):
        x = _clean_x(cov, max(n_mc, 1000), rng)
        x = x[rng.random(x.shape[0]) < scheme.outlier_ratio(x)]
        kept.append(x)
        total += x.shape[0]
        if total >= n_mc:
            break
    x = np.concatenate(kept)
    return x[:n_mc]


def nu_diagnostic(model, theta, scheme, cov, gamma, n_mc=10000, seed=0):
    """Monte Carlo nu_{f,gamma} over the outlier covariate distribution.

    For the point-mass delta, nu(x) = f(y_dag(x) | x; theta) exactly; the
    aggregate is (E[nu(x)^gamma])^(1/gamma) with x drawn where outliers
    occur. No contamination mass gives zero by convention.
    """
    gamma = check_gamma(gamma)
    x = _outlier_covariates(scheme, cov, n_mc, np.random.default_rng(seed))
    if x.shape[0] == 0:
        return NuDiagnostic(np.empty(0), 0.0, x)
    log_nu = model.log_density(np.array(theta), x, scheme.outlier_y(x))
    agg = (logsumexp(gamma * log_nu) - math.log(x.shape[0])) / gamma
    return NuDiagnostic(np.exp(log_nu), float(math.exp(agg)), x)


def _fmt(v):
    return format(float(v), ".17g")


def write_csv(path, data, is_outlier=None):
    """Columns x1..xp, y, is_outlier; floats carry 17 significant digits."""
    flags = np.zeros(data.n, dtype=bool) if is_outlier is None else np.asarray(is_outlier, dtype=bool)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"x{j + 1}" for j in range(data.p)] + ["y", "is_outlier"])
            for row, yv, flag in zip(data.x, data.y, flags):
                writer.writerow([_fmt(v) for v in row] + [_fmt(yv), int(flag)])
    except OSError as exc:
        raise OSError(f"cannot write dataset to {path}: {exc}") from exc


def read_csv(path):
    """Inverse of ``write_csv``; a missing ``is_outlier`` column yields ``None`` flags."""
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read dataset from {path}: {exc}") from exc
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    if "y" not in header:
        raise ValueError(f"{path}: missing 'y' column")
    xcols = [i for i, h in enumerate(header) if h.startswith("x")]
    body = np.array([[float(v) for v in r] for r in rows[1:] if r], dtype=float)
    if body.size == 0:
        raise ValueError(f"{path}: no data rows")
    data = RegressionDataset(body[:, xcols], body[:, header.index("y")])
    flags = body[:, header.index("is_outlier")].astype(bool) if "is_outlier" in header else None
    return data, flags
