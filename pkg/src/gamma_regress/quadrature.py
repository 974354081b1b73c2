"""Deterministic Gauss-Legendre rules for population integrals."""

from dataclasses import dataclass
from functools import lru_cache
import itertools

import numpy as np

MAX_NODES = 2_000_000


@dataclass(frozen=True)
class QuadratureSpec:
    """Node counts and truncation for the nested integrals.

    ``nodes`` Gauss-Legendre points per covariate dimension, placed on
    ``mean +/- half_width`` standard deviations of each normal covariate
    component (after whitening by the Cholesky factor). ``response_nodes``
    points per panel are used for continuous responses.
    """

    nodes: int = 200
    half_width: float = 10.0
    response_nodes: int = 64
    response_half_width: float = 12.0

    def __post_init__(self):
        if self.nodes < 2 or self.response_nodes < 2:
            raise ValueError("quadrature needs at least two nodes per dimension")
        if self.half_width <= 0 or self.response_half_width <= 0:
            raise ValueError("quadrature half widths must be positive")


@lru_cache(maxsize=32)
def _leggauss(n):
    return np.polynomial.legendre.leggauss(n)


def gauss_legendre(n, a, b):
    """Nodes and weights on [a, b]; ``a`` and ``b`` may be arrays of intervals."""
    t, w = _leggauss(n)
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    return a + half * (t + 1.0), half * w


def normal_rule(mean, cov, spec):
    """Rule for integrating against N(mean, cov).

    Returns ``(x, log_w)`` with ``sum(exp(log_w) * h(x)) ~ E[h(X)]``. The
    standard normal weight is folded into ``log_w`` so that tails stay
    representable in log space.
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    p = mean.shape[0]
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = np.eye(p) * cov
    chol = np.linalg.cholesky(cov)
    if spec.nodes**p > MAX_NODES:
        raise ValueError(f"{spec.nodes}^{p} quadrature nodes exceeds the limit of {MAX_NODES}")
    z1, w1 = gauss_legendre(spec.nodes, -spec.half_width, spec.half_width)
    logw1 = np.log(w1) - 0.5 * z1**2 - 0.5 * np.log(2.0 * np.pi)
    z = np.array(list(itertools.product(z1, repeat=p)))
    log_w = np.array([sum(c) for c in itertools.product(logw1, repeat=p)])
    return mean + z @ chol.T, log_w


def normal_logpdf(x, mean, cov):
    x = np.asarray(x, dtype=float)
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    p = mean.shape[0]
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = np.eye(p) * cov
    chol = np.linalg.cholesky(cov)
    z = np.linalg.solve(chol, (x - mean).T).T
    return -0.5 * np.sum(z**2, axis=1) - np.sum(np.log(np.diag(chol))) - 0.5 * p * np.log(2.0 * np.pi)


def composite_rule(windows, n):
    """Composite rule over the union of per-row intervals.

    ``windows`` has shape (rows, m, 2). Breakpoints from every interval in a
    row are sorted and each sub-interval gets ``n`` nodes, so separated
    components are each resolved. Returns nodes and weights of shape
    (rows, (2m - 1) * n).
    """
    windows = np.asarray(windows, dtype=float)
    edges = np.sort(windows.reshape(windows.shape[0], -1), axis=1)
    y, w = gauss_legendre(n, edges[:, :-1], edges[:, 1:])
    return y.reshape(edges.shape[0], -1), w.reshape(edges.shape[0], -1)
