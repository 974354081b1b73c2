"""Monte Carlo MSE study for the two estimator types under contamination.

Defaults reproduce the logistic design: n=1000, p=5, beta=(0,1,-1,1,-1,0),
x ~ N(0, Sigma) with Sigma_ij = 0.2^|i-j|, outliers at
N((20,0,20,0,0), 0.5^2 I) with y=0, 100 replicates, gamma in {0.5, 1}.

Replicate (i, r) draws its data from ``SeedSequence(master_seed,
spawn_key=(i, r))`` where ``i`` indexes the outlier ratio, so any subset of
cells can be rerun independently and results never depend on scheduling.
"""

from concurrent.futures import ProcessPoolExecutor
import csv
from dataclasses import asdict, dataclass, field, fields
import io
import json
import math

import numpy as np

from .contamination import ContaminationScheme, CovariateSpec, generate
from .divergence import Kind
from .errors import GammaRegressError, LengthMismatch
from .estimator import FitConfig, fit
from .models import get_model

REFERENCE_MSE = {
    # published mean MSE per (epsilon, gamma, kind) for the default design
    (0.1, 0.5, 1): 0.00620, (0.1, 1.0, 1): 0.00712, (0.1, 0.5, 2): 0.00810, (0.1, 1.0, 2): 0.0276,
    (0.2, 0.5, 1): 0.0136, (0.2, 1.0, 1): 0.0149, (0.2, 0.5, 2): 0.0215, (0.2, 1.0, 2): 0.110,
    (0.3, 0.5, 1): 0.0262, (0.3, 1.0, 1): 0.0282, (0.3, 0.5, 2): 0.0472, (0.3, 1.0, 2): 0.282,
    (0.4, 0.5, 1): 0.0514, (0.4, 1.0, 1): 0.0547, (0.4, 0.5, 2): 0.0998, (0.4, 1.0, 2): 0.648,
}


OUTLIER_KEYS = {"mean": "outlier_mean", "sd": "outlier_sd", "response": "outlier_response", "mode": "mode"}


@dataclass(frozen=True)
class ExperimentConfig:
    """Sweep definition; every field has the simulation-design default.

    ``init`` is "true" (start at ``beta_true``), "mle" or "zero".
    """

    model: str = "logistic"
    n: int = 1000
    p: int = 5
    beta_true: tuple = (0.0, 1.0, -1.0, 1.0, -1.0, 0.0)
    rho: float = 0.2
    epsilons: tuple = (0.1, 0.2, 0.3, 0.4)
    gammas: tuple = (0.5, 1.0)
    kinds: tuple = (1, 2)
    replicates: int = 100
    master_seed: int = 20190125
    mode: str = "heterogeneous"
    outlier_mean: tuple = (20.0, 0.0, 20.0, 0.0, 0.0)
    outlier_sd: float = 0.5
    outlier_response: float = 0.0
    init: str = "true"
    max_iters: int = 500
    grad_tol: float = 1e-8
    step_tol: float = 1e-10

    def __post_init__(self):
        for name in ("beta_true", "epsilons", "gammas", "outlier_mean"):
            object.__setattr__(self, name, tuple(float(v) for v in getattr(self, name)))
        object.__setattr__(self, "kinds", tuple(int(Kind.parse(k)) for k in self.kinds))
        if self.replicates < 1:
            raise ValueError("replicates must be at least 1")
        if self.n < 1:
            raise ValueError("n must be at least 1")
        if any(not 0.0 <= e < 1.0 for e in self.epsilons):
            raise ValueError("outlier ratios must lie in [0, 1)")
        if any(g <= 0 for g in self.gammas):
            raise ValueError("gammas must be positive")
        if len(self.beta_true) != self.p + 1:
            raise ValueError(f"beta_true needs p+1={self.p + 1} entries")
        if len(self.outlier_mean) != self.p:
            raise ValueError(f"outlier_mean needs p={self.p} entries")
        if self.init not in ("true", "mle", "zero"):
            raise ValueError(f"unknown init {self.init!r}")

    @classmethod
    def from_dict(cls, data):
        """Build from a mapping; an ``outlier`` sub-object may carry mean, sd, response and mode."""
        data = dict(data)
        outlier = data.pop("outlier", None) or {}
        bad = set(outlier) - set(OUTLIER_KEYS)
        if bad:
            raise ValueError(f"unknown outlier keys: {sorted(bad)}")
        for key, value in outlier.items():
            data[OUTLIER_KEYS[key]] = value
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self):
        return asdict(self)

    def scheme(self, epsilon):
        return ContaminationScheme(
            model=get_model(self.model),
            clean_theta=self.beta_true,
            outlier_ratio=epsilon,
            mode=self.mode,
            outlier_mean=self.outlier_mean,
            outlier_sd=self.outlier_sd,
            outlier_response=self.outlier_response,
        )

    def covariates(self):
        return CovariateSpec(p=self.p, rho=self.rho)

    def fit_config(self, gamma, kind):
        init = {"true": self.beta_true, "mle": "mle", "zero": "zero"}[self.init]
        return FitConfig(
            gamma=gamma,
            kind=kind,
            init=init,
            max_iters=self.max_iters,
            grad_tol=self.grad_tol,
            step_tol=self.step_tol,
        )


@dataclass(frozen=True)
class ReplicateRecord:
    epsilon: float
    gamma: float
    kind: int
    replicate: int
    mse: object  # float, or None when the fit raised
    converged: bool
    iters: int
    grad_norm: object
    theta_hat: tuple = ()
    error: str = ""


@dataclass(frozen=True)
class CellSummary:
    epsilon: float
    gamma: float
    kind: int
    mean_mse: float
    sd_mse: float
    failures: int
    count: int


@dataclass(frozen=True)
class MseReport:
    records: tuple
    config: dict = field(default_factory=dict, compare=False)

    def cells(self):
        groups = {}
        for rec in self.records:
            groups.setdefault((rec.epsilon, rec.gamma, rec.kind), []).append(rec)
        out = []
        for (eps, gamma, kind), recs in sorted(groups.items()):
            vals = np.array([r.mse for r in recs if r.mse is not None], dtype=float)
            failures = sum(1 for r in recs if r.mse is None or not r.converged)
            mean = float(np.mean(vals)) if vals.size else math.nan
            sd = float(np.std(vals, ddof=1)) if vals.size > 1 else math.nan
            out.append(CellSummary(eps, gamma, kind, mean, sd, failures, len(recs)))
        return out

    def cell(self, epsilon, gamma, kind):
        for c in self.cells():
            if math.isclose(c.epsilon, epsilon) and math.isclose(c.gamma, gamma) and c.kind == int(kind):
                return c
        raise KeyError((epsilon, gamma, kind))

    @property
    def failures(self):
        return sum(c.failures for c in self.cells())


def compute_mse(theta_hat, theta_true):
    """Average squared coefficient error over all p+1 coordinates (intercept included)."""
    theta_hat = np.asarray(theta_hat, dtype=float)
    theta_true = np.asarray(theta_true, dtype=float)
    if theta_hat.shape != theta_true.shape:
        raise LengthMismatch(f"estimate has shape {theta_hat.shape}, truth has {theta_true.shape}")
    return float(np.mean((theta_hat - theta_true) ** 2))


def _run_replicate(config, eps_index, replicate):
    eps = config.epsilons[eps_index]
    seed = np.random.SeedSequence(config.master_seed, spawn_key=(eps_index, replicate))
    data, _ = generate(config.scheme(eps), config.covariates(), config.n, seed)
    model = get_model(config.model)
    records = []
    for gamma in config.gammas:
        for kind in config.kinds:
            try:
                res = fit(model, data, config.fit_config(gamma, kind))
            except (GammaRegressError, np.linalg.LinAlgError) as exc:
                records.append(ReplicateRecord(eps, gamma, kind, replicate, None, False, 0, None, (), repr(exc)))
                continue
            records.append(
                ReplicateRecord(
                    eps,
                    gamma,
                    kind,
                    replicate,
                    compute_mse(res.theta_hat, config.beta_true),
                    res.converged,
                    res.iters,
                    res.grad_norm,
                    tuple(float(t) for t in res.theta_hat),
                    "" if res.converged else res.message,
                )
            )
    return records


def _run_task(args):
    return _run_replicate(*args)


def run_experiment(config, workers=1):
    """Run every (epsilon, replicate) task; ``workers > 1`` uses a process pool.

    Output order is fixed by task index, so the report does not depend on
    ``workers``. Failed fits are recorded, never raised.
    """
    tasks = [(config, i, r) for i in range(len(config.epsilons)) for r in range(config.replicates)]
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_task, tasks, chunksize=4))
    else:
        chunks = [_run_task(t) for t in tasks]
    records = [rec for chunk in chunks for rec in chunk]
    records.sort(key=lambda r: (r.epsilon, r.gamma, r.kind, r.replicate))
    return MseReport(tuple(records), config.to_dict())


# ---------------------------------------------------------------------------
# report emission
# ---------------------------------------------------------------------------

CSV_FIELDS = ["epsilon", "gamma", "kind", "replicate", "mse", "converged", "iters", "grad_norm", "error"]


def _num(v):
    return "" if v is None else format(float(v), ".17g")


def report_csv(report):
    buf = io.StringIO()
    width = max((len(r.theta_hat) for r in report.records), default=0)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS + [f"theta_{j}" for j in range(width)])
    for r in report.records:
        theta = [_num(t) for t in r.theta_hat] + [""] * (width - len(r.theta_hat))
        writer.writerow(
            [_num(r.epsilon), _num(r.gamma), r.kind, r.replicate, _num(r.mse), int(r.converged), r.iters,
             _num(r.grad_norm), r.error] + theta
        )
    return buf.getvalue()


def parse_report_csv(text):
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    theta_cols = [i for i, h in enumerate(header) if h.startswith("theta_")]
    idx = {h: i for i, h in enumerate(header)}
    records = []
    for row in reader:
        if not row:
            continue
        opt = lambda key: None if row[idx[key]] == "" else float(row[idx[key]])  # noqa: E731
        records.append(
            ReplicateRecord(
                epsilon=float(row[idx["epsilon"]]),
                gamma=float(row[idx["gamma"]]),
                kind=int(row[idx["kind"]]),
                replicate=int(row[idx["replicate"]]),
                mse=opt("mse"),
                converged=bool(int(row[idx["converged"]])),
                iters=int(row[idx["iters"]]),
                grad_norm=opt("grad_norm"),
                theta_hat=tuple(float(row[i]) for i in theta_cols if row[i] != ""),
                error=row[idx["error"]],
            )
        )
    return MseReport(tuple(records))


def report_json(report):
    def clean(v):
        return None if isinstance(v, float) and not math.isfinite(v) else v

    cells = [{k: clean(v) for k, v in asdict(c).items()} for c in report.cells()]
    return json.dumps(
        {
            "config": report.config,
            "cells": cells,
            "replicates": [asdict(r) for r in report.records],
        },
        indent=2,
        sort_keys=True,
    )


def _sig3(v):
    if v is None or not math.isfinite(v):
        return "n/a"
    return f"{v:.3g}"


def report_markdown(report):
    """Table laid out as methods x gamma within epsilon blocks."""
    cells = {(c.epsilon, c.gamma, c.kind): c for c in report.cells()}
    epsilons = sorted({k[0] for k in cells})
    gammas = sorted({k[1] for k in cells})
    kinds = sorted({k[2] for k in cells})
    lines = [
        "| Methods | " + " | ".join(f"γ={g:g}" for g in gammas) + " |",
        "|---|" + "---|" * len(gammas),
    ]
    for eps in epsilons:
        lines.append(f"| | **ε={eps:g}** |" + " |" * (len(gammas) - 1))
        for kind in kinds:
            vals = [_sig3(cells[(eps, g, kind)].mean_mse) if (eps, g, kind) in cells else "n/a" for g in gammas]
            lines.append(f"| Type {kind} | " + " | ".join(vals) + " |")
    return "\n".join(lines) + "\n"


FORMATS = {"csv": report_csv, "json": report_json, "markdown": report_markdown, "md": report_markdown}


def emit_report(report, fmt, path):
    """Write ``report`` in ``fmt`` (csv, json or markdown) to ``path``."""
    try:
        render = FORMATS[fmt]
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}; choose csv, json or markdown") from None
    text = render(report)
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {fmt} report to {path}: {exc}") from exc
    return path
