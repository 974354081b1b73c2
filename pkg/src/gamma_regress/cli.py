"""``gamma-regress`` command line: bench, fit, simulate, theory."""

import argparse
import json
import os
import sys

import numpy as np

from . import theory
from .bench import ExperimentConfig, emit_report, report_markdown, run_experiment
from .contamination import generate, read_csv, write_csv
from .divergence import Kind
from .errors import GammaRegressError
from .estimator import FitConfig, fit
from .models import MODELS, get_model
from .quadrature import QuadratureSpec

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_FIT_FAILURES = 2

THEORY_DEFAULTS = {
    "scenario": "logistic-leverage",
    "scenario_params": {},
    "gamma": 1.0,
    "theta": [0.1, 1.2],
    "quadrature_nodes": 200,
    "sweep": None,
    "grid": None,
}

# grid half-widths around theta* (intercept, slope) and step per scenario
DEFAULT_GRIDS = {
    "logistic-leverage": ((0.5, 1.0), (0.5, 1.5), 0.02),
    "poisson-homogeneous": ((0.15, 0.15), (0.15, 0.15), 0.01),
    "poisson-leverage": ((0.15, 0.15), (0.15, 0.15), 0.01),
}


def _load_json(path):
    if path is None:
        return {}
    try:
        with open(path) as fh:
            return json.load(fh)
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc})") from exc


def _write_json(obj, path):
    text = json.dumps(obj, indent=2, sort_keys=True) + "\n"
    if path is None:
        sys.stdout.write(text)
        return
    try:
        with open(path, "w") as fh:
            fh.write(text)
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def cmd_bench(args):
    config = ExperimentConfig.from_dict(_load_json(args.config))
    report = run_experiment(config, workers=args.workers)
    os.makedirs(args.out_dir, exist_ok=True)
    for fmt, name in (("csv", "replicates.csv"), ("json", "report.json"), ("markdown", "table.md")):
        emit_report(report, fmt, os.path.join(args.out_dir, name))
    sys.stdout.write(report_markdown(report))
    failures = report.failures
    if failures:
        print(f"{failures} fit(s) failed or did not converge", file=sys.stderr)
    return EXIT_FIT_FAILURES if args.strict and failures else EXIT_OK


def cmd_fit(args):
    data, _ = read_csv(args.data)
    model = get_model(args.model)
    config = FitConfig(gamma=args.gamma, kind=Kind.parse(args.type), init=args.init, seed=args.seed)
    result = fit(model, data, config)
    _write_json(
        {
            "model": args.model,
            "gamma": config.gamma,
            "type": int(config.kind),
            "theta_hat": result.theta_hat.tolist(),
            "objective": result.objective,
            "converged": result.converged,
            "iters": result.iters,
            "grad_norm": result.grad_norm,
            "message": result.message,
        },
        args.out,
    )
    return EXIT_OK if result.converged else EXIT_FIT_FAILURES


def simulation_settings(raw):
    """Split a simulate config into an ExperimentConfig, one outlier ratio and a seed."""
    raw = dict(raw)
    epsilon = raw.pop("epsilon", None)
    seed = raw.pop("seed", None)
    config = ExperimentConfig.from_dict(raw)
    epsilon = config.epsilons[0] if epsilon is None else float(epsilon)
    seed = config.master_seed if seed is None else int(seed)
    return config, epsilon, seed


def cmd_simulate(args):
    config, epsilon, seed = simulation_settings(_load_json(args.config))
    data, flags = generate(config.scheme(epsilon), config.covariates(), config.n, seed)
    write_csv(args.out, data, flags)
    print(f"wrote {data.n} rows ({int(flags.sum())} outliers) to {args.out}", file=sys.stderr)
    return EXIT_OK


def _theory_settings(raw):
    unknown = set(raw) - set(THEORY_DEFAULTS)
    if unknown:
        raise ValueError(f"unknown theory config keys: {sorted(unknown)}")
    settings = {**THEORY_DEFAULTS, **raw}
    if settings["scenario"] not in theory.SCENARIOS:
        raise ValueError(f"unknown scenario {settings['scenario']!r}; choose from {sorted(theory.SCENARIOS)}")
    return settings


def _population(settings, **override):
    params = {**settings["scenario_params"], **override}
    return theory.SCENARIOS[settings["scenario"]](**params)


def default_grid(population, scenario):
    lo, hi, step = DEFAULT_GRIDS[scenario]
    axes = []
    for centre, below, above in zip(population.theta, lo, hi):
        count = int(round((below + above) / step)) + 1
        axes.append(np.round(np.linspace(centre - below, centre + above, count), 10))
    return axes


def _grid_axes(spec, population, scenario):
    if spec is None:
        return default_grid(population, scenario)
    lower, upper, step = spec["lower"], spec["upper"], float(spec["step"])
    return [np.round(np.linspace(a, b, int(round((b - a) / step)) + 1), 10) for a, b in zip(lower, upper)]


def run_theory(check, raw):
    """Evaluate one theory check; a ``sweep`` entry yields one row per value."""
    settings = _theory_settings(raw)
    spec = QuadratureSpec(nodes=int(settings["quadrature_nodes"]))
    gamma = float(settings["gamma"])
    sweep = settings["sweep"]
    cases = [{}] if sweep is None else [{sweep["param"]: v} for v in sweep["values"]]
    rows = []
    for case in cases:
        pop = _population(settings, **case)
        descriptor = {"scenario": settings["scenario"], "gamma": gamma, **case}
        if check == "theorem1":
            rep = theory.check_theorem1(pop, settings["theta"], gamma, spec)
        elif check == "pythagorean":
            rep = theory.check_pythagorean(pop, settings["theta"], gamma, spec)
        else:
            rep = theory.check_type2_bias(pop, gamma, _grid_axes(settings["grid"], pop, settings["scenario"]), spec)
        rows.append(theory.report_dict(rep, **descriptor))
    return {"check": check, "results": rows}


def cmd_theory(args):
    _write_json(run_theory(args.check, _load_json(args.config)), args.out)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="gamma-regress", description="Robust regression with gamma cross entropies.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bench", help="run the contamination MSE experiment")
    p.add_argument("--config", help="JSON experiment config; omitted fields take the default design")
    p.add_argument("--out-dir", default="bench-out", help="directory for replicates.csv, report.json, table.md")
    p.add_argument("--workers", type=int, default=1, help="worker processes (1 = single-threaded reference run)")
    p.add_argument("--strict", action="store_true", help="exit 2 if any fit failed or did not converge")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("fit", help="fit a model to a CSV dataset")
    p.add_argument("--data", required=True, help="CSV with columns x1..xp, y")
    p.add_argument("--model", default="logistic", choices=sorted(MODELS))
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--type", default="1", choices=["1", "2"])
    p.add_argument("--init", default="mle", choices=["mle", "zero", "random"])
    p.add_argument("--seed", type=int, default=0, help="seed for --init random")
    p.add_argument("--out", help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="draw one contaminated dataset")
    p.add_argument("--config", help="JSON config; accepts the bench keys plus 'epsilon' and 'seed'")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("theory", help="quadrature checks of the robustness results")
    p.add_argument("--check", required=True, choices=["theorem1", "pythagorean", "type2-bias"])
    p.add_argument("--config", help="JSON scenario config")
    p.add_argument("--out", help="output JSON (stdout if omitted)")
    p.set_defaults(func=cmd_theory)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GammaRegressError, ValueError, TypeError, KeyError, OSError) as exc:
        print(f"gamma-regress {args.command}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
