"""Command line interface.

::

    gpssm generate cubic --output cubic.csv
    gpssm train cubic.csv --output cubic.json
    gpssm equilibrium cubic.json --output eq.csv
    gpssm validate cubic.json eq.csv
    gpssm stability cubic.json --empirical
    gpssm simulate vdp.json --x0 -1.8 0 --steps 150 --reference vanderpol

Exit status: 0 success, 2 usage or input error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys

import numpy as np

from . import io, systems
from .equilibrium import build_grid, solve_equilibrium
from .errors import ConfigError, FactorizationFailure, NoSolution, NumericalFailure
from .gp import OptimizerConfig, TrainingSet, fit, optimize_hyperparameters
from .simulate import ensemble, monte_carlo_equilibrium_check
from .stability import empirical_mean_square, recurrent_set, return_time_estimate

log = logging.getLogger("gpssm")

DEFAULT_SEED = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3

EQ_INTERVAL = (-12.0, 8.0)
EQ_Q = 150
VALIDATE_COUNT = 30000
ALPHA = 0.05


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED, help=f"random seed (default {DEFAULT_SEED})")
    p.add_argument("--output", "-o", default="-", help="output path ('-' for stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=None, help="output format where both are offered")
    p.add_argument("--verbose", "-v", action="store_true")
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    parser = argparse.ArgumentParser(prog="gpssm", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", parents=[common], help="write a benchmark training set")
    g.add_argument("dataset", choices=("cubic", "vanderpol"))
    g.add_argument("--m", type=int, default=systems.CUBIC_M, help="cubic: number of inputs")
    g.add_argument("--interval", type=float, nargs=2, default=systems.CUBIC_INTERVAL, metavar=("A", "B"))
    g.add_argument("--per-side", type=int, default=systems.VDP_PER_SIDE, help="vanderpol: grid points per side")
    g.add_argument("--square", type=float, nargs=2, default=systems.VDP_SQUARE, metavar=("A", "B"))
    g.add_argument("--T", type=float, default=systems.VDP_T, help="vanderpol: sample time")
    g.add_argument("--eps", type=float, default=systems.VDP_EPS, help="vanderpol: damping parameter")
    g.add_argument("--noise", type=float, default=None, help="output noise deviation")
    g.add_argument("--random-inputs", action="store_true", help="uniform-random instead of evenly spaced inputs")

    t = sub.add_parser("train", parents=[common], help="fit a GP-SSM with optimized hyperparameters")
    t.add_argument("data")
    t.add_argument("--kernel", default="squared-exponential")
    t.add_argument("--degree", type=int, default=2, help="polynomial kernel degree")
    t.add_argument("--noise", type=float, nargs="+", default=None, help="noise deviation(s); overrides the sidecar")
    t.add_argument("--optimize-noise", action="store_true")
    t.add_argument("--starts", type=int, default=8)

    pr = sub.add_parser("predict", parents=[common], help="one-step predictive mean and variance")
    pr.add_argument("model")
    pr.add_argument("--x", type=float, nargs="+", action="append", help="query state (repeatable)")
    pr.add_argument("--input", help="CSV of query states (header x_1..x_n)")

    e = sub.add_parser("equilibrium", parents=[common], help="stationary density on a trapezoid grid")
    e.add_argument("model")
    e.add_argument("--interval", type=float, nargs=2, action="append", metavar=("A", "B"),
                   help=f"per-dimension interval (repeat per dimension; default {EQ_INTERVAL})")
    e.add_argument("--q", type=int, action="append", help=f"subdivisions per dimension (default {EQ_Q})")
    e.add_argument("--summary", help="summary JSON path (default: <output>.json)")

    s = sub.add_parser("stability", parents=[common], help="mean-square bound and recurrent set")
    s.add_argument("model")
    s.add_argument("--empirical", action="store_true", help="append Monte Carlo corroboration")
    s.add_argument("--x0", type=float, nargs="+", action="append", help="start state(s) for the simulation")
    s.add_argument("--steps", type=int, default=10_000)
    s.add_argument("--rollouts", type=int, default=100)
    s.add_argument("--return-rollouts", type=int, default=1000)
    s.add_argument("--cap", type=int, default=100_000)

    v = sub.add_parser("validate", parents=[common], help="KS test of an equilibrium against one-step samples")
    v.add_argument("model")
    v.add_argument("equilibrium")
    v.add_argument("--count", type=int, default=VALIDATE_COUNT)
    v.add_argument("--alpha", type=float, default=ALPHA)
    v.add_argument("--sampler", choices=("pchip", "trapezoid"), default="pchip",
                   help="CDF table used for inverse transform sampling")

    sm = sub.add_parser("simulate", parents=[common], help="Monte Carlo multi-step prediction")
    sm.add_argument("model")
    sm.add_argument("--x0", type=float, nargs="+", required=True)
    sm.add_argument("--steps", type=int, default=150)
    sm.add_argument("--rollouts", type=int, default=500)
    sm.add_argument("--dt", type=float, default=systems.VDP_T, help="time per step in the output")
    sm.add_argument("--reference", choices=("none", "cubic", "vanderpol"), default="none",
                    help="attach the noise-free trajectory of a benchmark system")
    return parser


def _echo(params: dict):
    print(json.dumps(params, sort_keys=True), file=sys.stderr)


def cmd_generate(args):
    if args.output == "-":
        raise ConfigError("generate needs --output")
    io.ensure_parent(args.output)
    if args.dataset == "cubic":
        noise = systems.CUBIC_NOISE if args.noise is None else args.noise
        params = {"dataset": "cubic", "m": args.m, "interval": list(args.interval), "sigma_n": noise,
                  "seed": args.seed, "random_inputs": args.random_inputs}
        data = systems.generate_cubic_dataset(args.m, tuple(args.interval), noise, args.seed, args.random_inputs)
    else:
        noise = systems.VDP_NOISE if args.noise is None else args.noise
        params = {"dataset": "vanderpol", "per_side": args.per_side, "square": list(args.square), "T": args.T,
                  "eps": args.eps, "sigma_noise": noise, "seed": args.seed, "random_inputs": args.random_inputs}
        data = systems.generate_vdp_dataset(tuple(args.square), args.per_side, args.T, args.eps, noise,
                                            args.seed, args.random_inputs)
    io.write_training_csv(args.output, data, meta={"generator": params})
    _echo(params)
    return 0


def _duplicate_rows(X):
    _, inverse, counts = np.unique(X, axis=0, return_inverse=True, return_counts=True)
    return [int(j) + 2 for j in np.flatnonzero(counts[inverse.ravel()] > 1)]


def cmd_train(args):
    data, known = io.read_training_csv(args.data, args.noise)
    config = OptimizerConfig(n_starts=args.starts, optimize_noise=args.optimize_noise or not known,
                             degree=args.degree, seed=args.seed)
    kernels, noise, lmls = [], [], []
    try:
        for i in range(data.n):
            k, sn, lml = optimize_hyperparameters(data, args.kernel, i, config)
            kernels.append(k)
            noise.append(sn)
            lmls.append(lml)
        data = TrainingSet(data.X, data.Y, noise)
        model = fit(kernels, data)
    except FactorizationFailure as exc:
        rows = _duplicate_rows(data.X)
        hint = f" (duplicated input rows in the CSV: {rows[:20]})" if rows else ""
        raise FactorizationFailure(f"{exc}{hint}") from exc
    extra = {"training": {"source": str(args.data), "kernel": kernels[0].kind, "seed": args.seed,
                          "starts": args.starts, "optimize_noise": config.optimize_noise}}
    if args.output == "-":
        io.write_json("-", io.model_to_dict(model, extra))
    else:
        io.ensure_parent(args.output)
        io.save_model(args.output, model, extra)
    for i, out in enumerate(model.outputs):
        log.info("output %d: %s sigma_n=%.6g lml=%.6g", i + 1, dict(out.kernel.params), out.sigma_n,
                 model.log_likelihoods[i])
    return 0


def cmd_predict(args):
    model = io.load_model(args.model)
    if args.input:
        _, pts = io._read_table(args.input)
    elif args.x:
        pts = np.array(args.x, dtype=float)
    else:
        raise ConfigError("give --x or --input")
    mean, var = model.moments(pts)
    if (args.format or "json") == "json":
        io.write_json(args.output, {"x": pts, "mean": mean, "variance": var})
    else:
        n = model.n
        header = [f"x_{i + 1}" for i in range(n)] + [f"mean_{i + 1}" for i in range(n)] + [f"var_{i + 1}" for i in range(n)]
        rows = np.hstack([pts, mean, var])
        lines = [",".join(header)] + [",".join(io.fmt(v) for v in r) for r in rows]
        text = "\n".join(lines) + "\n"
        if args.output == "-":
            print(text, end="")
        else:
            with open(args.output, "w") as fh:
                fh.write(text)
    return 0


def cmd_equilibrium(args):
    model = io.load_model(args.model)
    intervals = args.interval or [EQ_INTERVAL] * model.n
    qs = args.q or [EQ_Q]
    if len(intervals) == 1 and model.n > 1:
        intervals = intervals * model.n
    if len(qs) == 1:
        qs = qs * len(intervals)
    if len(intervals) != model.n or len(qs) != model.n:
        raise ConfigError(f"model is {model.n}-D: give {model.n} --interval and --q values")
    if args.output == "-":
        raise ConfigError("equilibrium needs --output")
    io.ensure_parent(args.output)
    summary = args.summary or args.output + ".json"
    grid = build_grid(intervals, qs)
    sol = solve_equilibrium(model, grid)
    io.write_equilibrium(args.output, sol, summary, extra={"model": str(args.model)})
    log.info("residual %.3g, smallest singular value %.3g", sol.residual, sol.singular_value_min)
    return 0


def cmd_stability(args):
    model = io.load_model(args.model)
    report = recurrent_set(model)
    if args.empirical:
        x0s = np.array(args.x0) if args.x0 else np.zeros((1, model.n))
        ms = empirical_mean_square(model, x0s, args.steps, args.rollouts, args.seed)
        far = np.zeros(model.n)
        far[0] = 2 * report.recurrent_radius
        rt = return_time_estimate(model, far, args.return_rollouts, args.cap, args.seed)
        report.empirical = {
            "mean_square": {k: v for k, v in ms.items() if k != "per_step"},
            "mean_square_within_bound": ms["sup"] <= report.bound,
            "return_time": {**rt.to_dict(), "x0": far.tolist()},
        }
    io.write_json(args.output, report.to_dict())
    return 0


def cmd_validate(args):
    model = io.load_model(args.model)
    sol = io.read_equilibrium(args.equilibrium)
    res = monte_carlo_equilibrium_check(model, sol, args.count, args.alpha, args.seed, args.sampler)
    io.write_json(args.output, {**res.to_dict(), "count": args.count, "seed": args.seed, "sampler": args.sampler})
    return 0


def cmd_simulate(args):
    model = io.load_model(args.model)
    x0 = np.array(args.x0, dtype=float)
    if x0.shape != (model.n,):
        raise ConfigError(f"--x0 needs {model.n} values")
    stats = ensemble(model, x0, args.steps, args.rollouts, args.seed)
    ref = None
    if args.reference == "vanderpol":
        ref = systems.van_der_pol_trajectory(x0, args.steps)
    elif args.reference == "cubic":
        ref = [x0]
        for _ in range(args.steps):
            ref.append(systems.cubic_map(ref[-1]))
        ref = np.array(ref)
    if args.output == "-" or (args.format == "json"):
        doc = {"mean": stats.mean, "std": stats.std, "rollouts": stats.rollouts, "seed": stats.seed, "dt": args.dt}
        if ref is not None:
            doc["reference"] = ref
        io.write_json(args.output, doc)
    else:
        io.ensure_parent(args.output)
        io.write_ensemble(args.output, stats, args.dt, ref)
    return 0


COMMANDS = {
    "generate": cmd_generate,
    "train": cmd_train,
    "predict": cmd_predict,
    "equilibrium": cmd_equilibrium,
    "stability": cmd_stability,
    "validate": cmd_validate,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except NoSolution as exc:
        print(str(exc), file=sys.stderr)
        return EXIT_NUMERIC
    except NumericalFailure as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
