"""Command-line entry point.

Any config key can be overridden with ``--<section>.<name> VALUE`` (or
``--<section>.<name>=VALUE``). Failures exit nonzero after printing one line
``error: {"type": ..., "message": ...}`` to stderr.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from .exceptions import ActivePDEError, ConfigurationError, ContractViolation, DegenerateDensityError, DivergenceError
from .experiment import (
    Arm,
    ExperimentSpec,
    demo_table1,
    fmt,
    run_experiment,
    slice_grid,
    write_history,
    write_points,
)
from .metrics import TestSet, max_modulus_error, rel_l2_error
from .network import load_checkpoint, save_checkpoint
from .samplers import boundary_points
from .trainer import draw_interior, train

EXIT_CODES = {ConfigurationError: 2, ContractViolation: 2, DivergenceError: 3, DegenerateDensityError: 4}


def parse_overrides(tokens) -> dict:
    out = {}
    it = iter(tokens)
    for tok in it:
        if not tok.startswith("--"):
            raise ConfigurationError(f"unexpected argument {tok!r}")
        key = tok[2:]
        if "=" in key:
            key, value = key.split("=", 1)
        else:
            try:
                value = next(it)
            except StopIteration:
                raise ConfigurationError(f"flag --{key} needs a value") from None
        if key not in cfgmod.DEFAULTS:
            raise ConfigurationError(f"unknown config key {key!r}")
        out[key] = value
    return out


def _print_rows(columns, rows, stream=None):
    w = csv.writer(stream or sys.stdout, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow(row)


def _network_for(args, problem):
    net = load_checkpoint(args.checkpoint)
    if net.input_dim != problem.input_dim:
        raise ConfigurationError(
            f"checkpoint input dimension {net.input_dim} does not match problem ({problem.input_dim})"
        )
    return net


# --------------------------------------------------------------------------- #


def cmd_train(args, cfg):
    problem = cfgmod.build_problem(cfg)
    config = cfgmod.training_config(cfg, problem)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    cfgmod.dump_config(cfg, out / "config.yaml")
    ckpt = out / "network.ckpt"
    try:
        net, history = train(problem, config, checkpoint_path=ckpt)
    except DivergenceError as err:
        if getattr(err, "history", None) is not None and err.history.epoch:
            write_history(err.history, out)
        raise
    write_history(history, out)
    save_checkpoint(ckpt, net)
    final = history.final()
    _print_rows(("epoch", "loss", "rel_l2", "max_mod"),
                [[final["epoch"], fmt(final["loss"]), fmt(final["rel_l2"]), fmt(final["max_mod"])]])


def cmd_evaluate(args, cfg):
    problem = cfgmod.build_problem(cfg)
    net = _network_for(args, problem)
    test = TestSet.for_problem(problem, size=cfg["training.test_size"])
    _print_rows(("rel_l2", "max_mod"), [[fmt(rel_l2_error(net, test)), fmt(max_modulus_error(net, test))]])


def cmd_run_experiment(args, cfg):
    problem = cfgmod.build_problem(cfg)
    arms = [Arm(name, cfgmod.training_config(cfg, problem, sampler=name)) for name in cfg["experiment.arms"]]
    spec = ExperimentSpec(problem, arms, [int(s) for s in cfg["experiment.seeds"]],
                          Path(cfg["experiment.output"]), workers=int(cfg["experiment.workers"]))
    report = run_experiment(spec)
    _print_rows(("arm", "metric", "n_ok", "n_failed", "mean", "std", "min", "cv"),
                [[r["arm"], r["metric"], r["n_ok"], r["n_failed"]] +
                 [fmt(r[k]) for k in ("mean", "std", "min", "cv")] for r in report["summary"]])


def cmd_dump_points(args, cfg):
    problem = cfgmod.build_problem(cfg)
    config = cfgmod.training_config(cfg, problem)
    rng = np.random.default_rng(config.seed)
    if args.region == "boundary":
        pts, kinds = boundary_points(problem, config.n_boundary, rng, config.annuli)
        cols = [f"x{i}" for i in range(pts.shape[1])]
        write_points(args.output, np.column_stack([pts, kinds]), cols + ["kind"])
    else:
        if config.adaptive and args.checkpoint is None:
            raise ConfigurationError(f"sampler {config.sampler!r} needs --checkpoint for its residual")
        net = _network_for(args, problem) if args.checkpoint is not None else None
        pts = draw_interior(problem, net, config, rng)
        write_points(args.output, pts)
    print(f"wrote {len(pts)} points to {args.output}")


def cmd_demo_table1(args, cfg):
    rows = []
    for k in range(args.repetitions):
        out = Path(args.output) / f"rep_{k}" if args.output else None
        counts = demo_table1(np.random.default_rng([args.seed, k]), n=args.n, burn_in=args.burn_in,
                             annuli=args.annuli, p=cfg["sampler.p"], output=out)
        rows.append([k, counts["annular"], counts["mh"], counts["self_normalized"]])
    table = np.array(rows)
    rows.append(["median"] + [fmt(float(np.median(table[:, c]))) for c in (1, 2, 3)])
    _print_rows(("repetition", "annular", "mh", "self_normalized"), rows)


def cmd_slice(args, cfg):
    problem = cfgmod.build_problem(cfg)
    net = _network_for(args, problem)
    axes = tuple(int(a) for a in args.axes.split(","))
    fixed = None if args.fixed is None else [float(v) for v in args.fixed.split(",")]
    grid = slice_grid(net, problem, axes, args.resolution, fixed)
    write_points(args.output, grid, ("a", "b", "phi", "abs_err"))
    print(f"wrote {args.resolution}x{args.resolution} slice to {args.output}")


COMMANDS = {
    "train": cmd_train,
    "evaluate": cmd_evaluate,
    "run-experiment": cmd_run_experiment,
    "dump-points": cmd_dump_points,
    "demo-table1": cmd_demo_table1,
    "slice": cmd_slice,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="activepde",
        description="Deep least-squares PDE solver with residual-driven collocation sampling.",
        epilog="Config keys are overridden with --<section>.<name> VALUE, e.g. --stencil.h 1e-3.",
    )
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="YAML config file")
        return p

    p = add("train", "train one network; writes history.csv, walltime.csv, network.ckpt")
    p.add_argument("--output", default="run", help="output directory")
    p = add("evaluate", "print the test-set errors of a checkpoint as CSV")
    p.add_argument("--checkpoint", required=True)
    add("run-experiment", "paired-seed comparison of the sampler arms in experiment.arms")
    p = add("dump-points", "write one epoch's collocation points as CSV")
    p.add_argument("--output", required=True)
    p.add_argument("--checkpoint", help="network whose residual drives adaptive samplers")
    p.add_argument("--region", choices=("interior", "boundary"), default="interior")
    p = add("demo-table1", "count points inside the ellipse for each sampler")
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--burn-in", type=int, default=3500)
    p.add_argument("--annuli", type=int, default=4)
    p.add_argument("--output", help="directory for the point clouds")
    p = add("slice", "write a 2-D slice grid of phi and |u - phi|")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--axes", default="0,1", help="two input axes, e.g. 0,1 or 0,5 for (x1, t)")
    p.add_argument("--resolution", type=int, default=101)
    p.add_argument("--fixed", help="comma-separated base point for the other coordinates")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args, rest = parser.parse_known_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = cfgmod.load_config(args.config, parse_overrides(rest))
        COMMANDS[args.command](args, cfg)
    except (ActivePDEError, OSError, ValueError) as err:
        code = next((c for t, c in EXIT_CODES.items() if isinstance(err, t)), 1)
        print("error: " + json.dumps({"type": type(err).__name__, "message": str(err)}), file=sys.stderr)
        return code
    return 0


if __name__ == "__main__":
    sys.exit(main())
