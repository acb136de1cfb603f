"""Paired-seed experiments, the ellipse point-count demo and slice grids.

Output layout of :func:`run_experiment`::

    <output>/
      runs.csv              one row per (arm, seed): status and final errors
      summary.csv           per arm and metric: mean, std, min, cv, counts
      reductions.csv        per non-baseline arm and seed: error reduction in percent
      <arm>/seed_<k>/history.csv    epoch, loss, rel_l2, max_mod
      <arm>/seed_<k>/walltime.csv   epoch, time_s
      <arm>/seed_<k>/network.ckpt

Everything except ``walltime.csv`` is a deterministic function of the ExperimentSpec.
"""

from __future__ import annotations

import csv
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import samplers
from .exceptions import ConfigurationError, DivergenceError
from .metrics import TestSet, error_reduction
from .network import save_checkpoint
from .trainer import TrainingConfig, TrainingHistory, train

logger = logging.getLogger(__name__)

HISTORY_COLUMNS = ("epoch", "loss", "rel_l2", "max_mod")
METRICS = ("rel_l2", "max_mod")


@dataclass
class Arm:
    name: str
    config: TrainingConfig


@dataclass
class ExperimentSpec:
    """Arms share the seed list index by index, so trial k of every arm uses ``seeds[k]``.

    The first arm is the baseline for the error-reduction rows.
    """

    problem: object
    arms: list
    seeds: list
    output: Path
    workers: int = 1
    test: TestSet | None = field(default=None, repr=False)

    def __post_init__(self):
        if not self.seeds:
            raise ConfigurationError("experiment needs at least one seed")
        if not self.arms:
            raise ConfigurationError("experiment needs at least one arm")
        names = [a.name for a in self.arms]
        if len(set(names)) != len(names):
            raise ConfigurationError(f"arm names must be unique, got {names}")
        if self.workers < 1:
            raise ConfigurationError("workers must be >= 1")
        self.output = Path(self.output)


def fmt(value) -> str:
    """Shortest round-trip text for CSV cells."""
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if value is None:
        return ""
    return repr(float(value))


def write_history(history: TrainingHistory, run_dir: Path) -> None:
    history.to_csv(run_dir / "history.csv", HISTORY_COLUMNS)
    history.to_csv(run_dir / "walltime.csv", ("epoch", "time_s"))


def read_final(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: float(v) for k, v in rows[-1].items()}


def _run_one(problem, arm: Arm, seed: int, run_dir: Path, test: TestSet):
    run_dir.mkdir(parents=True, exist_ok=True)
    config = replace(arm.config, seed=int(seed))
    try:
        net, history = train(problem, config, test=test)
    except DivergenceError as err:
        history = getattr(err, "history", None)
        if history is not None and history.epoch:
            write_history(history, run_dir)
        return {"arm": arm.name, "seed": seed, "status": "failed", "error": str(err)}
    write_history(history, run_dir)
    save_checkpoint(run_dir / "network.ckpt", net)
    final = history.final()
    return {"arm": arm.name, "seed": seed, "status": "ok", "error": "",
            "loss": final["loss"], "rel_l2": final["rel_l2"], "max_mod": final["max_mod"]}


def summarize(values) -> dict:
    """Mean, sample standard deviation, minimum and coefficient of variation."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return {"mean": math.nan, "std": math.nan, "min": math.nan, "cv": math.nan}
    mean = float(np.mean(v))
    std = float(np.std(v, ddof=1)) if v.size > 1 else 0.0
    return {"mean": mean, "std": std, "min": float(np.min(v)), "cv": std / mean if mean else math.nan}


def run_experiment(spec: ExperimentSpec) -> dict:
    """Run every arm x seed, write the CSVs and return the summary tables."""
    out = spec.output
    out.mkdir(parents=True, exist_ok=True)
    test = spec.test if spec.test is not None else TestSet.for_problem(spec.problem)
    jobs = [(arm, seed, out / arm.name / f"seed_{seed}") for arm in spec.arms for seed in spec.seeds]
    if spec.workers == 1:
        results = [_run_one(spec.problem, arm, seed, d, test) for arm, seed, d in jobs]
    else:
        with ProcessPoolExecutor(max_workers=spec.workers) as pool:
            futures = [pool.submit(_run_one, spec.problem, arm, seed, d, test) for arm, seed, d in jobs]
            results = [f.result() for f in futures]

    run_cols = ("arm", "seed", "status", "loss", "rel_l2", "max_mod", "error")
    with open(out / "runs.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(run_cols)
        for r in results:
            w.writerow([r["arm"], r["seed"], r["status"]] +
                       [fmt(r.get(c)) for c in ("loss", "rel_l2", "max_mod")] + [r["error"]])

    summary = summary_from_runs(out, spec)
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("arm", "metric", "n_ok", "n_failed", "mean", "std", "min", "cv"))
        for row in summary:
            w.writerow([row["arm"], row["metric"], row["n_ok"], row["n_failed"]] +
                       [fmt(row[k]) for k in ("mean", "std", "min", "cv")])

    reductions = reduction_rows(results, spec)
    with open(out / "reductions.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(("arm", "baseline", "seed", "metric", "reduction_pct"))
        for row in reductions:
            w.writerow([row["arm"], row["baseline"], row["seed"], row["metric"], fmt(row["reduction_pct"])])
    return {"runs": results, "summary": summary, "reductions": reductions}


def summary_from_runs(out: Path, spec: ExperimentSpec) -> list:
    """Aggregate final errors read back from the per-run history files."""
    rows = []
    for arm in spec.arms:
        finals, failed = [], 0
        for seed in spec.seeds:
            run_dir = out / arm.name / f"seed_{seed}"
            if (run_dir / "network.ckpt").exists():
                finals.append(read_final(run_dir / "history.csv"))
            else:
                failed += 1
        for metric in METRICS:
            stats = summarize([f[metric] for f in finals])
            rows.append({"arm": arm.name, "metric": metric, "n_ok": len(finals), "n_failed": failed, **stats})
    return rows


def reduction_rows(results, spec: ExperimentSpec) -> list:
    base = spec.arms[0].name
    ok = {(r["arm"], r["seed"]): r for r in results if r["status"] == "ok"}
    rows = []
    for arm in spec.arms[1:]:
        per_metric = {m: [] for m in METRICS}
        for seed in spec.seeds:
            a, b = ok.get((arm.name, seed)), ok.get((base, seed))
            if a is None or b is None:
                continue
            for m in METRICS:
                red = error_reduction(a[m], b[m])
                per_metric[m].append(red)
                rows.append({"arm": arm.name, "baseline": base, "seed": seed, "metric": m, "reduction_pct": red})
        for m in METRICS:
            if per_metric[m]:
                rows.append({"arm": arm.name, "baseline": base, "seed": "median", "metric": m,
                             "reduction_pct": float(np.median(per_metric[m]))})
    return rows


# --------------------------------------------------------------------------- #
# ellipse point-count demo
# --------------------------------------------------------------------------- #

ELLIPSE_AXES = (0.18, 0.16)


def demo_surface(X):
    """Synthetic residual surface peaked inside the ellipse, with a floor of 0.01."""
    a, b = ELLIPSE_AXES
    return np.exp(-((X[:, 0] / a) ** 2 + (X[:, 1] / b) ** 2)) + 0.01


def inside_ellipse(X):
    a, b = ELLIPSE_AXES
    return (X[:, 0] / a) ** 2 + (X[:, 1] / b) ** 2 < 1.0


def demo_table1(rng, n: int = 500, burn_in: int = 3500, annuli: int = 4, p: float = 1.0,
                output=None) -> dict:
    """Points inside the ellipse out of ``n`` for each sampler.

    All three draw their proposals from the uniform annular distribution on
    the unit disk. When ``output`` is given, each point cloud is written to
    ``<output>/table1_<sampler>.csv``.
    """
    density = samplers.ResidualDensity(demo_surface, p=p)

    def proposal(k, r):
        return samplers.annular_points(k, annuli, 2, r)

    clouds = {
        "annular": samplers.sample_uniform_annular(n, annuli, 2, rng).points,
        "mh": samplers.mh_sample_vectorized(density, n, burn_in, proposal, rng).points,
        "self_normalized": samplers.self_normalized_sample(density, n, rng, proposal).points,
    }
    if output is not None:
        output = Path(output)
        output.mkdir(parents=True, exist_ok=True)
        for name, pts in clouds.items():
            write_points(output / f"table1_{name}.csv", pts, ("x", "y"))
    return {name: int(np.sum(inside_ellipse(pts))) for name, pts in clouds.items()}


def write_points(path, points, columns=None) -> None:
    points = np.atleast_2d(points)
    columns = columns or [f"x{i}" for i in range(points.shape[1])]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in points:
            w.writerow([repr(float(v)) for v in row])


# --------------------------------------------------------------------------- #
# slices
# --------------------------------------------------------------------------- #


def slice_grid(predict, problem, axes=(0, 1), resolution: int = 101, fixed=None):
    """Evaluate ``predict`` and ``|u - predict|`` on a 2-D slice of the domain.

    ``axes`` are input coordinates (the last one is time for time-dependent
    problems); every other coordinate is held at ``fixed`` (default 0, or
    time 0.5). Points outside the domain get NaN. Returns rows of
    ``(a, b, phi, abs_err)``.
    """
    D = problem.input_dim
    i, j = axes
    if not (0 <= i < D and 0 <= j < D) or i == j:
        raise ConfigurationError(f"slice axes {axes} invalid for input dimension {D}")
    if resolution < 2:
        raise ConfigurationError("resolution must be at least 2")
    base = np.zeros(D)
    if problem.time_dependent:
        base[-1] = 0.5
    if fixed is not None:
        fixed = np.asarray(fixed, dtype=float)
        if fixed.shape != (D,):
            raise ConfigurationError(f"fixed point needs {D} coordinates")
        base = fixed

    def span(axis):
        if problem.domain.kind == "square" or (problem.time_dependent and axis == D - 1):
            return np.linspace(0.0, 1.0, resolution)
        return np.linspace(-1.0, 1.0, resolution)

    A, B = np.meshgrid(span(i), span(j), indexing="ij")
    X = np.repeat(base[None, :], A.size, axis=0)
    X[:, i], X[:, j] = A.ravel(), B.ravel()
    inside = problem.domain.is_interior(X) | (problem.domain.boundary_kind(X) >= 0)
    phi = np.full(A.size, np.nan)
    err = np.full(A.size, np.nan)
    if inside.any():
        phi[inside] = np.asarray(predict(X[inside]), dtype=float)
        err[inside] = np.abs(problem.exact(X[inside]) - phi[inside])
    return np.column_stack([X[:, i], X[:, j], phi, err])
