"""Run configuration: a sectioned YAML file flattened to dotted keys.

Every setting has exactly one key, ``<section>.<name>``, and the CLI flag
``--<section>.<name>`` overrides it. Defaults are the benchmark defaults
(3 x 100 ReLU^3 network, 20000 epochs, 12000 interior points per epoch,
boundary weight 10, step 1e-4). ``training.n_boundary: null`` resolves per
problem to 12000 for stationary problems and ``N1 + N1 // d`` for
time-dependent ones.

Example::

    problem:
      name: elliptic
      dim: 10
    sampler:
      name: self_normalized
      p: 1
    stencil:
      h: 1.0e-4
"""

from __future__ import annotations

from pathlib import Path

import yaml

from .exceptions import ConfigurationError
from .problems import get_problem
from .trainer import TrainingConfig

DEFAULTS = {
    "problem.name": "elliptic",
    "problem.dim": 10,
    "problem.kink_width": 0.0,
    "network.depth": 3,
    "network.width": 100,
    "training.epochs": 20000,
    "training.n_interior": 12000,
    "training.n_boundary": None,
    "training.lam": 10.0,
    "training.seed": 0,
    "training.eval_every": 100,
    "training.checkpoint_every": 0,
    "training.lr_schedule": "staircase",
    "training.lr": 1e-3,
    "training.test_size": 10000,
    "sampler.name": "self_normalized",
    "sampler.p": 1.0,
    "sampler.burn_in": 0,
    "sampler.annuli": 10,
    "sampler.pool_size": None,
    "sampler.adaptive_boundary": True,
    "rar.base_count": None,
    "rar.top_k": None,
    "stencil.h": 1e-4,
    "stencil.first": "central",
    "experiment.seeds": [0, 1, 2],
    "experiment.arms": ["annular", "self_normalized"],
    "experiment.workers": 1,
    "experiment.output": "runs",
}

# dotted key -> TrainingConfig field
_TRAINING_FIELDS = {
    "network.depth": "depth",
    "network.width": "width",
    "training.epochs": "epochs",
    "training.n_interior": "n_interior",
    "training.n_boundary": "n_boundary",
    "training.lam": "lam",
    "training.seed": "seed",
    "training.eval_every": "eval_every",
    "training.checkpoint_every": "checkpoint_every",
    "training.lr_schedule": "lr_schedule",
    "training.lr": "lr",
    "training.test_size": "test_size",
    "sampler.name": "sampler",
    "sampler.p": "p",
    "sampler.burn_in": "burn_in",
    "sampler.annuli": "annuli",
    "sampler.pool_size": "pool_size",
    "sampler.adaptive_boundary": "adaptive_boundary",
    "rar.base_count": "rar_base",
    "rar.top_k": "rar_top",
    "stencil.h": "stencil_h",
    "stencil.first": "stencil_first",
}


def flatten(nested: dict) -> dict:
    flat = {}
    for section, body in nested.items():
        if not isinstance(body, dict):
            raise ConfigurationError(f"config section {section!r} must be a mapping")
        for name, value in body.items():
            flat[f"{section}.{name}"] = value
    return flat


def _coerce(key: str, value):
    """Cast a value (possibly a CLI string) to the type of the key's default."""
    default = DEFAULTS[key]
    if isinstance(value, str) and not isinstance(default, str):
        value = yaml.safe_load(value)
    if value is None:
        return None
    if isinstance(default, bool):
        if not isinstance(value, bool):
            raise ConfigurationError(f"{key} expects true/false, got {value!r}")
        return value
    if isinstance(default, float):
        return float(value)
    if isinstance(default, int) or key in ("training.n_boundary", "sampler.pool_size",
                                           "rar.base_count", "rar.top_k"):
        if isinstance(value, float) and not value.is_integer():
            raise ConfigurationError(f"{key} expects an integer, got {value!r}")
        return int(value)
    if isinstance(default, list):
        return list(value) if isinstance(value, (list, tuple)) else [value]
    return value


def load_config(path=None, overrides: dict | None = None) -> dict:
    """Defaults, then the YAML file at ``path``, then ``overrides`` (dotted keys)."""
    cfg = dict(DEFAULTS)
    layers = []
    if path is not None:
        text = Path(path).read_text()
        layers.append(flatten(yaml.safe_load(text) or {}))
    if overrides:
        layers.append(overrides)
    for layer in layers:
        for key, value in layer.items():
            if key not in DEFAULTS:
                raise ConfigurationError(f"unknown config key {key!r}")
            cfg[key] = _coerce(key, value)
    return cfg


def build_problem(cfg: dict):
    options = {"kink_width": cfg["problem.kink_width"]} if cfg["problem.kink_width"] else {}
    return get_problem(cfg["problem.name"], cfg["problem.dim"], **options)


def default_n_boundary(problem, n_interior: int) -> int:
    if problem.time_dependent:
        return n_interior + n_interior // problem.spatial_dim
    return n_interior


def training_config(cfg: dict, problem=None, **changes) -> TrainingConfig:
    problem = build_problem(cfg) if problem is None else problem
    kw = {field: cfg[key] for key, field in _TRAINING_FIELDS.items()}
    if kw["n_boundary"] is None:
        kw["n_boundary"] = default_n_boundary(problem, kw["n_interior"])
    kw.update(changes)
    return TrainingConfig(**kw)


def dump_config(cfg: dict, path) -> None:
    nested: dict = {}
    for key, value in cfg.items():
        section, name = key.split(".", 1)
        nested.setdefault(section, {})[name] = value
    Path(path).write_text(yaml.safe_dump(nested, sort_keys=False))
