"""Least-squares training loop with adaptive collocation sampling.

Each epoch draws a proposal pool per region, evaluates the network once on
the pool's stencil probes, selects training points from the pool (all of it
for the baseline; by residual for the adaptive samplers) and takes an Adam
step on the discretised loss

    J = 1/N1 sum_i |D phi(x_i) - f(x_i)|^2 + lam/N2 sum_j |B phi(x_j) - g(x_j)|^2.

Selection is expressed as multiplicities over the pool, so a point picked
twice contributes twice and no second forward pass is needed. The gradient
is exact for the discretised loss: residual cotangents are pulled back
through the stencil onto the probe values and then through the network.
"""

from __future__ import annotations

import csv
import logging
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import samplers
from .exceptions import ConfigurationError, DivergenceError
from .metrics import TestSet, max_modulus_error, rel_l2_error
from .network import AdamState, LrSchedule, SolutionNetwork, adam_step, save_checkpoint
from .stencil import StencilConfig

logger = logging.getLogger(__name__)

SAMPLERS = ("annular", "mh", "self_normalized", "rar")


@dataclass
class TrainingConfig:
    epochs: int = 20000
    n_interior: int = 12000
    n_boundary: int = 12000
    lam: float = 10.0
    sampler: str = "self_normalized"
    p: float = 1.0
    burn_in: int = 0
    annuli: int = 10
    pool_size: int | None = None
    rar_base: int | None = None
    rar_top: int | None = None
    adaptive_boundary: bool = True
    stencil_h: float = 1e-4
    stencil_first: str = "central"
    depth: int = 3
    width: int = 100
    seed: int = 0
    eval_every: int = 100
    checkpoint_every: int = 0
    lr_schedule: str = "staircase"
    lr: float = 1e-3
    test_size: int = 10000

    def __post_init__(self):
        if min(self.epochs, self.n_interior, self.n_boundary) < 1:
            raise ConfigurationError("epochs, n_interior and n_boundary must be >= 1")
        if self.lam < 0:
            raise ConfigurationError("boundary weight must be non-negative")
        if self.sampler not in SAMPLERS:
            raise ConfigurationError(f"sampler must be one of {SAMPLERS}, got {self.sampler!r}")
        if self.p < 0 or self.burn_in < 0:
            raise ConfigurationError("p and burn_in must be non-negative")
        if self.pool_size is not None and self.pool_size < self.n_interior:
            raise ConfigurationError("pool_size must be at least n_interior")
        if self.lr_schedule not in ("staircase", "constant"):
            raise ConfigurationError("lr_schedule must be 'staircase' or 'constant'")
        if self.eval_every < 1:
            raise ConfigurationError("eval_every must be >= 1")
        StencilConfig(self.stencil_h, self.stencil_first)

    @property
    def stencil(self) -> StencilConfig:
        return StencilConfig(self.stencil_h, self.stencil_first)

    @property
    def adaptive(self) -> bool:
        return self.sampler != "annular"

    def rar_counts(self, n: int):
        top = self.rar_top if self.rar_top is not None else n // 6
        base = self.rar_base if self.rar_base is not None else n - top
        return base, top


@dataclass
class TrainingHistory:
    epoch: list = field(default_factory=list)
    time_s: list = field(default_factory=list)
    loss: list = field(default_factory=list)
    rel_l2: list = field(default_factory=list)
    max_mod: list = field(default_factory=list)

    COLUMNS = ("epoch", "time_s", "loss", "rel_l2", "max_mod")

    def append(self, epoch, time_s, loss, rel_l2, max_mod):
        self.epoch.append(int(epoch))
        self.time_s.append(float(time_s))
        self.loss.append(float(loss))
        self.rel_l2.append(float(rel_l2))
        self.max_mod.append(float(max_mod))

    def rows(self, columns=COLUMNS):
        return [[getattr(self, c)[i] for c in columns] for i in range(len(self.epoch))]

    def to_csv(self, path, columns=COLUMNS):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(columns)
            for row in self.rows(columns):
                writer.writerow([v if isinstance(v, int) else repr(v) for v in row])

    def final(self):
        return {c: getattr(self, c)[-1] for c in self.COLUMNS}


# --------------------------------------------------------------------------- #
# loss assembly
# --------------------------------------------------------------------------- #


class RegionTerms:
    """Residuals, probe Jacobians and forward cache for one pool of points."""

    def __init__(self, net: SolutionNetwork, problem, X, region: str, cfg: StencilConfig, kinds=None):
        self.X = X
        self.kinds = kinds
        if region == "interior":
            st = problem.interior_stencil(X, cfg)
        else:
            st = problem.boundary_stencil(X, cfg)
        V, self.cache = net.forward_cached(st.flat_probes)
        V = V.reshape(X.shape[0], st.width)
        if region == "interior":
            self.residual, self.jac = problem.interior_terms(st, V)
        else:
            self.residual, self.jac = problem.boundary_terms(st, V, kinds)
        bad = ~np.isfinite(self.residual)
        if bad.any():
            point = X[np.argmax(bad)]
            raise DivergenceError(f"non-finite {region} residual at point {point.tolist()}")

    def loss(self, counts, weight: float):
        n = counts.sum()
        return weight * float(np.dot(counts, self.residual ** 2)) / n

    def probe_cotangents(self, counts, weight: float):
        n = counts.sum()
        scale = 2.0 * weight * counts * self.residual / n
        return (scale[:, None] * self.jac).reshape(-1)


def loss_and_gradient(net, problem, X_int, X_bd, kinds, lam: float, cfg: StencilConfig,
                      counts_int=None, counts_bd=None):
    """Discretised loss, its exact parameter gradient and the per-point residuals."""
    interior = RegionTerms(net, problem, X_int, "interior", cfg)
    boundary = RegionTerms(net, problem, X_bd, "boundary", cfg, kinds)
    return _assemble(net, interior, boundary, lam, counts_int, counts_bd)


def _assemble(net, interior, boundary, lam, counts_int=None, counts_bd=None):
    ci = np.ones(interior.X.shape[0]) if counts_int is None else np.asarray(counts_int, float)
    cb = np.ones(boundary.X.shape[0]) if counts_bd is None else np.asarray(counts_bd, float)
    J = interior.loss(ci, 1.0) + boundary.loss(cb, lam)
    if not np.isfinite(J):
        raise DivergenceError(f"non-finite loss {J}")
    grad = net.backward(interior.cache, interior.probe_cotangents(ci, 1.0))
    if lam:
        grad += net.backward(boundary.cache, boundary.probe_cotangents(cb, lam))
    return J, grad, interior.residual, boundary.residual


def compute_loss(net, interior, boundary, lam: float, problem, cfg: StencilConfig = StencilConfig()):
    """Loss ``J`` and the interior and boundary residual vectors for fixed batches.

    ``net`` may be any batch predictor, e.g. ``problem.exact``.
    """
    r_int = problem.interior_residual(net, interior.points, cfg)
    r_bd = problem.boundary_residual(net, boundary.points, boundary.kinds, cfg)
    for name, r, batch in (("interior", r_int, interior), ("boundary", r_bd, boundary)):
        bad = ~np.isfinite(r)
        if bad.any():
            raise DivergenceError(f"non-finite {name} residual at point {batch.points[np.argmax(bad)].tolist()}")
    J = float(np.mean(r_int ** 2)) + lam * float(np.mean(r_bd ** 2))
    return J, r_int, r_bd


# --------------------------------------------------------------------------- #
# per-epoch sampling
# --------------------------------------------------------------------------- #


def _pool_size(config: TrainingConfig, n: int) -> int:
    if config.sampler == "mh":
        return n + config.burn_in
    if config.sampler == "self_normalized":
        return n if config.pool_size is None else max(n, config.pool_size)
    if config.sampler == "rar":
        return config.rar_counts(n)[0]
    return n


def _select(config: TrainingConfig, terms: RegionTerms, n: int, rng):
    """Multiplicity of each pool point in this epoch's training set."""
    pool = terms.X.shape[0]
    weights = np.abs(terms.residual) ** config.p if config.p else np.ones(pool)
    if config.sampler == "mh":
        idx = samplers.mh_chain_indices(weights, rng.random(pool), n)
    elif config.sampler == "self_normalized":
        idx = samplers.self_normalized_indices(weights, n, rng)
    else:
        idx = samplers.rar_indices(weights, config.rar_counts(n)[1])
    return np.bincount(idx, minlength=pool).astype(float)


def _check_pools(problem, config: TrainingConfig):
    if problem.domain.kind == "square":
        return
    n1 = config.n_interior
    pool = _pool_size(config, n1) if config.adaptive else n1
    if pool % config.annuli:
        raise ConfigurationError(
            f"number of annuli ({config.annuli}) must divide the interior pool size ({pool})"
        )


def _interior_pool(problem, config, n, rng):
    return samplers.interior_points(problem, n, rng, config.annuli)


def draw_interior(problem, network: SolutionNetwork, config: TrainingConfig, rng):
    """One epoch's interior training points, repeated points expanded."""
    n1 = config.n_interior
    if not config.adaptive:
        return _interior_pool(problem, config, n1, rng)
    X = _interior_pool(problem, config, _pool_size(config, n1), rng)
    terms = RegionTerms(network, problem, X, "interior", config.stencil)
    counts = _select(config, terms, n1, rng).astype(int)
    return np.repeat(X, counts, axis=0)


def train(problem, config: TrainingConfig, network: SolutionNetwork | None = None,
          test: TestSet | None = None, checkpoint_path=None, callback=None):
    """Train a solution network; returns ``(network, history)``.

    Deterministic given ``config.seed``: the seed spawns one stream for the
    initial weights and one for all sampling. ``callback(epoch, network, J)``
    is called after each update when given.
    """
    _check_pools(problem, config)
    init_seq, sample_seq = np.random.SeedSequence(config.seed).spawn(2)
    if network is None:
        network = SolutionNetwork(config.depth, config.width, problem.input_dim)
        network.initialize(np.random.default_rng(init_seq))
    rng = np.random.default_rng(sample_seq)
    if test is None:
        test = TestSet.for_problem(problem, size=config.test_size)
    schedule = LrSchedule(config.epochs, config.lr if config.lr_schedule == "constant" else None)
    cfg = config.stencil
    state = AdamState.fresh(network.n_params)
    history = TrainingHistory()
    elapsed = 0.0
    n1, n2 = config.n_interior, config.n_boundary
    adapt_bd = config.adaptive and config.adaptive_boundary

    for k in range(config.epochs):
        tick = time.perf_counter()
        X_int = _interior_pool(problem, config, _pool_size(config, n1) if config.adaptive else n1, rng)
        n2_pool = _pool_size(config, n2) if adapt_bd else n2
        X_bd, kinds = samplers.boundary_points(problem, n2_pool, rng, config.annuli)
        try:
            interior = RegionTerms(network, problem, X_int, "interior", cfg)
            boundary = RegionTerms(network, problem, X_bd, "boundary", cfg, kinds)
            ci = _select(config, interior, n1, rng) if config.adaptive else None
            cb = _select(config, boundary, n2, rng) if adapt_bd else None
            J, grad, _, _ = _assemble(network, interior, boundary, config.lam, ci, cb)
            theta, state = adam_step(state, network.theta, grad, schedule(k))
        except DivergenceError as err:
            err.network, err.history, err.epoch = network, history, k
            raise
        if not np.all(np.isfinite(theta)):
            err = DivergenceError(f"non-finite parameters after epoch {k}")
            err.network, err.history, err.epoch = network, history, k
            raise err
        network.set_params(theta)
        elapsed += time.perf_counter() - tick

        if callback is not None:
            callback(k, network, J)
        if k % config.eval_every == 0 or k == config.epochs - 1:
            history.append(k, elapsed, J, rel_l2_error(network, test), max_modulus_error(network, test))
        if checkpoint_path is not None and config.checkpoint_every and (k + 1) % config.checkpoint_every == 0:
            save_checkpoint(checkpoint_path, network)
    return network, history


def config_dict(config: TrainingConfig) -> dict:
    return asdict(config)


def config_fields():
    return {f.name: f for f in fields(TrainingConfig)}
