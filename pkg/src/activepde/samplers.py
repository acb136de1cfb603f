"""Collocation-point samplers.

Baselines draw from fixed distributions (uniform annular in the ball, uniform
on the boundary). The adaptive samplers target a density proportional to
``R_abs(x)**p`` without ever computing its normalising constant:

* :func:`mh_sample` / :func:`mh_sample_vectorized`: independence Metropolis
  chain whose proposals come from a baseline sampler,
* :func:`self_normalized_sample`: weighted resampling of a baseline pool,
* :func:`rar_sample`: a baseline pool with its top-k points duplicated.

Since the proposal enters the acceptance ratio only through ``R_abs``, the
chains and resamplers target ``R_abs**p`` times the proposal density (plain
``R_abs**p`` when the proposal is uniform).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractViolation, DegenerateDensityError
from .problems import INITIAL, INITIAL_VELOCITY, LATERAL

logger = logging.getLogger(__name__)


@dataclass
class SampleBatch:
    points: np.ndarray
    region: str = "interior"
    sampler: str = "annular"
    epoch: int | None = None
    seed: int | None = None
    kinds: np.ndarray | None = None

    def __len__(self):
        return self.points.shape[0]


class ResidualDensity:
    """Unnormalised density ``x -> |residual(x)|**p``.

    ``residual`` maps an (n, D) batch to (n,) absolute residuals.
    """

    def __init__(self, residual, p: float = 1.0, region: str = "interior"):
        if p < 0:
            raise ContractViolation("exponent p must be non-negative")
        self.residual = residual
        self.p = float(p)
        self.region = region

    def __call__(self, X):
        if self.p == 0.0:
            return np.ones(np.atleast_2d(X).shape[0])
        values = np.abs(np.asarray(self.residual(X), dtype=float)) ** self.p
        if not np.all(np.isfinite(values)):
            raise ContractViolation("density evaluated to a non-finite value")
        return values


# --------------------------------------------------------------------------- #
# baseline geometry
# --------------------------------------------------------------------------- #


def uniform_sphere(n: int, d: int, rng):
    """``n`` points uniform on the unit sphere in R^d."""
    g = rng.standard_normal((n, d))
    return g / np.linalg.norm(g, axis=1, keepdims=True)


def annular_points(n: int, annuli: int, d: int, rng):
    if annuli < 1 or n % annuli:
        raise ConfigurationError(
            f"number of annuli ({annuli}) must divide the point count ({n})"
        )
    per = n // annuli
    shell = np.repeat(np.arange(annuli), per)
    r_in, r_out = shell / annuli, (shell + 1) / annuli
    u = rng.random(n)
    radius = (r_in ** d + u * (r_out ** d - r_in ** d)) ** (1.0 / d)
    # shuffle so that consecutive points are exchangeable (the MH chain walks them in order)
    return (uniform_sphere(n, d, rng) * radius[:, None])[rng.permutation(n)]


def sample_uniform_annular(n: int, annuli: int, d: int, rng) -> SampleBatch:
    """``n / annuli`` volume-uniform points in each shell ``k/annuli < |x| < (k+1)/annuli``."""
    return SampleBatch(annular_points(n, annuli, d, rng), "interior", "annular")


def interior_points(problem, n: int, rng, annuli: int = 1):
    """Baseline interior draw for a problem: annular in the ball (times uniform t),
    uniform on the square."""
    dom = problem.domain
    if dom.kind == "square":
        return rng.random((n, 2))
    x = annular_points(n, annuli, dom.spatial_dim, rng)
    if dom.time_dependent:
        return np.column_stack([x, rng.random(n)])
    return x


def _square_perimeter(n: int, rng):
    edge = rng.integers(0, 4, size=n)
    s = rng.random(n)
    pts = np.empty((n, 2))
    pts[:, 0] = np.select([edge == 0, edge == 1], [s, s], default=(edge == 3).astype(float))
    pts[:, 1] = np.select([edge == 0, edge == 1], [0.0, 1.0], default=s)
    return pts


def boundary_points(problem, n: int, rng, annuli: int = 1):
    """Boundary draw following ``problem.boundary_split``. Returns ``(points, kinds)``."""
    if n < 1:
        raise ContractViolation("need at least one boundary point")
    dom = problem.domain
    if dom.kind == "square":
        return _square_perimeter(n, rng), np.full(n, LATERAL)
    d = dom.spatial_dim
    if not dom.time_dependent:
        return uniform_sphere(n, d, rng), np.full(n, LATERAL)
    split = problem.boundary_split(n)
    blocks, kinds = [], []
    n_lat = split.get(LATERAL, 0)
    if n_lat:
        blocks.append(np.column_stack([uniform_sphere(n_lat, d, rng), rng.random(n_lat)]))
        kinds.append(np.full(n_lat, LATERAL))
    for kind in (INITIAL, INITIAL_VELOCITY):
        k = split.get(kind, 0)
        if k:
            ann = annuli if k % annuli == 0 else 1
            blocks.append(np.column_stack([annular_points(k, ann, d, rng), np.zeros(k)]))
            kinds.append(np.full(k, kind))
    return np.vstack(blocks), np.concatenate(kinds)


def sample_boundary(n: int, problem, rng, annuli: int = 1) -> SampleBatch:
    pts, kinds = boundary_points(problem, n, rng, annuli)
    return SampleBatch(pts, "boundary", "uniform", kinds=kinds)


# --------------------------------------------------------------------------- #
# adaptive samplers
# --------------------------------------------------------------------------- #


def _check_density(values):
    if not np.any(values > 0):
        raise DegenerateDensityError("density is zero at every proposal")


def mh_sample(density, n: int, burn_in: int, proposal, rng) -> SampleBatch:
    """Sequential independence Metropolis-Hastings.

    ``proposal(k, rng)`` returns ``k`` candidate points. The chain starts at
    the first candidate, runs ``n + burn_in`` states and returns the last
    ``n``. A candidate is accepted when its density is at least the current
    one, otherwise with probability equal to the density ratio. A zero-density
    current state always gives way to the candidate.
    """
    if burn_in < 0 or n < 1:
        raise ContractViolation("need n >= 1 and burn_in >= 0")
    total = n + burn_in
    x = np.asarray(proposal(1, rng))[0]
    rng.random()  # keeps the uniform stream aligned with mh_sample_vectorized
    fx = float(density(x[None, :])[0])
    chain = np.empty((total, x.shape[0]))
    chain[0] = x
    any_positive = fx > 0
    for j in range(1, total):
        cand = np.asarray(proposal(1, rng))[0]
        u = rng.random()
        fc = float(density(cand[None, :])[0])
        any_positive |= fc > 0
        if fc >= fx or not fc / fx < u:
            x, fx = cand, fc
        chain[j] = x
    if not any_positive:
        raise DegenerateDensityError("density is zero at every proposal")
    return SampleBatch(chain[-n:], sampler="mh")


def mh_chain_indices(values, uniforms, n: int):
    """Accept/reject sweep over pre-evaluated proposals.

    ``values[i]`` is the density of proposal ``i`` and ``uniforms[i]`` its
    uniform draw (``uniforms[0]`` is unused). Returns, for each of the last
    ``n`` chain states, the index of the proposal it holds.
    """
    values = np.asarray(values, dtype=float)
    _check_density(values)
    vals, us = values.tolist(), np.asarray(uniforms).tolist()
    state = list(range(len(vals)))
    current = 0
    for i in range(1, len(vals)):
        fc, fx = vals[i], vals[current]
        if fc < fx and fc / fx < us[i]:
            state[i] = current
        else:
            current = i
    return np.asarray(state[-n:])


def mh_sample_vectorized(density, n: int, burn_in: int, proposal, rng) -> SampleBatch:
    """Independence Metropolis-Hastings with pre-generated proposals.

    All ``n + burn_in`` candidates and uniforms are drawn up front and the
    density is evaluated in one batch; the accept/reject sweep then walks the
    arrays, carrying the previous point (and its density) forward on
    rejection. Returns the last ``n`` states.
    """
    if burn_in < 0 or n < 1:
        raise ContractViolation("need n >= 1 and burn_in >= 0")
    total = n + burn_in
    X = np.asarray(proposal(total, rng), dtype=float)
    U = rng.random(total)
    idx = mh_chain_indices(density(X), U, n)
    return SampleBatch(X[idx], sampler="mh")


def resample_indices(weights, n: int, rng):
    """Indices drawn with replacement, probability proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    cdf = np.cumsum(w / w.sum())
    cdf[-1] = 1.0
    return np.searchsorted(cdf, rng.random(n), side="right")


def self_normalized_indices(weights, n: int, rng):
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ContractViolation("weights must be finite and non-negative")
    if not np.any(w > 0):
        logger.warning("all residual weights are zero; returning the uniform pool")
        return np.arange(n)
    return resample_indices(w, n, rng)


def self_normalized_sample(density, n: int, rng, proposal, pool_size: int | None = None) -> SampleBatch:
    """Resample ``n`` points from a proposal pool with probabilities ``w / sum(w)``.

    A pool whose weights are all zero is returned as-is (first ``n`` points)
    with a warning.
    """
    pool_size = n if pool_size is None else int(pool_size)
    if pool_size < n:
        raise ContractViolation("pool_size must be at least n")
    pool = np.asarray(proposal(pool_size, rng), dtype=float)
    idx = self_normalized_indices(density(pool), n, rng)
    return SampleBatch(pool[idx], sampler="self_normalized")


def rar_indices(weights, top_k: int):
    """Pool indices followed by the ``top_k`` highest-weight indices (stable ties)."""
    w = np.asarray(weights, dtype=float)
    if top_k > w.shape[0]:
        raise ContractViolation("top_k cannot exceed the pool size")
    top = np.argsort(-w, kind="stable")[:top_k]
    return np.concatenate([np.arange(w.shape[0]), top])


def rar_sample(density, rng, proposal, base_count: int = 10000, top_k: int = 2000) -> SampleBatch:
    """Base pool of ``base_count`` points plus copies of its ``top_k`` highest-density points."""
    pool = np.asarray(proposal(base_count, rng), dtype=float)
    return SampleBatch(pool[rar_indices(density(pool), top_k)], sampler="rar")
