"""Accuracy metrics on a fixed test set and Monte-Carlo estimator diagnostics."""

from __future__ import annotations

import zlib
from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation
from .samplers import interior_points

TEST_SIZE = 10000
TEST_ANNULI = 10


def test_seed(problem) -> int:
    """Fixed per-problem seed: CRC32 of ``"<name>-<d>"``."""
    return zlib.crc32(f"{problem.name}-{problem.spatial_dim}".encode())


@dataclass
class TestSet:
    points: np.ndarray
    exact: np.ndarray
    seed: int

    __test__ = False  # not a pytest class

    @classmethod
    def for_problem(cls, problem, size: int = TEST_SIZE, seed: int | None = None,
                    annuli: int = TEST_ANNULI) -> "TestSet":
        """Test points from the baseline interior distribution with a fixed seed.

        The generator is numpy's PCG64 (``np.random.default_rng``).
        """
        seed = test_seed(problem) if seed is None else seed
        rng = np.random.default_rng(seed)
        pts = interior_points(problem, size, rng, annuli if size % annuli == 0 else 1)
        return cls(pts, problem.exact(pts), seed)


def _predictions(predict, test: TestSet):
    return np.asarray(predict(test.points), dtype=float)


def rel_l2_error(predict, test: TestSet) -> float:
    denom = np.sqrt(np.sum(test.exact ** 2))
    if denom == 0:
        raise ContractViolation("exact solution vanishes on the test set")
    return float(np.sqrt(np.sum((_predictions(predict, test) - test.exact) ** 2)) / denom)


def max_modulus_error(predict, test: TestSet) -> float:
    denom = np.max(np.abs(test.exact))
    if denom == 0:
        raise ContractViolation("exact solution vanishes on the test set")
    return float(np.max(np.abs(_predictions(predict, test) - test.exact)) / denom)


def error_reduction(as_err: float, basic_err: float) -> float:
    """``1 - as_err / basic_err`` in percent."""
    if not basic_err > 0:
        raise ContractViolation("baseline error must be positive")
    return 100.0 * (1.0 - as_err / basic_err)


def plain_mc_estimate(w, p_density, points, volume: float) -> float:
    """``|Omega| / n * sum w(x_i) p(x_i)`` for ``x_i ~ p``."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        raise ContractViolation("no points")
    return float(volume * np.mean(np.asarray(w(points)) * np.asarray(p_density(points))))


def importance_estimate(w, p_density, q_density, points, volume: float) -> float:
    """``|Omega| / n * sum w(x_i) p(x_i) / q(x_i)`` for ``x_i ~ q``."""
    points = np.asarray(points, dtype=float)
    if points.shape[0] == 0:
        raise ContractViolation("no points")
    wp = np.asarray(w(points), dtype=float) * np.asarray(p_density(points), dtype=float)
    q = np.asarray(q_density(points), dtype=float)
    bad = (q == 0) & (wp != 0)
    if np.any(bad):
        raise ContractViolation("q vanishes where w*p does not (support violation)")
    ratio = np.divide(wp, q, out=np.zeros_like(wp), where=q != 0)
    return float(volume * np.mean(ratio))
