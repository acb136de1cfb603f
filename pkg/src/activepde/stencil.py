"""Finite-difference derivatives of a scalar function of several variables.

Two layers:

* ``partial_fd`` / ``gradient_fd`` / ``second_partial_fd`` / ``laplacian_fd`` take
  a function handle mapping an (n, D) batch to (n,) values and a base point
  (or batch of base points). All probe points for a call go through the
  function in a single batch.
* :class:`Stencil` builds the probe array for a batch of collocation points
  once, turns network values at the probes into derivatives, and maps
  derivative cotangents back onto the probes (used for exact gradients of the
  discretised loss).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ContractViolation

FIRST_SCHEMES = ("forward", "central")


@dataclass(frozen=True)
class StencilConfig:
    """Step size and first-derivative scheme.

    ``first`` only affects :class:`Stencil`; the function-handle helpers
    ``partial_fd`` and ``gradient_fd`` are always forward differences.
    Second derivatives are always central.
    """

    h: float = 1e-4
    first: str = "central"

    def __post_init__(self):
        if not self.h >= 1e-6:
            raise ContractViolation(f"stencil step must be >= 1e-6, got {self.h}")
        if self.first not in FIRST_SCHEMES:
            raise ContractViolation(f"unknown first-derivative scheme {self.first!r}")


DEFAULT = StencilConfig()


def _as_batch(a):
    a = np.asarray(a, dtype=np.float64)
    return (a[None, :], True) if a.ndim == 1 else (a, False)


def _eval(phi, points):
    n, k, dim = points.shape
    return np.asarray(phi(points.reshape(n * k, dim)), dtype=np.float64).reshape(n, k)


def _unbatch(values, single):
    return values[0] if single else values


def partial_fd(phi, a, i: int, cfg: StencilConfig = DEFAULT):
    """Forward difference ``(phi(a + h e_i) - phi(a)) / h``."""
    a, single = _as_batch(a)
    if not 0 <= i < a.shape[1]:
        raise ContractViolation(f"axis {i} out of range for dimension {a.shape[1]}")
    probes = np.stack([a, a.copy()], axis=1)
    probes[:, 1, i] += cfg.h
    v = _eval(phi, probes)
    return _unbatch((v[:, 1] - v[:, 0]) / cfg.h, single)


def central_partial_fd(phi, a, i: int, cfg: StencilConfig = DEFAULT):
    a, single = _as_batch(a)
    probes = np.stack([a, a], axis=1).copy()
    probes[:, 0, i] += cfg.h
    probes[:, 1, i] -= cfg.h
    v = _eval(phi, probes)
    return _unbatch((v[:, 0] - v[:, 1]) / (2.0 * cfg.h), single)


def gradient_fd(phi, a, cfg: StencilConfig = DEFAULT):
    """Vector of forward-difference partials; d+1 evaluations per base point."""
    a, single = _as_batch(a)
    n, dim = a.shape
    probes = np.repeat(a[:, None, :], dim + 1, axis=1)
    probes[:, 1:, :] += cfg.h * np.eye(dim)
    v = _eval(phi, probes)
    return _unbatch((v[:, 1:] - v[:, :1]) / cfg.h, single)


def second_partial_fd(phi, a, i: int, cfg: StencilConfig = DEFAULT):
    """Central second difference along axis ``i``."""
    a, single = _as_batch(a)
    if not 0 <= i < a.shape[1]:
        raise ContractViolation(f"axis {i} out of range for dimension {a.shape[1]}")
    probes = np.stack([a, a, a], axis=1).copy()
    probes[:, 1, i] += cfg.h
    probes[:, 2, i] -= cfg.h
    v = _eval(phi, probes)
    return _unbatch((v[:, 1] - 2.0 * v[:, 0] + v[:, 2]) / cfg.h ** 2, single)


def laplacian_fd(phi, a, cfg: StencilConfig = DEFAULT):
    """Sum of central second differences; 2d+1 evaluations per base point."""
    a, single = _as_batch(a)
    st = Stencil(a, cfg)
    _, _, second = st.derivatives(_eval(phi, st.probes))
    return _unbatch(second.sum(axis=1), single)


class Stencil:
    """Probe layout for a batch of collocation points.

    For each base point the probes are ordered
    ``[x, x + h e_a0, ..., x + h e_ak, x - h e_a0, ..., x - h e_ak]``
    where ``a0..ak`` are the requested axes (all axes by default).
    """

    def __init__(self, X, cfg: StencilConfig = DEFAULT, axes=None):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2:
            raise ContractViolation("Stencil expects a 2-D batch of points")
        self.cfg = cfg
        self.base = X
        n, dim = X.shape
        self.axes = tuple(range(dim)) if axes is None else tuple(axes)
        k = len(self.axes)
        self.width = 1 + 2 * k
        probes = np.repeat(X[:, None, :], self.width, axis=1)
        for j, ax in enumerate(self.axes):
            probes[:, 1 + j, ax] += cfg.h
            probes[:, 1 + k + j, ax] -= cfg.h
        self.probes = probes

    @property
    def flat_probes(self):
        return self.probes.reshape(-1, self.base.shape[1])

    def derivatives(self, V):
        """Return ``(value, first, second)`` from probe values ``V`` of shape (n, width).

        ``first`` and ``second`` have one column per stencil axis.
        """
        V = np.asarray(V, dtype=np.float64).reshape(self.base.shape[0], self.width)
        k, h = len(self.axes), self.cfg.h
        v0 = V[:, 0]
        plus, minus = V[:, 1:1 + k], V[:, 1 + k:]
        if self.cfg.first == "central":
            first = (plus - minus) / (2.0 * h)
        else:
            first = (plus - v0[:, None]) / h
        second = (plus - 2.0 * v0[:, None] + minus) / h ** 2
        return v0, first, second

    def pullback(self, d_value=None, d_first=None, d_second=None):
        """Map cotangents on ``(value, first, second)`` to cotangents on the probes.

        This is the transpose of :meth:`derivatives`, which is linear in ``V``.
        """
        n, k, h = self.base.shape[0], len(self.axes), self.cfg.h
        out = np.zeros((n, self.width))
        if d_value is not None:
            out[:, 0] += d_value
        if d_first is not None and k:
            if self.cfg.first == "central":
                out[:, 1:1 + k] += d_first / (2.0 * h)
                out[:, 1 + k:] -= d_first / (2.0 * h)
            else:
                out[:, 1:1 + k] += d_first / h
                out[:, 0] -= d_first.sum(axis=1) / h
        if d_second is not None and k:
            out[:, 1:1 + k] += d_second / h ** 2
            out[:, 1 + k:] += d_second / h ** 2
            out[:, 0] -= 2.0 * d_second.sum(axis=1) / h ** 2
        return out
