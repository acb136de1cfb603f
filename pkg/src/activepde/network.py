"""Dense ReLU^3 solution network with hand-written reverse mode and Adam.

Parameters live in one flat float64 vector; the per-layer weight matrices and
bias vectors are reshaped views into it.  Flat ordering is layer-major, weight
matrix (row-major) before bias::

    W0 (m x d), b0 (m), W1 (m x m), b1 (m), ..., W_L (1 x m), b_L (scalar)

The output layer is ``W_L @ (x_L + b_L)`` with the scalar ``b_L`` broadcast
over the last hidden layer, which is an affine map with effective bias
``b_L * sum(W_L)``.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .exceptions import ContractViolation, DivergenceError


def relu3(x):
    """``max(x**3, 0)`` elementwise."""
    a = np.maximum(x, 0.0)
    return a * a * a


def relu3_grad(x):
    a = np.maximum(x, 0.0)
    return 3.0 * a * a


def n_parameters(depth: int, width: int, input_dim: int) -> int:
    return width * input_dim + width + (depth - 1) * (width * width + width) + width + 1


class SolutionNetwork:
    """Fully connected network ``phi(x; theta)`` with ``depth`` hidden layers.

    Parameters
    ----------
    depth : int
        Number of hidden (activated) layers ``L``.
    width : int
        Neurons per hidden layer ``m``.
    input_dim : int
        Input dimension (spatial dimension, plus one for time-dependent PDEs).
    theta : ndarray, optional
        Flat parameter vector. Zeros when omitted; use :meth:`initialize` or
        :func:`init_network` for a random start.
    """

    def __init__(self, depth: int, width: int, input_dim: int, theta=None):
        if depth < 1 or width < 1 or input_dim < 1:
            raise ContractViolation("depth, width and input_dim must be positive")
        self.depth = int(depth)
        self.width = int(width)
        self.input_dim = int(input_dim)
        size = n_parameters(self.depth, self.width, self.input_dim)
        if theta is None:
            theta = np.zeros(size)
        theta = np.array(theta, dtype=np.float64)
        if theta.shape != (size,):
            raise ContractViolation(f"expected {size} parameters, got shape {theta.shape}")
        self.theta = theta
        self._bind_views()

    def _bind_views(self):
        self.weights = []
        self.biases = []
        offset = 0
        fan_in = self.input_dim
        for _ in range(self.depth):
            w = self.theta[offset:offset + self.width * fan_in].reshape(self.width, fan_in)
            offset += self.width * fan_in
            b = self.theta[offset:offset + self.width]
            offset += self.width
            self.weights.append(w)
            self.biases.append(b)
            fan_in = self.width
        self.weights.append(self.theta[offset:offset + self.width].reshape(1, self.width))
        offset += self.width
        self.biases.append(self.theta[offset:offset + 1])

    @property
    def n_params(self) -> int:
        return self.theta.size

    def set_params(self, theta):
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != self.theta.shape:
            raise ContractViolation("parameter vector has the wrong length")
        self.theta[:] = theta

    def copy(self) -> "SolutionNetwork":
        return SolutionNetwork(self.depth, self.width, self.input_dim, self.theta.copy())

    def initialize(self, rng) -> "SolutionNetwork":
        """Glorot-uniform weights, zero biases."""
        self.theta[:] = 0.0
        fan_in = self.input_dim
        for w in self.weights:
            fan_out = w.shape[0]
            limit = math.sqrt(6.0 / (fan_in + fan_out))
            w[...] = rng.uniform(-limit, limit, size=w.shape)
            fan_in = fan_out
        return self

    def _check_input(self, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.input_dim:
            raise ContractViolation(
                f"points must have {self.input_dim} coordinates, got shape {X.shape}"
            )
        return X

    def forward(self, X):
        """Evaluate the network on a batch ``X`` of shape (n, input_dim)."""
        a = self._check_input(X)
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = relu3(a @ w.T + b)
        return (a + self.biases[-1][0]) @ self.weights[-1][0]

    __call__ = forward

    def forward_cached(self, X):
        """Forward pass that also returns the activations needed by :meth:`backward`."""
        X = self._check_input(X)
        # keep max(z, 0) per layer: both the activation and its derivative follow from it
        pos, post = [], [X]
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(post[-1] @ w.T + b, 0.0)
            pos.append(a)
            post.append(a * a * a)
        out = (post[-1] + self.biases[-1][0]) @ self.weights[-1][0]
        return out, (pos, post)

    def backprop(self, X, cotangents):
        """Gradient of ``sum_i c_i * phi(x_i)`` with respect to the flat parameters."""
        return self.backward(self.forward_cached(X)[1], cotangents)

    def backward(self, cache, cotangents):
        pos, post = cache
        c = np.asarray(cotangents, dtype=np.float64).reshape(-1)
        if c.shape[0] != post[0].shape[0]:
            raise ContractViolation(
                f"{post[0].shape[0]} points but {c.shape[0]} cotangents"
            )
        grad = np.zeros_like(self.theta)
        gw, gb = _views_like(self, grad)
        w_out = self.weights[-1][0]
        gw[-1][0] = c @ (post[-1] + self.biases[-1][0])
        gb[-1][0] = c.sum() * w_out.sum()
        da = np.outer(c, w_out)
        for layer in range(self.depth - 1, -1, -1):
            dz = 3.0 * da * pos[layer] * pos[layer]
            gw[layer][...] = dz.T @ post[layer]
            gb[layer][...] = dz.sum(axis=0)
            if layer:
                da = dz @ self.weights[layer]
        return grad


def _views_like(net: SolutionNetwork, flat):
    shadow = SolutionNetwork.__new__(SolutionNetwork)
    shadow.depth, shadow.width, shadow.input_dim = net.depth, net.width, net.input_dim
    shadow.theta = flat
    shadow._bind_views()
    return shadow.weights, shadow.biases


def init_network(depth: int, width: int, input_dim: int, seed) -> SolutionNetwork:
    return SolutionNetwork(depth, width, input_dim).initialize(np.random.default_rng(seed))


# --------------------------------------------------------------------------- #
# Adam
# --------------------------------------------------------------------------- #


@dataclass
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def fresh(cls, size: int, **hyper) -> "AdamState":
        return cls(np.zeros(size), np.zeros(size), 0, **hyper)


def adam_step(state: AdamState, theta, g, lr: float):
    """One bias-corrected Adam update. Returns ``(new_theta, new_state)``.

    Inputs are not modified.
    """
    theta = np.asarray(theta, dtype=np.float64)
    g = np.asarray(g, dtype=np.float64)
    if g.shape != theta.shape or state.m.shape != theta.shape:
        raise ContractViolation("gradient, parameters and moments must share a shape")
    if not lr > 0:
        raise ContractViolation("learning rate must be positive")
    if not np.all(np.isfinite(g)):
        raise DivergenceError("non-finite gradient entries; step rejected")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * g
    v = state.beta2 * state.v + (1.0 - state.beta2) * g * g
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_theta = theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_theta, AdamState(m, v, t, state.beta1, state.beta2, state.eps)


# --------------------------------------------------------------------------- #
# learning-rate staircase
# --------------------------------------------------------------------------- #


def learning_rate(k: int, n: int) -> float:
    """Staircase schedule from 1e-3 down to 1e-6 over ``n`` epochs.

    Stair ``j`` (0..999) covers ``ceil(0.999 n j / 1000) <= k < ceil(0.999 n (j+1) / 1000)``
    with rate ``10**(-3 - 3j/1000)``; epochs from ``ceil(0.999 n)`` on use 1e-6.
    Boundaries are computed in integer arithmetic.
    """
    if n < 1 or not 0 <= k < n:
        raise ContractViolation(f"epoch index {k} outside [0, {n})")
    if k >= -(-999 * n // 1000):
        return 1e-6
    # ceil(c j) <= k  <=>  c j <= k  with c = 999 n / 1e6
    j = (k * 1_000_000) // (999 * n)
    return 10.0 ** (-3.0 - 3.0 * j / 1000.0)


@dataclass
class LrSchedule:
    epochs: int
    constant: float | None = None

    def __call__(self, k: int) -> float:
        if self.constant is not None:
            if not 0 <= k < self.epochs:
                raise ContractViolation(f"epoch index {k} outside [0, {self.epochs})")
            return self.constant
        return learning_rate(k, self.epochs)


# --------------------------------------------------------------------------- #
# checkpoints
# --------------------------------------------------------------------------- #

_MAGIC = b"APDN"
_VERSION = 1
# magic, endianness tag, version, 2 pad bytes, L, m, d, parameter count
_HEADER = struct.Struct("<4scBxxIIIQ")


def save_checkpoint(path, net: SolutionNetwork) -> None:
    header = _HEADER.pack(_MAGIC, b"L", _VERSION, net.depth, net.width, net.input_dim, net.n_params)
    with open(Path(path), "wb") as fh:
        fh.write(header)
        fh.write(net.theta.astype("<f8").tobytes())


def load_checkpoint(path) -> SolutionNetwork:
    raw = Path(path).read_bytes()
    if len(raw) < _HEADER.size:
        raise ContractViolation("checkpoint truncated")
    magic, endian, version, depth, width, dim, count = _HEADER.unpack_from(raw)
    if magic != _MAGIC or version != _VERSION:
        raise ContractViolation("not a solution-network checkpoint")
    if endian not in (b"L", b"B"):
        raise ContractViolation(f"unknown endianness tag {endian!r}")
    if count != n_parameters(depth, width, dim):
        raise ContractViolation("parameter count does not match architecture")
    dtype = "<f8" if endian == b"L" else ">f8"
    body = raw[_HEADER.size:]
    if len(body) != 8 * count:
        raise ContractViolation("checkpoint body has the wrong length")
    theta = np.frombuffer(body, dtype=dtype).astype(np.float64)
    return SolutionNetwork(depth, width, dim, theta)
