"""Benchmark PDEs: operators, forcing terms, exact solutions and domains.

Every problem evaluates its interior operator from finite-difference
derivatives (:class:`~activepde.stencil.Stencil`) so the same code path serves
residual evaluation for samplers, loss assembly and exact-solution checks.
Forcing terms are written in closed form from the radial (or 1-D) profile of
the exact solution; :meth:`PdeProblem.exact_derivatives` gives the Cartesian
derivatives of the exact solution independently so the two can be
cross-checked.

Boundary points carry an integer kind: ``LATERAL`` (Dirichlet data on the
spatial boundary), ``INITIAL`` (value at t = 0) and ``INITIAL_VELOCITY``
(time derivative at t = 0, hyperbolic problem only).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError, ContractViolation
from .stencil import DEFAULT, Stencil, StencilConfig

LATERAL, INITIAL, INITIAL_VELOCITY = 0, 1, 2

R_MIN = 1e-10  # clamp for 1/|x| factors
R_SERIES = 1e-6  # below this radius use limits of u'/r and x/r
_MEMBERSHIP_TOL = 1e-9


@dataclass(frozen=True)
class Domain:
    """``ball`` (|x| < 1), ``cylinder`` (ball x (0, 1)) or ``square`` ((0, 1)^2)."""

    kind: str
    spatial_dim: int

    @property
    def time_dependent(self) -> bool:
        return self.kind == "cylinder"

    @property
    def input_dim(self) -> int:
        return self.spatial_dim + (1 if self.time_dependent else 0)

    def is_interior(self, X):
        """Strictly inside, outside the boundary tolerance band."""
        X = np.atleast_2d(X)
        tol = _MEMBERSHIP_TOL
        if self.kind == "square":
            return np.all((X > tol) & (X < 1.0 - tol), axis=1)
        r = np.linalg.norm(X[:, :self.spatial_dim], axis=1)
        inside = r < 1.0 - tol
        if self.time_dependent:
            t = X[:, -1]
            inside &= (t > tol) & (t < 1.0 - tol)
        return inside

    def boundary_kind(self, X):
        """Kind of each boundary point, or -1 where the point is not on the boundary."""
        X = np.atleast_2d(X)
        kinds = np.full(X.shape[0], -1)
        tol = _MEMBERSHIP_TOL
        if self.kind == "square":
            inside = np.all((X >= -tol) & (X <= 1.0 + tol), axis=1)
            edge = np.any((np.abs(X) <= tol) | (np.abs(X - 1.0) <= tol), axis=1)
            kinds[inside & edge] = LATERAL
            return kinds
        r = np.linalg.norm(X[:, :self.spatial_dim], axis=1)
        if not self.time_dependent:
            kinds[np.abs(r - 1.0) <= tol] = LATERAL
            return kinds
        t = X[:, -1]
        in_time = (t >= -tol) & (t <= 1.0 + tol)
        kinds[(np.abs(t) <= tol) & (r < 1.0 + tol)] = INITIAL
        kinds[(np.abs(r - 1.0) <= tol) & in_time] = LATERAL
        return kinds


def _radius(X, d):
    return np.linalg.norm(X[:, :d], axis=1)


def _sine_profile(r):
    """S(r) = sin(pi/2 (1-r)^2.5) and its radial derivatives.

    Returns ``S, S', S'', S'/r``. The profile is extended by zero for r > 1,
    which keeps it C^2 across the sphere. ``S'/r`` uses its r -> 0 limit
    ``S''(0)`` below ``R_SERIES``.
    """
    s = np.maximum(1.0 - r, 0.0)
    A = 0.5 * np.pi * s ** 2.5
    cosA, sinA = np.cos(A), np.sin(A)
    S = np.sin(A)
    dS = -1.25 * np.pi * s ** 1.5 * cosA
    d2S = 1.875 * np.pi * s ** 0.5 * cosA - (25.0 * np.pi ** 2 / 16.0) * s ** 3 * sinA
    small = r < R_SERIES
    dS_over_r = np.where(small, d2S, dS / np.maximum(r, R_MIN))
    return S, dS, d2S, dS_over_r


def _radial_cartesian(X, d, dS, d2S, dS_over_r):
    """Cartesian first and pure second derivatives of a radial function."""
    x = X[:, :d]
    r = _radius(X, d)
    small = (r < R_SERIES)[:, None]
    rr = np.maximum(r, R_MIN)[:, None]
    unit = x / rr
    grad = np.where(small, d2S[:, None] * x, dS[:, None] * unit)
    second = np.where(
        small,
        d2S[:, None],
        d2S[:, None] * unit ** 2 + dS_over_r[:, None] * (1.0 - unit ** 2),
    )
    return grad, second


class PdeProblem:
    """Base class; subclasses fill in the operator, forcing and exact solution."""

    name = "base"

    def __init__(self, domain: Domain):
        self.domain = domain

    @property
    def spatial_dim(self) -> int:
        return self.domain.spatial_dim

    @property
    def input_dim(self) -> int:
        return self.domain.input_dim

    @property
    def time_dependent(self) -> bool:
        return self.domain.time_dependent

    # -- to be provided by subclasses ------------------------------------- #
    def exact(self, X):
        raise NotImplementedError

    def forcing(self, X):
        raise NotImplementedError

    def exact_derivatives(self, X):
        """Analytic ``(u, first, second)`` along every input axis."""
        raise NotImplementedError

    def operator(self, X, value, first, second):
        """Interior operator from derivatives along every input axis.

        Returns ``(D phi, dD/dvalue, dD/dfirst, dD/dsecond)``; a ``None``
        partial means the operator does not depend on that quantity.
        """
        raise NotImplementedError

    def boundary_data(self, X, kinds):
        raise NotImplementedError

    # -- shared machinery --------------------------------------------------- #
    @property
    def boundary_axes(self):
        """Stencil axes needed on the boundary (time for velocity constraints)."""
        return ()

    def boundary_split(self, n: int):
        """Counts per boundary kind for a batch of ``n`` boundary points."""
        return {LATERAL: n}

    def interior_stencil(self, X, cfg: StencilConfig = DEFAULT) -> Stencil:
        return Stencil(X, cfg)

    def boundary_stencil(self, X, cfg: StencilConfig = DEFAULT) -> Stencil:
        return Stencil(X, cfg, axes=self.boundary_axes)

    def interior_terms(self, stencil: Stencil, V):
        """Residual ``D phi - f`` and its Jacobian w.r.t. the probe values ``V``."""
        value, first, second = stencil.derivatives(V)
        Dphi, dv, df, ds = self.operator(stencil.base, value, first, second)
        r = Dphi - self.forcing(stencil.base)
        return r, stencil.pullback(dv, df, ds)

    def boundary_terms(self, stencil: Stencil, V, kinds):
        """Residual ``B phi - g`` and its Jacobian w.r.t. the probe values."""
        value, first, _ = stencil.derivatives(V)
        kinds = np.asarray(kinds)
        velocity = kinds == INITIAL_VELOCITY
        Bphi = value.copy()
        d_value = (~velocity).astype(float)
        d_first = None
        if len(stencil.axes):
            Bphi[velocity] = first[velocity, 0]
            d_first = np.zeros_like(first)
            d_first[velocity, 0] = 1.0
        elif velocity.any():
            raise ContractViolation("velocity constraints need a time stencil")
        r = Bphi - self.boundary_data(stencil.base, kinds)
        return r, stencil.pullback(d_value, d_first, None)

    def interior_residual(self, predict, X, cfg: StencilConfig = DEFAULT):
        """Signed residual ``D phi - f`` of any batch predictor at interior points."""
        st = self.interior_stencil(X, cfg)
        V = np.asarray(predict(st.flat_probes), dtype=float)
        return self.interior_terms(st, V)[0]

    def boundary_residual(self, predict, X, kinds=None, cfg: StencilConfig = DEFAULT):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if kinds is None:
            kinds = self.domain.boundary_kind(X)
        st = self.boundary_stencil(X, cfg)
        V = np.asarray(predict(st.flat_probes), dtype=float)
        return self.boundary_terms(st, V, kinds)[0]

    def analytic_residual(self, X):
        """Operator applied to the analytic derivatives of ``u``, minus ``f``."""
        u, first, second = self.exact_derivatives(X)
        return self.operator(X, u, first, second)[0] - self.forcing(X)

    def __repr__(self):
        return f"{type(self).__name__}(d={self.spatial_dim})"


def residual_abs(problem: PdeProblem, predict, X, location: str, kinds=None,
                 cfg: StencilConfig = DEFAULT):
    """Absolute residual ``|D phi - f|`` (interior) or ``|B phi - g|`` (boundary).

    ``predict`` is anything mapping an (n, D) batch to (n,) values: a
    :class:`~activepde.network.SolutionNetwork` or e.g. ``problem.exact``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if location == "interior":
        if not np.all(problem.domain.is_interior(X)):
            raise ContractViolation("interior residual requested outside the domain")
        return np.abs(problem.interior_residual(predict, X, cfg))
    if location == "boundary":
        found = problem.domain.boundary_kind(X)
        if np.any(found < 0):
            raise ContractViolation("boundary residual requested off the boundary")
        return np.abs(problem.boundary_residual(predict, X, kinds, cfg))
    raise ContractViolation(f"unknown location {location!r}")


# --------------------------------------------------------------------------- #


class EllipticProblem(PdeProblem):
    """``-div((1 + |x|^2/2) grad u) + |grad u|^2 = f`` in the unit ball, u = 0 on the sphere.

    Exact solution ``u = sin(pi/2 (1 - |x|)^2.5)``.
    """

    name = "elliptic"

    def __init__(self, d: int):
        if d < 2:
            raise ConfigurationError("elliptic problem needs d >= 2")
        super().__init__(Domain("ball", d))

    def exact(self, X):
        X = np.atleast_2d(X)
        return _sine_profile(_radius(X, self.spatial_dim))[0]

    def forcing(self, X):
        X = np.atleast_2d(X)
        d = self.spatial_dim
        r = _radius(X, d)
        _, dS, d2S, dS_r = _sine_profile(r)
        lap = d2S + (d - 1) * dS_r
        return -((1.0 + 0.5 * r ** 2) * lap + r * dS) + dS ** 2

    def exact_derivatives(self, X):
        X = np.atleast_2d(X)
        d = self.spatial_dim
        S, dS, d2S, dS_r = _sine_profile(_radius(X, d))
        grad, second = _radial_cartesian(X, d, dS, d2S, dS_r)
        return S, grad, second

    def operator(self, X, value, first, second):
        x = X[:, :self.spatial_dim]
        coef = 1.0 + 0.5 * np.sum(x ** 2, axis=1)
        grad = first[:, :self.spatial_dim]
        lap = second[:, :self.spatial_dim].sum(axis=1)
        Dphi = -(coef * lap + np.sum(x * grad, axis=1)) + np.sum(grad ** 2, axis=1)
        d_first = 2.0 * grad - x
        d_second = np.repeat(-coef[:, None], self.spatial_dim, axis=1)
        return Dphi, None, d_first, d_second

    def boundary_data(self, X, kinds):
        return np.zeros(np.atleast_2d(X).shape[0])


class ParabolicProblem(PdeProblem):
    """``u_t - div_x((1 + |x|/2) grad_x u) = f`` on ball x (0, 1).

    Exact solution ``u = exp(|x| sqrt(1 - t))``; Dirichlet data on the lateral
    boundary and initial data ``exp(|x|)``.
    """

    name = "parabolic"

    def __init__(self, d: int):
        if d < 2:
            raise ConfigurationError("parabolic problem needs d >= 2")
        super().__init__(Domain("cylinder", d))

    def _parts(self, X):
        X = np.atleast_2d(X)
        r = _radius(X, self.spatial_dim)
        c = np.sqrt(np.maximum(1.0 - X[:, -1], 0.0))
        return r, c, np.exp(r * c)

    def exact(self, X):
        return self._parts(X)[2]

    def forcing(self, X):
        d = self.spatial_dim
        r, c, u = self._parts(X)
        rr = np.maximum(r, R_MIN)
        with np.errstate(divide="ignore"):
            u_t = -r * u / (2.0 * c)
        lap = c ** 2 * u + (d - 1) * c * u / rr
        return u_t - (1.0 + 0.5 * r) * lap - 0.5 * c * u

    def exact_derivatives(self, X):
        X = np.atleast_2d(X)
        d = self.spatial_dim
        r, c, u = self._parts(X)
        rr = np.maximum(r, R_MIN)
        grad, second = _radial_cartesian(X, d, c * u, c ** 2 * u, c * u / rr)
        with np.errstate(divide="ignore"):
            u_t = -r * u / (2.0 * c)
            u_tt = u * (r ** 2 / (4.0 * c ** 2) - r / (4.0 * c ** 3))
        first = np.column_stack([grad, u_t])
        second = np.column_stack([second, u_tt])
        return u, first, second

    def operator(self, X, value, first, second):
        d = self.spatial_dim
        x = X[:, :d]
        r = np.linalg.norm(x, axis=1)
        coef = 1.0 + 0.5 * r
        half_unit = x / (2.0 * np.maximum(r, R_MIN))[:, None]
        grad = first[:, :d]
        Dphi = first[:, d] - coef * second[:, :d].sum(axis=1) - np.sum(half_unit * grad, axis=1)
        d_first = np.column_stack([-half_unit, np.ones(X.shape[0])])
        d_second = np.column_stack([np.repeat(-coef[:, None], d, axis=1), np.zeros(X.shape[0])])
        return Dphi, None, d_first, d_second

    def boundary_data(self, X, kinds):
        return self.exact(X)

    def boundary_split(self, n: int):
        lateral = int(round(n * self.spatial_dim / (self.spatial_dim + 1)))
        return {LATERAL: lateral, INITIAL: n - lateral}


class HyperbolicProblem(PdeProblem):
    """``u_tt - Laplace_x u = f`` on ball x (0, 1) with zero boundary/initial data.

    Exact solution ``u = (exp(t^2) - 1) sin(pi/2 (1 - |x|)^2.5)``.
    """

    name = "hyperbolic"

    def __init__(self, d: int):
        if d < 2:
            raise ConfigurationError("hyperbolic problem needs d >= 2")
        super().__init__(Domain("cylinder", d))

    @property
    def boundary_axes(self):
        return (self.spatial_dim,)

    def exact(self, X):
        X = np.atleast_2d(X)
        S = _sine_profile(_radius(X, self.spatial_dim))[0]
        return np.expm1(X[:, -1] ** 2) * S

    def forcing(self, X):
        X = np.atleast_2d(X)
        d = self.spatial_dim
        t = X[:, -1]
        S, dS, d2S, dS_r = _sine_profile(_radius(X, d))
        T = np.expm1(t ** 2)
        T_tt = (2.0 + 4.0 * t ** 2) * np.exp(t ** 2)
        return T_tt * S - T * (d2S + (d - 1) * dS_r)

    def exact_derivatives(self, X):
        X = np.atleast_2d(X)
        d = self.spatial_dim
        t = X[:, -1]
        S, dS, d2S, dS_r = _sine_profile(_radius(X, d))
        grad, second = _radial_cartesian(X, d, dS, d2S, dS_r)
        T = np.expm1(t ** 2)
        first = np.column_stack([T[:, None] * grad, 2.0 * t * np.exp(t ** 2) * S])
        second = np.column_stack([T[:, None] * second, (2.0 + 4.0 * t ** 2) * np.exp(t ** 2) * S])
        return T * S, first, second

    def operator(self, X, value, first, second):
        d = self.spatial_dim
        Dphi = second[:, d] - second[:, :d].sum(axis=1)
        d_second = np.ones((X.shape[0], d + 1))
        d_second[:, :d] = -1.0
        return Dphi, None, None, d_second

    def boundary_data(self, X, kinds):
        return np.zeros(np.atleast_2d(X).shape[0])

    def boundary_split(self, n: int):
        lateral = int(round(n * self.spatial_dim / (self.spatial_dim + 1)))
        rest = n - lateral
        return {LATERAL: lateral, INITIAL: rest - rest // 2, INITIAL_VELOCITY: rest // 2}


class Poisson2DProblem(PdeProblem):
    """``-Laplace u = f`` on the unit square with exact solution ``min(x^2, (1-x)^2)``.

    The solution has a kink along x = 1/2; away from it ``f = -2``. With the
    default ``kink_width=0`` the forcing is ``-2`` everywhere, so the kink's
    line source ``2 delta(x - 1/2)`` is missing and the PDE's solution is not
    ``u``. A positive ``kink_width`` adds the line source smoothed by a
    Gaussian of that standard deviation.
    """

    name = "poisson2d"

    def __init__(self, d: int = 2, kink_width: float = 0.0):
        if d != 2:
            raise ConfigurationError("poisson2d is two-dimensional")
        if kink_width < 0:
            raise ConfigurationError("kink_width must be non-negative")
        super().__init__(Domain("square", 2))
        self.kink_width = float(kink_width)

    def exact(self, X):
        x = np.atleast_2d(X)[:, 0]
        return np.minimum(x ** 2, (1.0 - x) ** 2)

    def forcing(self, X):
        X = np.atleast_2d(X)
        f = np.full(X.shape[0], -2.0)
        if self.kink_width:
            eps = self.kink_width
            f += 2.0 * np.exp(-0.5 * ((X[:, 0] - 0.5) / eps) ** 2) / (eps * np.sqrt(2.0 * np.pi))
        return f

    def exact_derivatives(self, X):
        X = np.atleast_2d(X)
        x = X[:, 0]
        left = x < 0.5
        u = self.exact(X)
        first = np.column_stack([np.where(left, 2.0 * x, -2.0 * (1.0 - x)), np.zeros_like(x)])
        second = np.column_stack([np.full_like(x, 2.0), np.zeros_like(x)])
        return u, first, second

    def operator(self, X, value, first, second):
        return -second.sum(axis=1), None, None, -np.ones_like(second)

    def boundary_data(self, X, kinds):
        return self.exact(X)


PROBLEMS = {
    "elliptic": EllipticProblem,
    "parabolic": ParabolicProblem,
    "hyperbolic": HyperbolicProblem,
    "poisson2d": Poisson2DProblem,
}


def elliptic_problem(d: int) -> EllipticProblem:
    return EllipticProblem(d)


def parabolic_problem(d: int) -> ParabolicProblem:
    return ParabolicProblem(d)


def hyperbolic_problem(d: int) -> HyperbolicProblem:
    return HyperbolicProblem(d)


def poisson2d_problem(kink_width: float = 0.0) -> Poisson2DProblem:
    return Poisson2DProblem(kink_width=kink_width)


def get_problem(name: str, dim: int | None = None, **options) -> PdeProblem:
    """Problem by name. ``options`` go to the constructor (``kink_width`` for poisson2d)."""
    try:
        cls = PROBLEMS[name]
    except KeyError:
        raise ConfigurationError(
            f"unknown problem {name!r}; choose from {', '.join(PROBLEMS)}"
        ) from None
    if cls is Poisson2DProblem:
        return cls(2 if dim is None else dim, **options)
    if dim is None:
        raise ConfigurationError(f"problem {name!r} needs a dimension")
    return cls(int(dim), **options)
