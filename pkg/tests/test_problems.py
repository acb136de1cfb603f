import numpy as np
import pytest

from activepde.exceptions import ConfigurationError, ContractViolation
from activepde.problems import (
    INITIAL,
    INITIAL_VELOCITY,
    LATERAL,
    PROBLEMS,
    Domain,
    get_problem,
    residual_abs,
)
from activepde.samplers import boundary_points, interior_points
from activepde.stencil import StencilConfig

H = 1e-4
CASES = [("elliptic", 3), ("elliptic", 5), ("parabolic", 2), ("parabolic", 5),
         ("hyperbolic", 3), ("hyperbolic", 5), ("poisson2d", 2)]


def zero(X):
    return np.zeros(X.shape[0])


def smooth_interior(problem, n, rng):
    """Interior points away from the sets where the exact solution loses smoothness.

    Bands: 2h around the Poisson kink, 3e-4 inside the unit sphere (the
    (1-r)^2.5 profile), and for the parabolic solution r < 0.05 (cone of
    exp(|x| c)) and 1 - t < 1e-2 (sqrt(1 - t)).
    """
    X = interior_points(problem, 4 * n, rng, 1)
    keep = np.ones(len(X), bool)
    if problem.name == "poisson2d":
        keep &= np.abs(X[:, 0] - 0.5) > 2 * H
    else:
        r = np.linalg.norm(X[:, :problem.spatial_dim], axis=1)
        keep &= r < 1 - 3e-4
        if problem.name == "parabolic":
            keep &= (r > 0.05) & (X[:, -1] < 1 - 1e-2)
        else:
            keep &= r > 2 * H
    return X[keep][:n]


# -- point values ------------------------------------------------------------


def test_elliptic_exact_values():
    p = get_problem("elliptic", 4)
    assert p.exact(np.zeros((1, 4)))[0] == pytest.approx(1.0, abs=1e-15)
    assert p.exact(np.eye(4)[:1])[0] == 0.0


def test_parabolic_exact_values():
    p = get_problem("parabolic", 3)
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.uniform(-0.5, 0.5, (5, 3)), np.ones(5)])
    assert np.allclose(p.exact(X), 1.0)
    X = np.column_stack([np.zeros((5, 3)), rng.random(5)])
    assert np.allclose(p.exact(X), 1.0)


def test_hyperbolic_exact_values():
    p = get_problem("hyperbolic", 2)
    assert p.exact(np.array([[0.3, 0.1, 0.0]]))[0] == 0.0
    assert p.exact(np.array([[0.6, 0.8, 0.7]]))[0] == pytest.approx(0.0, abs=1e-15)
    _, first, _ = p.exact_derivatives(np.array([[0.3, 0.1, 0.0]]))
    assert first[0, -1] == 0.0


def test_poisson_exact_values():
    p = get_problem("poisson2d")
    X = np.array([[0.0, 0.3], [0.5, 0.1], [0.2, 0.9]])
    assert np.allclose(p.exact(X), [0.0, 0.25, 0.04], rtol=0, atol=1e-15)


# -- annihilation ------------------------------------------------------------


@pytest.mark.parametrize("name, d", CASES)
def test_analytic_derivative_residual_vanishes(name, d):
    p = get_problem(name, d)
    X = interior_points(p, 1000, np.random.default_rng(1), 1)
    if name == "poisson2d":
        X = X[np.abs(X[:, 0] - 0.5) > 2 * H]
    assert np.max(np.abs(p.analytic_residual(X))) <= 1e-12


@pytest.mark.parametrize("name, d", CASES)
def test_stencil_residual_of_exact_solution(name, d):
    p = get_problem(name, d)
    X = smooth_interior(p, 1000, np.random.default_rng(2))
    assert len(X) == 1000
    assert np.max(residual_abs(p, p.exact, X, "interior")) <= 1e-3


@pytest.mark.parametrize("name, d", CASES)
def test_boundary_residual_of_exact_solution(name, d):
    p = get_problem(name, d)
    X, kinds = boundary_points(p, 999, np.random.default_rng(3))
    assert np.max(residual_abs(p, p.exact, X, "boundary", kinds)) <= 1e-12


def test_hyperbolic_velocity_residual_is_exact_with_central_differences():
    # u(x, t) ~ t^2 near t = 0, so the central difference of u_t at t = 0 is 0 exactly
    p = get_problem("hyperbolic", 3)
    X = np.column_stack([interior_points(p, 50, np.random.default_rng(4))[:, :3], np.zeros(50)])
    kinds = np.full(50, INITIAL_VELOCITY)
    assert np.max(np.abs(p.boundary_residual(p.exact, X, kinds))) <= 1e-12


def test_elliptic_zero_network_residual_at_origin():
    p = get_problem("elliptic", 3)
    x0 = np.zeros((1, 3))
    assert residual_abs(p, zero, x0, "interior")[0] == pytest.approx(abs(p.forcing(x0)[0]), rel=1e-14)


def test_elliptic_forcing_at_origin_closed_form():
    # at r = 0: S' = 0 and S'' = -(5 pi / 4)^2, so f(0) = -d S''(0)
    d = 4
    p = get_problem("elliptic", d)
    assert p.forcing(np.zeros((1, d)))[0] == pytest.approx(d * 25 * np.pi ** 2 / 16, rel=1e-12)


@pytest.mark.parametrize("name, d", CASES)
def test_residual_abs_nonnegative(name, d):
    p = get_problem(name, d)
    X = interior_points(p, 200, np.random.default_rng(5))
    noisy = lambda P: p.exact(P) + 0.1 * np.sin(7 * P.sum(axis=1))
    assert np.all(residual_abs(p, noisy, X, "interior") >= 0)
    assert np.all(residual_abs(p, zero, X, "interior") >= 0)


def test_residual_abs_rejects_points_outside_region():
    p = get_problem("elliptic", 2)
    with pytest.raises(ContractViolation):
        residual_abs(p, zero, np.array([[0.9, 0.9]]), "interior")
    with pytest.raises(ContractViolation):
        residual_abs(p, zero, np.array([[0.1, 0.1]]), "boundary")
    with pytest.raises(ContractViolation):
        residual_abs(p, zero, np.array([[0.1, 0.1]]), "edge")


def test_forward_scheme_residual_dominated_by_first_difference_error():
    # u''(0) = -25 pi^2 / 16 along a radius, so the forward-difference gradient is off by ~h |u''| / 2
    p = get_problem("elliptic", 5)
    X = smooth_interior(p, 300, np.random.default_rng(7))
    central = residual_abs(p, p.exact, X, "interior")
    forward = residual_abs(p, p.exact, X, "interior", cfg=StencilConfig(first="forward"))
    assert np.max(forward) > 10 * np.max(central)


# -- domains and splits ------------------------------------------------------


@pytest.mark.parametrize("name, d", CASES)
def test_membership_exclusive(name, d):
    p = get_problem(name, d)
    rng = np.random.default_rng(8)
    X = interior_points(p, 500, rng)
    assert np.all(p.domain.is_interior(X))
    assert np.all(p.domain.boundary_kind(X) == -1)
    B, kinds = boundary_points(p, 500, rng)
    assert not np.any(p.domain.is_interior(B))
    assert np.all(p.domain.boundary_kind(B) >= 0)


def test_cylinder_boundary_kinds():
    dom = Domain("cylinder", 2)
    X = np.array([[1.0, 0.0, 0.5], [0.1, 0.2, 0.0], [0.1, 0.2, 1.0], [1.0, 0.0, 0.0]])
    assert dom.boundary_kind(X).tolist() == [LATERAL, INITIAL, -1, LATERAL]


@pytest.mark.parametrize("d", [2, 5, 10])
def test_parabolic_split_matches_table_structure(d):
    p = get_problem("parabolic", d)
    split = p.boundary_split(12000 + 12000 // d)
    assert split[LATERAL] == 12000
    assert split[INITIAL] == 12000 // d


def test_hyperbolic_split_has_velocity_share():
    split = get_problem("hyperbolic", 4).boundary_split(15000)
    assert split == {LATERAL: 12000, INITIAL: 1500, INITIAL_VELOCITY: 1500}


def test_problem_registry():
    assert set(PROBLEMS) == {"elliptic", "parabolic", "hyperbolic", "poisson2d"}
    with pytest.raises(ConfigurationError):
        get_problem("wave", 2)
    with pytest.raises(ConfigurationError):
        get_problem("elliptic")
    with pytest.raises(ConfigurationError):
        get_problem("elliptic", 1)
    with pytest.raises(ConfigurationError):
        get_problem("poisson2d", 3)
