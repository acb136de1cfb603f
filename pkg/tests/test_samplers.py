import numpy as np
import pytest

from activepde.exceptions import ConfigurationError, ContractViolation, DegenerateDensityError
from activepde.problems import INITIAL, INITIAL_VELOCITY, LATERAL, get_problem
from activepde.samplers import (
    ResidualDensity,
    boundary_points,
    interior_points,
    mh_chain_indices,
    mh_sample,
    mh_sample_vectorized,
    rar_indices,
    rar_sample,
    sample_boundary,
    sample_uniform_annular,
    self_normalized_indices,
    self_normalized_sample,
    uniform_sphere,
)


def unit_interval(k, rng):
    return rng.random((k, 1))


def tv_from_density(samples, cdf, bins=20):
    """Total-variation distance between a histogram on (0, 1) and a known CDF."""
    edges = np.linspace(0, 1, bins + 1)
    counts, _ = np.histogram(samples, bins=edges)
    return 0.5 * np.sum(np.abs(counts / counts.sum() - np.diff(cdf(edges))))


def tv_between(a, b, bins=20):
    edges = np.linspace(0, 1, bins + 1)
    ha, _ = np.histogram(a, bins=edges)
    hb, _ = np.histogram(b, bins=edges)
    return 0.5 * np.sum(np.abs(ha / ha.sum() - hb / hb.sum()))


square_density = ResidualDensity(lambda X: X[:, 0] ** 2)


# -- baselines ---------------------------------------------------------------


def test_annular_points_inside_ball_with_equal_shell_counts():
    batch = sample_uniform_annular(1000, 10, 3, np.random.default_rng(0))
    r = np.linalg.norm(batch.points, axis=1)
    assert len(batch) == 1000 and np.all(r < 1)
    shells = np.floor(r * 10).astype(int)
    assert np.array_equal(np.bincount(shells, minlength=10), np.full(10, 100))


@pytest.mark.parametrize("d", [2, 5])
def test_single_annulus_is_ball_uniform(d):
    pts = sample_uniform_annular(100000, 1, d, np.random.default_rng(1)).points
    assert np.mean(np.linalg.norm(pts, axis=1) ** d) == pytest.approx(0.5, abs=0.01)


def test_annuli_must_divide_count():
    with pytest.raises(ConfigurationError):
        sample_uniform_annular(1001, 10, 2, np.random.default_rng(0))


def test_sphere_points_on_sphere_and_centered():
    pts = uniform_sphere(100000, 4, np.random.default_rng(2))
    assert np.max(np.abs(np.linalg.norm(pts, axis=1) - 1)) < 1e-12
    assert np.all(np.abs(pts.mean(axis=0)) < 0.02)


@pytest.mark.parametrize("d", [2, 4, 5])
def test_parabolic_boundary_split(d):
    p = get_problem("parabolic", d)
    n = 12000 + 12000 // d
    batch = sample_boundary(n, p, np.random.default_rng(3), annuli=10)
    assert np.sum(batch.kinds == LATERAL) == 12000
    assert np.sum(batch.kinds == INITIAL) == 12000 // d
    lateral = batch.points[batch.kinds == LATERAL]
    assert np.max(np.abs(np.linalg.norm(lateral[:, :d], axis=1) - 1)) < 1e-12
    assert np.all(batch.points[batch.kinds == INITIAL][:, -1] == 0)


@pytest.mark.parametrize("name, d", [("elliptic", 3), ("parabolic", 2), ("hyperbolic", 3), ("poisson2d", 2)])
def test_region_closure(name, d):
    p = get_problem(name, d)
    rng = np.random.default_rng(4)
    assert np.all(p.domain.is_interior(interior_points(p, 500, rng, 10)))
    B, kinds = boundary_points(p, 503, rng, 10)
    assert len(B) == 503
    # velocity constraints sit on the t = 0 face, so geometry reports them as initial
    geometric = np.where(kinds == INITIAL_VELOCITY, INITIAL, kinds)
    assert np.array_equal(p.domain.boundary_kind(B), geometric)


def test_boundary_needs_points():
    with pytest.raises(ContractViolation):
        boundary_points(get_problem("elliptic", 2), 0, np.random.default_rng(0))


# -- densities ---------------------------------------------------------------


def test_density_p_zero_is_constant():
    dens = ResidualDensity(lambda X: X[:, 0], p=0)
    assert np.array_equal(dens(np.random.default_rng(0).random((5, 1))), np.ones(5))


def test_density_rejects_negative_exponent_and_non_finite_values():
    with pytest.raises(ContractViolation):
        ResidualDensity(lambda X: X[:, 0], p=-1)
    with pytest.raises(ContractViolation):
        ResidualDensity(lambda X: np.full(X.shape[0], np.inf))(np.zeros((1, 1)))


# -- Metropolis-Hastings -----------------------------------------------------


def test_mh_p_zero_returns_last_proposals():
    rng = np.random.default_rng(5)
    flat = ResidualDensity(lambda X: X[:, 0], p=0)
    out = mh_sample_vectorized(flat, 50, 10, unit_interval, rng)
    expected = np.random.default_rng(5).random((60, 1))[-50:]
    assert np.array_equal(out.points, expected)


def test_mh_target_x_squared():
    out = mh_sample_vectorized(square_density, 100000, 1000, unit_interval, np.random.default_rng(6))
    assert tv_from_density(out.points[:, 0], lambda x: x ** 3) < 0.05


def test_sequential_and_vectorized_mh_agree():
    # same generator state; the sequential chain draws a candidate then a uniform per step
    def proposal(k, rng):
        return rng.random((k, 1))

    seq = mh_sample(square_density, 300, 20, proposal, np.random.default_rng(7))
    # replay the sequential stream as pre-generated arrays
    rng = np.random.default_rng(7)
    X, U = np.empty((320, 1)), np.empty(320)
    for j in range(320):
        X[j] = rng.random((1, 1))[0]
        U[j] = rng.random()
    idx = mh_chain_indices(square_density(X), U, 300)
    assert np.array_equal(seq.points, X[idx])


def test_mh_vectorized_deterministic():
    a = mh_sample_vectorized(square_density, 200, 5, unit_interval, np.random.default_rng(8))
    b = mh_sample_vectorized(square_density, 200, 5, unit_interval, np.random.default_rng(8))
    assert np.array_equal(a.points, b.points)


def test_mh_monotone_density_never_rejects_uphill():
    values = np.random.default_rng(9).random(1000)
    idx = mh_chain_indices(values, np.random.default_rng(10).random(1000), 1000)
    for i in range(1, 1000):
        if values[i] >= values[idx[i - 1]]:
            assert idx[i] == i


def test_mh_zero_density_state_always_moves():
    values = np.array([0.0, 1e-300, 0.5])
    idx = mh_chain_indices(values, np.array([0.0, 1.0, 1.0]), 3)
    assert idx.tolist() == [0, 1, 2]


def test_mh_all_zero_density_is_degenerate():
    zero = ResidualDensity(lambda X: 0 * X[:, 0])
    with pytest.raises(DegenerateDensityError):
        mh_sample_vectorized(zero, 10, 0, unit_interval, np.random.default_rng(0))
    with pytest.raises(DegenerateDensityError):
        mh_sample(zero, 10, 0, unit_interval, np.random.default_rng(0))


def test_mh_kernel_on_five_states():
    # independence chain with uniform proposals over 5 states:
    # P(i -> j) = (1/5) min(1, w_j / w_i) for j != i
    w = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
    rng = np.random.default_rng(11)
    steps = 1_000_000
    states = rng.integers(0, 5, steps)
    idx = mh_chain_indices(w[states], rng.random(steps), steps)
    chain = states[idx]
    counts = np.zeros((5, 5))
    np.add.at(counts, (chain[:-1], chain[1:]), 1)
    rows = counts.sum(axis=1, keepdims=True)
    kernel = np.minimum(1.0, w[None, :] / w[:, None]) / 5
    np.fill_diagonal(kernel, 0)
    np.fill_diagonal(kernel, 1 - kernel.sum(axis=1))
    sigma = np.sqrt(kernel * (1 - kernel) / rows)
    assert np.all(np.abs(counts / rows - kernel) <= 3 * sigma + 1e-12)
    # stationary law is w / sum(w)
    assert np.allclose(np.bincount(chain, minlength=5) / steps, w / w.sum(), atol=3e-3)


# -- self-normalized resampling ---------------------------------------------


def test_self_normalized_two_weights():
    rng = np.random.default_rng(12)
    n = 1_000_000
    idx = self_normalized_indices(np.array([1.0, 3.0]), n, rng)
    freq = np.mean(idx == 0)
    assert abs(freq - 0.25) <= 3 * np.sqrt(0.25 * 0.75 / n)


def test_self_normalized_p_zero_is_uniform_over_pool():
    flat = ResidualDensity(lambda X: X[:, 0], p=0)
    pool = np.random.default_rng(13).random((8, 1))
    idx = self_normalized_indices(flat(pool), 80000, np.random.default_rng(13))
    assert np.all(np.abs(np.bincount(idx, minlength=8) / 80000 - 1 / 8) < 0.01)


def test_self_normalized_subset_law():
    # P(x < 1/2) under weights f(x) = x on a uniform pool tends to 1/4
    rng = np.random.default_rng(14)
    linear = ResidualDensity(lambda X: X[:, 0])
    out = self_normalized_sample(linear, 200000, rng, unit_interval, pool_size=200000)
    assert np.mean(out.points[:, 0] < 0.5) == pytest.approx(0.25, abs=0.01)


def test_self_normalized_all_zero_weights_warns(caplog):
    idx = self_normalized_indices(np.zeros(6), 4, np.random.default_rng(0))
    assert idx.tolist() == [0, 1, 2, 3]
    assert "zero" in caplog.text


def test_self_normalized_p_monotonicity():
    w = np.array([3.0, 2.0, 1.0])
    ratios = []
    for p in (0.5, 1.0, 2.0):
        prob = w ** p / np.sum(w ** p)
        assert prob[0] > prob[1] > prob[2]
        ratios.append(prob[0] / prob[1])
    assert ratios[0] < ratios[1] < ratios[2]
    freq = np.bincount(self_normalized_indices(w ** 2, 300000, np.random.default_rng(15)), minlength=3)
    assert freq[0] > freq[1] > freq[2]


def test_self_normalized_pool_smaller_than_n_rejected():
    with pytest.raises(ContractViolation):
        self_normalized_sample(square_density, 10, np.random.default_rng(0), unit_interval, pool_size=5)


def test_mh_and_self_normalized_histograms_agree():
    mh = mh_sample_vectorized(square_density, 100000, 1000, unit_interval, np.random.default_rng(16))
    sn = self_normalized_sample(square_density, 100000, np.random.default_rng(17), unit_interval,
                                pool_size=100000)
    assert tv_between(mh.points[:, 0], sn.points[:, 0]) < 0.08


# -- RAR ---------------------------------------------------------------------


def test_rar_default_length_and_duplicates():
    out = rar_sample(square_density, np.random.default_rng(18), unit_interval)
    assert len(out) == 12000
    base, extra = out.points[:10000], out.points[10000:]
    assert set(extra[:, 0]) <= set(base[:, 0])
    assert extra[:, 0].min() >= np.sort(base[:, 0])[-2000]


def test_rar_ties_use_index_order():
    idx = rar_indices(np.ones(10), 3)
    assert idx.tolist() == list(range(10)) + [0, 1, 2]


def test_rar_top_k_larger_than_pool():
    with pytest.raises(ContractViolation):
        rar_indices(np.ones(3), 4)


def test_samplers_deterministic_under_seed():
    p = get_problem("elliptic", 3)
    a = interior_points(p, 100, np.random.default_rng(19), 10)
    b = interior_points(p, 100, np.random.default_rng(19), 10)
    assert np.array_equal(a, b)
    sa = self_normalized_sample(square_density, 50, np.random.default_rng(20), unit_interval)
    sb = self_normalized_sample(square_density, 50, np.random.default_rng(20), unit_interval)
    assert np.array_equal(sa.points, sb.points)
