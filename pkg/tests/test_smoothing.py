import numpy as np
import pytest

from errors import ZeroRadius
from smoothing import (
    SphereSample,
    sample_ball_batch,
    sample_sphere,
    sample_sphere_batch,
    smoothed_gradient_mc,
    smoothed_value_mc,
    zo_estimate,
    zo_estimate_batch,
)


def squared_norm(points):
    return np.sum(np.asarray(points) ** 2, axis=-1)


def test_sphere_draws_have_radius_eta(rng):
    for n in (1, 2, 7):
        sample = sample_sphere(n, 0.3, rng)
        assert np.linalg.norm(sample.v) == pytest.approx(0.3, abs=1e-12)
        assert np.linalg.norm(sample.direction) == pytest.approx(1.0, abs=1e-12)
    V = sample_sphere_batch(4, 0.1, 1000, rng)
    assert np.allclose(np.linalg.norm(V, axis=1), 0.1, atol=1e-12)


def test_one_dimensional_sphere_is_two_points(rng):
    V = sample_sphere_batch(1, 0.5, 10000, rng)[:, 0]
    assert set(np.round(V, 12)) == {0.5, -0.5}
    assert abs(np.mean(V > 0) - 0.5) <= 3 * 0.5 / np.sqrt(10000)


def test_sphere_moments(rng):
    N = 100_000
    V = sample_sphere_batch(3, 1.0, N, rng)
    assert np.all(np.abs(V.mean(axis=0)) <= 4 / np.sqrt(N))
    assert np.allclose(V.T @ V / N, np.eye(3) / 3, atol=0.01)


def test_ball_draws_fill_the_ball(rng):
    N = 20000
    U = sample_ball_batch(3, 2.0, N, rng)
    radii = np.linalg.norm(U, axis=1)
    assert radii.max() <= 2.0 + 1e-12
    inner_fraction = np.mean(radii <= 1.0)
    assert abs(inner_fraction - 0.125) <= 4 * np.sqrt(0.125 * 0.875 / N)


def test_linear_function_estimate():
    c = np.array([3.0, 5.0])
    x = np.array([0.2, -1.0])
    v = SphereSample(v=np.array([1.0, 0.0]), eta=1.0)
    estimate = zo_estimate(c @ x, c @ (x + v.v), v, 2)
    assert estimate.difference == pytest.approx(3.0)
    assert estimate.g == pytest.approx([6.0, 0.0])
    assert estimate.exact


def test_constant_function_gives_zero(rng):
    for _ in range(10):
        estimate = zo_estimate(4.2, 4.2, sample_sphere(3, 0.1, rng), 3)
        assert np.array_equal(estimate.g, np.zeros(3))


def test_zero_radius_is_rejected():
    with pytest.raises(ZeroRadius):
        zo_estimate(0.0, 1.0, SphereSample(v=np.zeros(2), eta=0.0), 2)
    with pytest.raises(ZeroRadius):
        zo_estimate_batch(np.zeros(2), np.ones(2), np.ones((2, 2)), 0.0)


def test_batch_estimate_matches_single_estimates(rng):
    V = sample_sphere_batch(3, 0.2, 5, rng)
    base, shifted = rng.normal(size=5), rng.normal(size=5)
    G = zo_estimate_batch(base, shifted, V, 0.2)
    for row, v, h0, h1 in zip(G, V, base, shifted):
        assert row == pytest.approx(zo_estimate(h0, h1, SphereSample(v=v, eta=0.2), 3).g, abs=1e-12)


def test_estimator_is_unbiased_for_the_squared_norm(rng):
    N = 100_000
    for x in rng.normal(size=(20, 5)):
        mean, se = smoothed_gradient_mc(squared_norm, x, 0.1, N, rng, batched=True)
        assert np.all(np.abs(mean - 2 * x) <= 4 * se)


def test_lipschitz_function_estimates_are_bounded(rng):
    n, eta = 5, 0.1
    for x in rng.normal(size=(200, n)):
        V = sample_sphere_batch(n, eta, 50, rng)
        G = zo_estimate_batch(np.full(50, np.linalg.norm(x)), np.linalg.norm(x + V, axis=1), V, eta)
        assert np.all(np.linalg.norm(G, axis=1) <= n * 1.0 + 1e-12)


@pytest.mark.parametrize("eps", [1e-2, 1e-4])
def test_inexact_lower_solutions_shift_the_estimate_boundedly(quadratic, rng, eps):
    n, p, eta = quadratic.n, quadratic.p, 0.1
    bound = 4 * quadratic.L0_tilde ** 2 * n ** 2 * eps / eta ** 2
    xi = quadratic.noise_xi.draw(rng)
    violations = 0
    for _ in range(10_000):
        x = rng.normal(size=n)
        v = sample_sphere(n, eta, rng)
        z1, z2 = quadratic.lower_solution(x), quadratic.lower_solution(x + v.v)
        dz1, dz2 = sample_ball_batch(p, np.sqrt(eps), 2, rng)
        exact = zo_estimate(quadratic.objective(0, x, z1, xi), quadratic.objective(0, x + v.v, z2, xi), v, n)
        inexact = zo_estimate(quadratic.objective(0, x, z1 + dz1, xi),
                              quadratic.objective(0, x + v.v, z2 + dz2, xi), v, n, exact=False)
        gap = np.sum((inexact.g - exact.g) ** 2)
        violations += gap > bound * (1 + 1e-9)
    assert violations == 0


def test_smoothed_value_of_linear_function(rng):
    c = np.array([1.0, -2.0, 0.5])
    x = np.array([0.3, 0.1, -0.4])
    estimate, se = smoothed_value_mc(lambda points: points @ c, x, 0.5, 20000, rng, batched=True)
    assert abs(estimate - c @ x) <= 4 * se


def test_smoothed_value_of_squared_norm(rng):
    n, eta = 4, 0.7
    x = rng.normal(size=n)
    estimate, se = smoothed_value_mc(squared_norm, x, eta, 50000, rng, batched=True)
    assert abs(estimate - (x @ x + eta ** 2 * n / (n + 2))) <= 4 * se


def test_tiny_radius_recovers_the_function(rng):
    x = np.array([1.0, 2.0])
    estimate, _ = smoothed_value_mc(lambda point: float(np.sum(np.cos(point))), x, 1e-8, 100, rng)
    assert estimate == pytest.approx(np.sum(np.cos(x)), rel=1e-6)


def test_smoothed_gradient_of_linear_function(rng):
    c = np.array([2.0, -1.0, 0.0, 3.0])
    mean, se = smoothed_gradient_mc(lambda points: points @ c, np.zeros(4), 0.2, 50000, rng, batched=True)
    assert np.all(np.abs(mean - c) <= 4 * se)


def test_gradient_agrees_with_finite_differences_of_the_value():
    def h(points):
        points = np.asarray(points)
        return np.sum(np.cos(points), axis=-1) + 0.5 * np.sum(points ** 2, axis=-1)

    x, eta, N, step = np.array([0.4, -0.8, 1.1]), 0.5, 20000, 1e-4
    gradient, gradient_se = smoothed_gradient_mc(h, x, eta, N, np.random.default_rng(1), batched=True)
    for j, e in enumerate(np.eye(3)):
        # identical seeds give common ball draws at x + step e and x - step e
        upper, _ = smoothed_value_mc(h, x + step * e, eta, N, np.random.default_rng(2), batched=True)
        lower, _ = smoothed_value_mc(h, x - step * e, eta, N, np.random.default_rng(2), batched=True)
        central, central_se = smoothed_value_mc(lambda points: (h(points + step * e) - h(points - step * e)) / (2 * step),
                                                x, eta, N, np.random.default_rng(2), batched=True)
        assert (upper - lower) / (2 * step) == pytest.approx(central, abs=1e-7)
        assert abs(central - gradient[j]) <= 4 * np.hypot(central_se, gradient_se[j])


def test_smoothed_gradient_is_lipschitz_with_constant_n_over_eta():
    n, eta, N = 3, 0.1, 2000
    draws = np.random.default_rng(11)
    for k in range(100):
        x = draws.normal(size=n)
        y = x + 0.05 * draws.normal(size=n)
        gx, _ = smoothed_gradient_mc(lambda z: np.linalg.norm(z), x, eta, N, np.random.default_rng(k))
        gy, _ = smoothed_gradient_mc(lambda z: np.linalg.norm(z), y, eta, N, np.random.default_rng(k))
        assert np.linalg.norm(gx - gy) <= (n / eta) * np.linalg.norm(x - y) + 1e-12
