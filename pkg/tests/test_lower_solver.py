import math

import numpy as np
import pytest
from scipy.stats import linregress

from errors import NonFiniteIterate, RangeError
from feasible_sets import Unconstrained
from lower_solver import (
    InnerConfig,
    epsilon_estimate,
    fixed_budget,
    mean_square_error_curve,
    natural_residual,
    solve_inner,
    sqrt_budget,
    stepsize_schedule,
)
from smpec_problem import NoiseModel, SmpecInstance, builtin_benchmark, synthetic_quadratic_instance


def identity_instance(lower_map=None):
    """F(x, z) = z on R^2 without noise"""
    return SmpecInstance(
        name="identity",
        n=1,
        p=2,
        m=1,
        local_objectives=(lambda x, z, xi: 0.0,),
        lower_map=lower_map or (lambda x, z, zeta: np.asarray(z, dtype=float) + zeta),
        feasible_set=Unconstrained(2),
        mu_F=1.0,
        L_F=1.0,
        L0=1.0,
        L0_tilde=1.0,
        noise_xi=NoiseModel(mean=0.0, std_dev=0.0),
        noise_zeta=NoiseModel(mean=0.0, std_dev=0.0, shape=(2,)),
    )


@pytest.fixture(scope="module")
def quiet_benchmark():
    return builtin_benchmark(1, noise_zeta=NoiseModel(mean=1.0, std_dev=0.0, stream=2))


@pytest.mark.parametrize("k, steps", [(0, 1), (1, 2), (3, 2), (8, 3), (99, 10), (100, 11), (10_000, 101)])
def test_sqrt_budget(k, steps):
    assert sqrt_budget(k) == steps
    assert sqrt_budget(k) == math.ceil(math.sqrt(k + 1))


def test_fixed_budget_ignores_the_epoch():
    rule = fixed_budget(7)
    assert rule(0) == rule(500) == 7


def test_stepsize_schedule_depends_only_on_its_parameters():
    assert stepsize_schedule(1.0, 1.0, 3) == pytest.approx([1 / 2, 1 / 3, 1 / 4])


def test_default_inner_config(benchmark5):
    cfg = InnerConfig.default_for(benchmark5, Gamma=None)
    assert cfg.gamma_hat == 0.5 and cfg.Gamma == 1.0
    assert InnerConfig.default_for(benchmark5, Gamma=3.0).Gamma == 3.0


def test_config_rejects_small_base_stepsize():
    with pytest.raises(RangeError) as info:
        InnerConfig(gamma_hat=0.25).check(2.0)
    assert info.value.field == "gamma_hat"
    with pytest.raises(RangeError):
        InnerConfig(gamma_hat=1.0, Gamma=0.0).check(2.0)


def test_iterates_contract_toward_the_origin(rng):
    instance = identity_instance()
    result = solve_inner(instance, np.zeros(1), 0, InnerConfig(gamma_hat=1.0), np.array([1.0, 0.0]), rng,
                         budget=50, keep_path=True)
    norms = np.linalg.norm(result.path, axis=1)
    assert result.path.shape == (51, 2)
    assert np.all(np.diff(norms) < 0)
    assert result.iterations_used == 50


@pytest.mark.parametrize("k, tolerance", [(100, 1e-1), (10_000, 1e-2)])
def test_benchmark_solve_reaches_the_solution(quiet_benchmark, rng, k, tolerance):
    x = np.zeros(2)
    cfg = InnerConfig.default_for(quiet_benchmark)
    result = solve_inner(quiet_benchmark, x, k, cfg, np.zeros(2), rng)
    assert result.iterations_used == sqrt_budget(k)
    assert np.linalg.norm(result.z - quiet_benchmark.lower_solution(x)) <= tolerance


def test_long_benchmark_solve_from_a_far_start(quiet_benchmark, rng):
    cfg = InnerConfig.default_for(quiet_benchmark, budget_rule=fixed_budget(2000))
    result = solve_inner(quiet_benchmark, np.zeros(2), 0, cfg, np.array([3.0, 3.0]), rng)
    assert np.linalg.norm(result.z - np.array([1.35, 0.05])) <= 5e-3
    assert result.residual <= 5e-3


def test_every_iterate_is_feasible(benchmark5, rng):
    x = np.array([0.5, -0.3])
    cfg = InnerConfig.default_for(benchmark5)
    result = solve_inner(benchmark5, x, 400, cfg, np.array([-4.0, 9.0]), rng, keep_path=True)
    assert len(result.path) == result.iterations_used + 1
    assert all(benchmark5.feasible_set.contains(x, z, tol=1e-10) for z in result.path)


def test_non_finite_iterates_are_reported(rng):
    instance = identity_instance(lower_map=lambda x, z, zeta: np.full(2, np.nan))
    with pytest.raises(NonFiniteIterate):
        solve_inner(instance, np.zeros(1), 0, InnerConfig(gamma_hat=1.0), np.ones(2), rng)


def test_diagnostics_can_be_switched_off(benchmark5, rng):
    cfg = InnerConfig.default_for(benchmark5, diagnostics=False)
    result = solve_inner(benchmark5, np.zeros(2), 3, cfg, np.zeros(2), rng)
    assert math.isnan(result.residual) and math.isnan(result.epsilon_estimate)


def test_natural_residual_examples(benchmark5, rng):
    instance = identity_instance()
    assert natural_residual(instance, np.zeros(1), np.zeros(2), 4, rng) == 0.0
    assert natural_residual(instance, np.zeros(1), np.array([1.0, 0.0]), 4, rng) == pytest.approx(1.0)
    z_star = benchmark5.lower_solution(np.zeros(2))
    assert natural_residual(benchmark5, np.zeros(2), z_star, 400_000, rng) < 1e-3


def test_epsilon_estimate_decays_with_the_epoch(benchmark5):
    cfg = InnerConfig.default_for(benchmark5)
    first = epsilon_estimate(benchmark5, cfg, 0, 0.4, 2.0)
    later = epsilon_estimate(benchmark5, cfg, 99, 0.4, 2.0)
    assert first > later > 0
    assert later / first == pytest.approx((1 + cfg.Gamma) / (10 + cfg.Gamma))


def test_mean_square_error_decays_like_one_over_t(rng):
    instance = synthetic_quadratic_instance(n=3, p=2, m=1, seed=5, zeta_std=1.0)
    x = np.array([0.3, -0.2, 0.1])
    z_star = instance.lower_solution(x)
    cfg = InnerConfig.default_for(instance)
    errors = mean_square_error_curve(instance, x, cfg, z_star, z_star, replications=1000, horizon=10_000, rng=rng)
    steps = np.unique(np.logspace(1, 4, 40).astype(int))
    fit = linregress(np.log(steps), np.log(errors[steps - 1]))
    assert -1.3 <= fit.slope <= -0.7
    assert errors[999] < errors[9]
