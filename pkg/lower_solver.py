#!/usr/bin/env python3
"""
Projected stochastic approximation for the parametric lower-level VI

    z_{t+1} = P_Z(x)[z_t - g_t F(x, z_t, zeta_t)],   g_t = gamma_hat / (t + 1 + Gamma)

run for t_k = ceil(sqrt(k + 1)) steps at outer iteration k. gamma_hat must
exceed 1 / (2 mu_F) for the O(1/t) mean-square rate.
"""

import logging
import math
from dataclasses import dataclass, field
from functools import partial
from typing import Callable, Optional

import numpy as np

from errors import NonFiniteIterate, RangeError

logger = logging.getLogger(__name__)


def sqrt_budget(k):
    """ceil(sqrt(k + 1)): k=0 -> 1, k=3 -> 2, k=99 -> 10"""
    root = math.isqrt(k + 1)
    return root if root * root == k + 1 else root + 1


def _fixed(steps, k):
    return steps


def fixed_budget(steps):
    """Budget rule ignoring k; used for high-accuracy evaluation solves"""
    return partial(_fixed, int(steps))


def stepsize_schedule(gamma_hat, Gamma, count):
    """gamma_hat / (t + 1 + Gamma) for t = 0, ..., count - 1"""
    return gamma_hat / (np.arange(count) + 1.0 + Gamma)


@dataclass(frozen=True)
class InnerConfig:
    """Stepsize parameters and iteration budget of the lower-level solver"""

    gamma_hat: float
    Gamma: float = 1.0
    budget_rule: Callable[[int], int] = sqrt_budget
    residual_samples: int = 32
    diagnostics: bool = True

    @classmethod
    def default_for(cls, instance, **overrides):
        """gamma_hat = 1 / mu_F, Gamma = 1"""
        params = {"gamma_hat": 1.0 / instance.mu_F}
        params.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**params)

    def check(self, mu_F):
        if not self.gamma_hat > 1.0 / (2.0 * mu_F):
            raise RangeError("gamma_hat", self.gamma_hat, f"must exceed 1/(2 mu_F) = {1.0 / (2.0 * mu_F):.6g}")
        if not self.Gamma > 0:
            raise RangeError("Gamma", self.Gamma, "must be positive")


@dataclass
class InnerSolveResult:
    z: np.ndarray
    iterations_used: int
    residual: float = float("nan")
    epsilon_estimate: float = float("nan")
    path: Optional[np.ndarray] = field(default=None, repr=False)


def mean_map(instance, x, z, N, rng):
    """N-sample mean of F(x, z, zeta)"""
    zetas = instance.noise_zeta.draw(rng, N)
    return np.mean(instance.lower_map(x, z, zetas), axis=0)


def natural_residual(instance, x, z, N, rng):
    """||z - P_Z(x)[z - E_N F(x, z, .)]||"""
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    step = instance.feasible_set.project(x, z - mean_map(instance, x, z, N, rng))
    return float(np.linalg.norm(z - step))


def solve_inner(instance, x_hat, k, cfg, z0, rng, budget=None, keep_path=False):
    """
    Run the projected SA loop at x_hat for outer iteration k

    Args:
        instance (SmpecInstance): problem
        x_hat (array): upper-level point the lower problem is solved at
        k (int): outer iteration index, sets the budget through cfg.budget_rule
        cfg (InnerConfig): stepsizes and budget rule
        z0 (array): starting point, projected onto Z(x_hat) first
        rng (np.random.Generator): owns the zeta draws of this solve
        budget (int): overrides cfg.budget_rule(k) when given
        keep_path (bool): also return every iterate

    Returns:
        InnerSolveResult
    """
    cfg.check(instance.mu_F)
    x_hat = np.asarray(x_hat, dtype=float)
    feasible_set = instance.feasible_set
    z = feasible_set.project(x_hat, np.asarray(z0, dtype=float))
    z_start = z
    steps_total = cfg.budget_rule(k) if budget is None else int(budget)
    stepsizes = stepsize_schedule(cfg.gamma_hat, cfg.Gamma, steps_total)
    zetas = instance.noise_zeta.draw(rng, steps_total)

    path = [z] if keep_path else None
    second_moment = 0.0
    for t in range(steps_total):
        value = instance.lower_map(x_hat, z, zetas[t])
        second_moment += float(value @ value)
        z = feasible_set.project(x_hat, z - stepsizes[t] * value)
        if not np.all(np.isfinite(z)):
            raise NonFiniteIterate(f"lower-level iterate diverged at t={t} (gamma_hat={cfg.gamma_hat})")
        if keep_path:
            path.append(z)

    result = InnerSolveResult(z=z, iterations_used=steps_total,
                              path=np.array(path) if keep_path else None)
    if cfg.diagnostics:
        result.residual = natural_residual(instance, x_hat, z, cfg.residual_samples, rng)
        initial = natural_residual(instance, x_hat, z_start, cfg.residual_samples, rng)
        result.epsilon_estimate = epsilon_estimate(instance, cfg, k, initial,
                                                   second_moment / max(steps_total, 1))
    return result


def epsilon_estimate(instance, cfg, k, initial_residual, second_moment):
    """
    C / (sqrt(k + 1) + Gamma) with the standard strongly monotone SA constant

        C = max{gamma_hat^2 M^2 / (2 gamma_hat mu_F - 1), (1 + Gamma) D0^2}

    where D0 = (1 + L_F) / mu_F * initial residual bounds ||z0 - z*|| and M^2 is
    the observed mean of ||F||^2 along the run. An estimate, not a certified bound.
    """
    mu, gamma_hat = instance.mu_F, cfg.gamma_hat
    distance = (1.0 + instance.L_F) / mu * initial_residual
    constant = max(gamma_hat ** 2 * second_moment / (2.0 * gamma_hat * mu - 1.0),
                   (1.0 + cfg.Gamma) * distance ** 2)
    return constant / (math.sqrt(k + 1) + cfg.Gamma)


def mean_square_error_curve(instance, x, cfg, z0, z_star, replications, horizon, rng):
    """
    Mean over replications of ||z_t - z*||^2 for t = 1, ..., horizon

    All replications advance together as one (replications, p) array; entry
    t-1 of the result is the error after t steps.
    """
    cfg.check(instance.mu_F)
    x = np.asarray(x, dtype=float)
    z_star = np.asarray(z_star, dtype=float)
    feasible_set = instance.feasible_set
    Z = feasible_set.project(x, np.broadcast_to(np.asarray(z0, dtype=float), (replications, instance.p)))
    stepsizes = stepsize_schedule(cfg.gamma_hat, cfg.Gamma, horizon)
    errors = np.empty(horizon)
    for t in range(horizon):
        zetas = instance.noise_zeta.draw(rng, replications)
        Z = feasible_set.project(x, Z - stepsizes[t] * instance.lower_map(x, Z, zetas))
        errors[t] = np.mean(np.sum((Z - z_star) ** 2, axis=1))
    if not np.all(np.isfinite(errors)):
        raise NonFiniteIterate("error curve diverged")
    return errors
