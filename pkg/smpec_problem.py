#!/usr/bin/env python3
"""
SMPEC instances: stochastic local upper objectives plus a shared parametric
lower-level variational inequality

An instance bundles, for m agents,
    h_i(x, z, xi)      local stochastic upper objective, i in [m]
    F(x, z, zeta)      stochastic lower-level map (strongly monotone in z)
    Z(x)               parametric feasible set with exact projection
and the constants mu_F, L_F, L0, L0_tilde the algorithm and the theory
calculator need.

Maps must broadcast over leading axes: z of shape (..., p) and noise draws
of shape (...,) + noise.shape return (..., p) for F and (...) for h_i.
"""

import logging
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Callable, Optional, Tuple

import numpy as np
from scipy.stats import ortho_group

from errors import InvalidInstance
from feasible_sets import Box, FeasibleSet, HalfspacePolytope, Unconstrained

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class NoiseModel:
    """Normal noise source; std_dev = 0 yields the mean exactly on every draw"""

    mean: float = 1.0
    std_dev: float = 0.1
    shape: Tuple[int, ...] = ()
    stream: int = 0
    kind: str = "normal"

    def __post_init__(self):
        if self.kind != "normal":
            raise InvalidInstance(f"unsupported noise kind: {self.kind}")
        if self.std_dev < 0:
            raise InvalidInstance(f"std_dev must be nonnegative, got {self.std_dev}")

    def draw(self, rng, size=()):
        """One draw (size=()) or a stack of draws with leading shape size"""
        size = (size,) if isinstance(size, (int, np.integer)) else tuple(size)
        full_shape = size + tuple(self.shape)
        standard = rng.standard_normal(full_shape) if full_shape else rng.standard_normal()
        return self.mean + self.std_dev * standard

    def sequence(self, seed, count):
        """count draws from the stream (seed, self.stream)"""
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(self.stream,)))
        return self.draw(rng, count)

    def expected(self):
        return np.full(self.shape, self.mean) if self.shape else float(self.mean)


@dataclass(frozen=True)
class SmpecInstance:
    """Immutable SMPEC problem shared by all agents"""

    name: str
    n: int
    p: int
    m: int
    local_objectives: Tuple[Callable, ...]
    lower_map: Callable
    feasible_set: FeasibleSet
    mu_F: float
    L_F: float
    L0: float
    L0_tilde: float
    noise_xi: NoiseModel
    noise_zeta: NoiseModel
    exact_lower_solution: Optional[Callable] = None
    reference: Optional[object] = field(default=None, compare=False)

    def __post_init__(self):
        for label in ("n", "p", "m"):
            if getattr(self, label) < 1:
                raise InvalidInstance(f"{label} must be a positive integer")
        if len(self.local_objectives) != self.m:
            raise InvalidInstance("need exactly one local objective per agent")
        for label in ("mu_F", "L_F", "L0", "L0_tilde"):
            if not getattr(self, label) > 0:
                raise InvalidInstance(f"{label} must be positive")
        if self.feasible_set.p != self.p:
            raise InvalidInstance("feasible set dimension does not match p")

    def objective(self, i, x, z, xi):
        return self.local_objectives[i](x, z, xi)

    def deterministic_lower_map(self, x, z):
        """F(x, z, E[zeta]); equals E[F] for maps affine in zeta"""
        return self.lower_map(x, z, self.noise_zeta.expected())

    def lower_solution(self, x):
        """Lower-level solution with zeta frozen at its mean"""
        if self.exact_lower_solution is not None:
            return self.exact_lower_solution(x)
        return solve_deterministic_vi(self, x)


def solve_deterministic_vi(instance, x, z0=None, tol=1e-13, max_iter=20000):
    """
    Projection method z <- P_Z(x)[z - s F(x, z, E zeta)] with s = mu_F / L_F^2

    Contracts at rate sqrt(1 - mu_F^2 / L_F^2) for any strongly monotone
    Lipschitz map, so it serves as the reference solution on sets with no
    closed form.
    """
    x = np.asarray(x, dtype=float)
    step = instance.mu_F / instance.L_F ** 2
    z = instance.feasible_set.project(x, np.zeros(instance.p) if z0 is None else z0)
    for _ in range(max_iter):
        z_next = instance.feasible_set.project(x, z - step * instance.deterministic_lower_map(x, z))
        if np.linalg.norm(z_next - z) <= tol:
            return z_next
        z = z_next
    logger.debug("solve_deterministic_vi stopped at max_iter=%d", max_iter)
    return z


def observed_monotonicity(instance, x, z, z_prime, samples, rng):
    """
    (E_N F(x,z) - E_N F(x,z')) . (z - z') / ||z - z'||^2 with common noise draws

    For a mu_F-strongly monotone map this is >= mu_F up to sampling error.
    """
    zetas = instance.noise_zeta.draw(rng, samples)
    z = np.asarray(z, dtype=float)
    z_prime = np.asarray(z_prime, dtype=float)
    diff = np.mean(instance.lower_map(x, z, zetas), axis=0) - np.mean(instance.lower_map(x, z_prime, zetas), axis=0)
    gap = z - z_prime
    return float(diff @ gap / (gap @ gap))


# ===== BUILTIN BILEVEL BENCHMARK =====
# upper:  (1/m) sum_i E[-a_i x1^2 - 3 b_i x2 - xi y1 + y2^2]   (a_i = b_i = 1 unless heterogeneous)
# lower:  min_y E[2 x1^2 + y1^2 + y2^2 - zeta y2]
#         s.t. x1^2 - 2 x1 + x2^2 - 2 y1 + y2 >= -3,  x2 + 3 y1 - y2 >= 4,  y >= 0

BENCHMARK_NORMALS = np.array([
    [1.0, 0.0],
    [0.0, 1.0],
    [-2.0, 1.0],
    [3.0, -1.0],
])


def benchmark_rhs(x):
    x1, x2 = float(x[0]), float(x[1])
    return np.array([0.0, 0.0, -3.0 - x1 ** 2 + 2.0 * x1 - x2 ** 2, 4.0 - x2])


def benchmark_feasible_set():
    return HalfspacePolytope(BENCHMARK_NORMALS, benchmark_rhs, name="benchmark Z(x)")


def _benchmark_objective(x, z, xi, quad_weight=1.0, linear_weight=1.0):
    z = np.asarray(z, dtype=float)
    return (-quad_weight * x[0] ** 2 - 3.0 * linear_weight * x[1]
            - xi * z[..., 0] + z[..., 1] ** 2)


def _benchmark_lower_map(x, z, zeta):
    # gradient in y of 2 x1^2 + y1^2 + y2^2 - zeta y2
    z = np.asarray(z, dtype=float)
    first, second = np.broadcast_arrays(2.0 * z[..., 0], 2.0 * z[..., 1] - np.asarray(zeta, dtype=float))
    return np.stack([first, second], axis=-1)


def benchmark_lower_solution(x, zeta_mean=1.0, feasible_set=None):
    """
    Deterministic lower-level solution of the benchmark with zeta at its mean

    y1^2 + y2^2 - mu y2 = ||y - (0, mu/2)||^2 - mu^2/4, so the solution is the
    projection of (0, mu/2) onto Z(x).
    """
    feasible_set = feasible_set or benchmark_feasible_set()
    return feasible_set.project(np.asarray(x, dtype=float), np.array([0.0, 0.5 * zeta_mean]))


def builtin_benchmark(m, noise_xi=None, noise_zeta=None, heterogeneity=0.0, seed=0,
                      lipschitz_box=2.0, lipschitz_samples=400):
    """
    Bilevel benchmark with n = p = 2 and mu_F = L_F = 2

    Args:
        m (int): agent count
        noise_xi (NoiseModel): upper-level noise, default N(1, 0.1^2)
        noise_zeta (NoiseModel): lower-level noise, default N(1, 0.1^2)
        heterogeneity (float): scale of per-agent coefficient perturbations
        seed (int): seed for heterogeneity and Lipschitz estimation
        lipschitz_box (float): half-width of the box [-r, r]^2 used to estimate L0, L0_tilde

    Returns:
        SmpecInstance
    """
    if m is None or int(m) < 1:
        raise InvalidInstance(f"benchmark needs m >= 1, got {m}")
    m = int(m)
    noise_xi = noise_xi or NoiseModel(mean=1.0, std_dev=0.1, stream=1)
    noise_zeta = noise_zeta or NoiseModel(mean=1.0, std_dev=0.1, stream=2)

    weights = np.ones((m, 2))
    if heterogeneity > 0:
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
        weights = 1.0 + heterogeneity * rng.standard_normal((m, 2))
    objectives = tuple(
        partial(_benchmark_objective, quad_weight=float(w[0]), linear_weight=float(w[1]))
        for w in weights
    )
    feasible_set = benchmark_feasible_set()
    instance = SmpecInstance(
        name="benchmark",
        n=2,
        p=2,
        m=m,
        local_objectives=objectives,
        lower_map=_benchmark_lower_map,
        feasible_set=feasible_set,
        mu_F=2.0,
        L_F=2.0,
        L0=1.0,
        L0_tilde=1.0,
        noise_xi=noise_xi,
        noise_zeta=noise_zeta,
        exact_lower_solution=partial(benchmark_lower_solution, zeta_mean=noise_zeta.mean,
                                     feasible_set=feasible_set),
    )
    L0, L0_tilde = estimate_lipschitz_constants(instance, box=lipschitz_box,
                                                samples=lipschitz_samples, seed=seed)
    return replace(instance, L0=L0, L0_tilde=L0_tilde)


def estimate_lipschitz_constants(instance, box=2.0, samples=400, seed=0):
    """
    Empirical L0 (implicit objective in x) and L0_tilde (h_i in z) over [-box, box]^n

    Difference quotients at random pairs, sharing the xi draw inside a pair;
    the lower level is solved with zeta at its mean. The implicit objective is
    generally not globally Lipschitz, hence the compact box.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(11,)))
    L0 = 0.0
    L0_tilde = 0.0
    for _ in range(samples):
        x = rng.uniform(-box, box, instance.n)
        direction = rng.standard_normal(instance.n)
        x_prime = np.clip(x + rng.uniform(1e-3, 1.0) * box * direction / np.linalg.norm(direction), -box, box)
        if np.allclose(x, x_prime):
            continue
        z = instance.lower_solution(x)
        z_prime = instance.lower_solution(x_prime)
        dz = rng.standard_normal(instance.p)
        z_shift = z + rng.uniform(1e-3, 1.0) * dz / np.linalg.norm(dz)
        xi = instance.noise_xi.draw(rng)
        for i in range(instance.m):
            h = instance.objective(i, x, z, xi)
            dx = abs(h - instance.objective(i, x_prime, z_prime, xi)) / np.linalg.norm(x - x_prime)
            dzq = abs(h - instance.objective(i, x, z_shift, xi)) / np.linalg.norm(z - z_shift)
            L0 = max(L0, float(dx))
            L0_tilde = max(L0_tilde, float(dzq))
    return max(L0, 1e-12), max(L0_tilde, 1e-12)


# ===== SYNTHETIC QUADRATIC INSTANCES =====

@dataclass(frozen=True)
class SyntheticQuadratic:
    """
    Closed forms for F(x,z) = A z + B x + b and
    h_i(x,z,xi) = 1/2 x^T Q_i x + c_i^T x + (d_i + xi 1)^T z

    On Z = R^p the lower solution is z(x) = -A^{-1}(B x + b), so every
    implicit objective f_i is quadratic and ball smoothing leaves its
    gradient unchanged.
    """

    A: np.ndarray
    B: np.ndarray
    b: np.ndarray
    Q: np.ndarray
    c: np.ndarray
    d: np.ndarray
    xi_mean: float

    def lower_solution(self, x):
        return -np.linalg.solve(self.A, self.B @ np.asarray(x, dtype=float) + self.b)

    def implicit_value(self, i, x):
        x = np.asarray(x, dtype=float)
        z = self.lower_solution(x)
        return float(0.5 * x @ self.Q[i] @ x + self.c[i] @ x + (self.d[i] + self.xi_mean) @ z)

    def implicit_gradient(self, i, x):
        x = np.asarray(x, dtype=float)
        weight = self.d[i] + self.xi_mean
        return self.Q[i] @ x + self.c[i] - self.B.T @ np.linalg.solve(self.A, weight)

    def smoothed_value(self, i, x, eta):
        n = self.Q.shape[1]
        return self.implicit_value(i, x) + eta ** 2 * np.trace(self.Q[i]) / (2.0 * (n + 2))

    def smoothed_gradient(self, i, x, eta):
        return self.implicit_gradient(i, x)

    def average_smoothed_gradient(self, x, eta):
        return np.mean([self.smoothed_gradient(i, x, eta) for i in range(self.Q.shape[0])], axis=0)


def _quadratic_objective(x, z, xi, Q, c, d):
    x = np.asarray(x, dtype=float)
    z = np.asarray(z, dtype=float)
    xi = np.asarray(xi, dtype=float)
    return 0.5 * x @ Q @ x + c @ x + z @ d + xi * np.sum(z, axis=-1)


def _affine_lower_map(x, z, zeta, A, B, b):
    return np.asarray(z, dtype=float) @ A.T + (B @ np.asarray(x, dtype=float) + b) + zeta


def _random_spd(dim, spectrum, rng):
    eigenvalues = rng.uniform(spectrum[0], spectrum[1], dim)
    if dim == 1:
        return np.diag(eigenvalues)
    basis = ortho_group.rvs(dim, random_state=rng)
    matrix = basis @ np.diag(eigenvalues) @ basis.T
    return 0.5 * (matrix + matrix.T)


def synthetic_quadratic_instance(n, p, m, seed=0, A=None, B=None, b=None, box=None,
                                 zeta_std=0.1, xi_std=0.0, spectrum=(1.0, 2.0),
                                 curvature=(0.5, 1.5), lipschitz_box=2.0):
    """
    Affine strongly monotone VI with quadratic local objectives

    A, B, b default to a random SPD matrix with eigenvalues in `spectrum`, a
    Gaussian B scaled by 1/sqrt(n) and a Gaussian b. Passing box=r uses
    Z = [-r, r]^p instead of R^p (closed forms then no longer apply and the
    reference lower solution falls back to the projection method).
    """
    if min(n, p, m) < 1:
        raise InvalidInstance("n, p, m must all be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    A = _random_spd(p, spectrum, rng) if A is None else np.atleast_2d(np.asarray(A, dtype=float))
    B = rng.standard_normal((p, n)) / np.sqrt(n) if B is None else np.atleast_2d(np.asarray(B, dtype=float))
    b = rng.standard_normal(p) if b is None else np.asarray(b, dtype=float).reshape(p)
    Q = np.stack([_random_spd(n, curvature, rng) for _ in range(m)])
    c = rng.standard_normal((m, n))
    d = rng.standard_normal((m, p))

    eigenvalues = np.linalg.eigvalsh(0.5 * (A + A.T))
    mu_F = float(eigenvalues.min())
    L_F = float(np.linalg.norm(A, 2))
    if mu_F <= 0:
        raise InvalidInstance("A must be positive definite")

    noise_xi = NoiseModel(mean=0.0, std_dev=xi_std, stream=1)
    noise_zeta = NoiseModel(mean=0.0, std_dev=zeta_std, shape=(p,), stream=2)
    reference = SyntheticQuadratic(A=A, B=B, b=b, Q=Q, c=c, d=d, xi_mean=noise_xi.mean)
    feasible_set = Unconstrained(p) if box is None else Box(-box * np.ones(p), box * np.ones(p))

    # implicit gradients are affine in x: bound their norm over [-r, r]^n
    radius = lipschitz_box * np.sqrt(n)
    L0 = max(np.linalg.norm(Q[i], 2) * radius + np.linalg.norm(reference.implicit_gradient(i, np.zeros(n)))
             for i in range(m))
    L0_tilde = max(np.linalg.norm(d[i] + noise_xi.mean) for i in range(m)) + 3.0 * xi_std * np.sqrt(p)

    return SmpecInstance(
        name="synthetic",
        n=n,
        p=p,
        m=m,
        local_objectives=tuple(partial(_quadratic_objective, Q=Q[i], c=c[i], d=d[i]) for i in range(m)),
        lower_map=partial(_affine_lower_map, A=A, B=B, b=b),
        feasible_set=feasible_set,
        mu_F=mu_F,
        L_F=L_F,
        L0=float(L0),
        L0_tilde=float(max(L0_tilde, 1e-12)),
        noise_xi=noise_xi,
        noise_zeta=noise_zeta,
        exact_lower_solution=reference.lower_solution if box is None else None,
        reference=reference if box is None else None,
    )


def build_instance(name, m, noise_xi=None, noise_zeta=None, **params):
    """Instance factory used by the experiment runner"""
    if name == "benchmark":
        return builtin_benchmark(m, noise_xi=noise_xi, noise_zeta=noise_zeta, **params)
    if name == "synthetic":
        # closed forms assume zero-mean noise, so only the spreads carry over
        params.setdefault("xi_std", noise_xi.std_dev if noise_xi is not None else 0.0)
        params.setdefault("zeta_std", noise_zeta.std_dev if noise_zeta is not None else 0.1)
        params.pop("heterogeneity", None)
        return synthetic_quadratic_instance(m=m, **params)
    raise InvalidInstance(f"unknown instance: {name}")


if __name__ == "__main__":
    benchmark = builtin_benchmark(5)
    origin = np.zeros(2)
    z = benchmark.lower_solution(origin)

    print("Builtin benchmark (m=5):")
    print("-" * 40)
    print(f"mu_F = {benchmark.mu_F}, L_F = {benchmark.L_F}")
    print(f"L0 ~ {benchmark.L0:.4f}, L0_tilde ~ {benchmark.L0_tilde:.4f}")
    print(f"z(0) = {z}")
    print(f"h_0(0, z(0), E xi) = {benchmark.objective(0, origin, z, benchmark.noise_xi.expected()):.6f}")
