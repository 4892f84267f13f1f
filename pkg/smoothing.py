#!/usr/bin/env python3
"""
Randomized sphere smoothing and the zeroth-order gradient estimator

    g = (n (h(x+v, z2, xi) - h(x, z1, xi)) / eta) * v / ||v||,   v uniform on eta*S

Averaging g over v gives the gradient of the ball-smoothed function
h^eta(x) = E_{u in unit ball}[h(x + eta u)]. The Monte-Carlo helpers below
estimate h^eta and its gradient for deterministic test functions.
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from errors import ZeroRadius


@dataclass(frozen=True)
class SphereSample:
    """Point v on the radius-eta sphere"""

    v: np.ndarray
    eta: float

    @property
    def direction(self):
        return self.v / np.linalg.norm(self.v)


@dataclass(frozen=True)
class ZoGradient:
    """Zeroth-order gradient with its provenance"""

    g: np.ndarray
    eta: float
    difference: float
    exact: bool = True
    inner_accuracy: Optional[float] = None


def sample_sphere(n, eta, rng):
    """Uniform draw on the radius-eta sphere in R^n (normalized Gaussian)"""
    while True:
        w = rng.standard_normal(n)
        norm = np.linalg.norm(w)
        if norm > 0.0:
            return SphereSample(v=eta * w / norm, eta=float(eta))


def sample_sphere_batch(n, eta, count, rng):
    """count independent sphere draws as a (count, n) array"""
    w = rng.standard_normal((count, n))
    norms = np.linalg.norm(w, axis=1)
    while np.any(norms == 0.0):
        zero = norms == 0.0
        w[zero] = rng.standard_normal((int(zero.sum()), n))
        norms = np.linalg.norm(w, axis=1)
    return eta * w / norms[:, None]


def sample_ball_batch(n, eta, count, rng):
    """Uniform draws in the radius-eta ball: sphere direction times eta U^(1/n)"""
    directions = sample_sphere_batch(n, 1.0, count, rng)
    radii = eta * rng.uniform(0.0, 1.0, count) ** (1.0 / n)
    return directions * radii[:, None]


def zo_estimate(h_at_x, h_at_x_plus_v, v, n, exact=True, inner_accuracy=None):
    """
    Zeroth-order gradient from two function values

    Args:
        h_at_x (float): h(x, z1, xi)
        h_at_x_plus_v (float): h(x + v, z2, xi), same xi
        v (SphereSample): perturbation with ||v|| = eta
        n (int): dimension of x
        exact (bool): False when z1, z2 came from an inexact lower solve
        inner_accuracy (float): inexactness level of z1, z2 if known

    Returns:
        ZoGradient
    """
    norm = float(np.linalg.norm(v.v))
    if v.eta == 0 or norm == 0.0:
        raise ZeroRadius("smoothing radius eta must be positive")
    difference = float(h_at_x_plus_v - h_at_x)
    g = (n * difference / v.eta) * (np.asarray(v.v, dtype=float) / norm)
    return ZoGradient(g=g, eta=v.eta, difference=difference, exact=exact,
                      inner_accuracy=inner_accuracy)


def zo_estimate_batch(h_at_x, h_at_x_plus_v, V, eta):
    """Row-wise zo_estimate for arrays of values and a (count, n) array of perturbations"""
    if eta == 0:
        raise ZeroRadius("smoothing radius eta must be positive")
    V = np.asarray(V, dtype=float)
    n = V.shape[1]
    differences = np.asarray(h_at_x_plus_v, dtype=float) - np.asarray(h_at_x, dtype=float)
    directions = V / np.linalg.norm(V, axis=1, keepdims=True)
    return (n * differences / eta)[:, None] * directions


def _evaluate(h, points, batched):
    if batched:
        return np.asarray(h(points), dtype=float)
    return np.array([h(point) for point in points], dtype=float)


def smoothed_value_mc(h, x, eta, N, rng, batched=False):
    """
    Monte-Carlo estimate of h^eta(x) = E_u[h(x + eta u)], u uniform in the unit ball

    Returns:
        (estimate, standard_error)
    """
    x = np.asarray(x, dtype=float)
    values = _evaluate(h, x + sample_ball_batch(x.size, eta, N, rng), batched)
    se = values.std(ddof=1) / np.sqrt(N) if N > 1 else np.inf
    return float(values.mean()), float(se)


def smoothed_gradient_mc(h, x, eta, N, rng, batched=False):
    """
    Monte-Carlo estimate of grad h^eta(x) = (n/eta) E_v[(h(x+v) - h(x)) v/||v||]

    Returns:
        (estimate, standard_error per coordinate)
    """
    x = np.asarray(x, dtype=float)
    V = sample_sphere_batch(x.size, eta, N, rng)
    base = float(h(x[None, :])[0]) if batched else float(h(x))
    shifted = _evaluate(h, x + V, batched)
    G = zo_estimate_batch(np.full(N, base), shifted, V, eta)
    se = G.std(axis=0, ddof=1) / np.sqrt(N) if N > 1 else np.full(x.size, np.inf)
    return G.mean(axis=0), se
