#!/usr/bin/env python3
"""
Parametric feasible sets Z(x) with exact Euclidean projection

Three shapes are supported: the whole space, boxes, and low-dimensional
intersections of halfspaces {w : A w >= b(x)} whose right-hand side moves
with the upper-level decision x. Polytope projection enumerates every
candidate active set once at construction, so each call is a handful of
vectorized numpy operations.
"""

from abc import ABC, abstractmethod
from itertools import combinations

import numpy as np

from errors import InfeasibleSet


class FeasibleSet(ABC):
    """Closed convex set Z(x) in R^p exposing an exact projection"""

    def __init__(self, p):
        self.p = int(p)

    @abstractmethod
    def project(self, x, u):
        """Return argmin over w in Z(x) of ||w - u||; u may carry a leading batch axis"""

    @abstractmethod
    def contains(self, x, z, tol=1e-10):
        """True when z lies in Z(x) up to tol"""


class Unconstrained(FeasibleSet):
    """Z(x) = R^p"""

    def project(self, x, u):
        return np.array(u, dtype=float, copy=True)

    def contains(self, x, z, tol=1e-10):
        return bool(np.all(np.isfinite(z)))

    def __repr__(self):
        return f"Unconstrained(p={self.p})"


class Box(FeasibleSet):
    """Z(x) = {w : lower <= w <= upper}, independent of x"""

    def __init__(self, lower, upper):
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1:
            raise ValueError("Box bounds must be 1-d arrays of equal length")
        if np.any(lower > upper):
            raise InfeasibleSet("Box has lower > upper in some coordinate")
        super().__init__(lower.size)
        self.lower = lower
        self.upper = upper

    def project(self, x, u):
        return np.clip(np.asarray(u, dtype=float), self.lower, self.upper)

    def contains(self, x, z, tol=1e-10):
        z = np.asarray(z, dtype=float)
        return bool(np.all(z >= self.lower - tol) and np.all(z <= self.upper + tol))

    def __repr__(self):
        return f"Box(lower={self.lower.tolist()}, upper={self.upper.tolist()})"


class HalfspacePolytope(FeasibleSet):
    """
    Z(x) = {w in R^p : A w >= b(x)} for small p and few rows

    The projection is the nearest feasible point among the projections onto
    every affine piece {w : A_S w = b_S(x)} with linearly independent rows S
    (including S empty). The true projection is always one of them, so the
    result is exact up to floating point.

    Args:
        A (array q x p): constraint normals
        b_of_x (callable): x -> b(x), array of length q
        name (str): label used in reprs and logs
    """

    def __init__(self, A, b_of_x, name="polytope"):
        A = np.atleast_2d(np.asarray(A, dtype=float))
        super().__init__(A.shape[1])
        self.A = A
        self.b_of_x = b_of_x
        self.name = name
        self._build_active_sets()

    def _build_active_sets(self):
        q, p = self.A.shape
        identity = np.eye(p)
        affine_maps = []
        offsets = []
        self.active_sets = []
        for size in range(0, min(p, q) + 1):
            for subset in combinations(range(q), size):
                affine = identity.copy()
                offset = np.zeros((p, q))
                if size:
                    A_S = self.A[list(subset)]
                    if np.linalg.matrix_rank(A_S) < size:
                        continue
                    pinv = A_S.T @ np.linalg.inv(A_S @ A_S.T)
                    affine = identity - pinv @ A_S
                    offset[:, list(subset)] = pinv
                affine_maps.append(affine)
                offsets.append(offset)
                self.active_sets.append(subset)
        self._affine = np.stack(affine_maps)
        self._offset = np.stack(offsets)

    def rhs(self, x):
        return np.asarray(self.b_of_x(np.asarray(x, dtype=float)), dtype=float)

    def candidates(self, x, u):
        """Projections of u onto every affine piece, shape (..., C, p)"""
        u = np.asarray(u, dtype=float)
        b = self.rhs(x)
        shift = self._offset @ b
        return np.einsum("cij,...j->...ci", self._affine, u) + shift

    def project(self, x, u):
        u = np.asarray(u, dtype=float)
        b = self.rhs(x)
        cand = self.candidates(x, u)
        slack = cand @ self.A.T - b
        feasible = np.all(slack >= -1e-12 * (1.0 + np.abs(b)), axis=-1)
        if not np.all(np.any(feasible, axis=-1)):
            raise InfeasibleSet(f"{self.name}: Z(x) is empty at x={np.asarray(x).tolist()}")
        dist = np.sum((cand - u[..., None, :]) ** 2, axis=-1)
        dist = np.where(feasible, dist, np.inf)
        best = np.argmin(dist, axis=-1)
        return np.take_along_axis(cand, best[..., None, None], axis=-2)[..., 0, :]

    def contains(self, x, z, tol=1e-10):
        z = np.asarray(z, dtype=float)
        return bool(np.all(z @ self.A.T - self.rhs(x) >= -tol))

    def vertices(self, x):
        """Feasible basic points (p linearly independent active rows)"""
        b = self.rhs(x)
        points = []
        for subset in combinations(range(self.A.shape[0]), self.p):
            A_S = self.A[list(subset)]
            if abs(np.linalg.det(A_S)) < 1e-12:
                continue
            w = np.linalg.solve(A_S, b[list(subset)])
            if self.contains(x, w, tol=1e-10):
                points.append(w)
        return np.array(points).reshape(-1, self.p)

    def is_empty(self, x):
        try:
            self.project(x, np.zeros(self.p))
        except InfeasibleSet:
            return True
        return False

    def __repr__(self):
        return f"HalfspacePolytope(name={self.name!r}, rows={self.A.shape[0]}, p={self.p})"


def project(x, u, feasible_set):
    """Euclidean projection of u onto feasible_set evaluated at x"""
    return feasible_set.project(x, u)
