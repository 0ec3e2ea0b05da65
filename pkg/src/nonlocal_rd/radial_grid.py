"""Radial discretization of R^n (n >= 3) on a truncated uniform grid.

The Laplacian is written in flux form against the trapezoid weights, so
summing ``w * (L u)`` telescopes: the discrete operator conserves the
discrete mass exactly (up to the flux through the Dirichlet node at R).
Face coefficients are chosen so the operator is exact on r^2.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg import solve_banded
from scipy.special import gamma


def sphere_area(dim: int) -> float:
    """Surface area of the unit sphere S^{n-1}."""
    return 2.0 * np.pi ** (dim / 2) / gamma(dim / 2)


def ball_volume(dim: int) -> float:
    """Volume of the unit ball in R^n."""
    return np.pi ** (dim / 2) / gamma(dim / 2 + 1)


@dataclass(frozen=True, eq=False)
class RadialGrid:
    dim: int
    radius: float
    count: int
    nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return self.radius / (self.count - 1)

    @property
    def area(self) -> float:
        return sphere_area(self.dim)

    def __eq__(self, other):
        if not isinstance(other, RadialGrid):
            return NotImplemented
        return (self.dim, self.radius, self.count) == (other.dim, other.radius, other.count)

    def __hash__(self):
        return hash((self.dim, self.radius, self.count))

    @cached_property
    def laplacian(self) -> "RadialLaplacian":
        return build_laplacian(self)

    def refined(self, factor: int = 2) -> "RadialGrid":
        """Same [0, R] with spacing divided by ``factor``."""
        return build_grid(self.dim, self.radius, (self.count - 1) * factor + 1)


def build_grid(dim: int, radius: float, count: int) -> RadialGrid:
    if int(dim) != dim or dim < 3:
        raise ValueError(f"dimension must be an integer >= 3, got {dim}")
    if not radius > 0:
        raise ValueError(f"radius must be positive, got {radius}")
    if int(count) != count or count < 16:
        raise ValueError(f"count must be an integer >= 16, got {count}")
    dim, count, radius = int(dim), int(count), float(radius)
    h = radius / (count - 1)
    nodes = h * np.arange(count, dtype=float)
    c = np.ones(count)
    c[0] = c[-1] = 0.5
    weights = sphere_area(dim) * nodes ** (dim - 1) * h * c
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return RadialGrid(dim, radius, count, nodes, weights)


def integrate(grid: RadialGrid, values) -> float:
    """Quadrature of a radial function over R^n."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.count,):
        raise ValueError(f"expected {grid.count} values, got shape {values.shape}")
    return float(np.dot(grid.weights, values))


@dataclass(frozen=True, eq=False)
class RadialLaplacian:
    """Tridiagonal radial Laplacian.

    Row i reads ``lower[i] u[i-1] + diag[i] u[i] + upper[i] u[i+1]``
    (``lower[0]`` and ``upper[-1]`` are unused and zero).  The last row is
    the homogeneous Dirichlet closure and is identically zero.

    ``faces[i]`` is the flux coefficient between nodes i and i+1, so that
    ``w_i (L u)_i = faces[i] (u[i+1]-u[i]) - faces[i-1] (u[i]-u[i-1])`` for
    0 < i < N-1 and the discrete Dirichlet energy is
    ``sum(faces * diff(u)**2)``.
    """

    grid: RadialGrid
    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    faces: np.ndarray

    def apply(self, u: np.ndarray) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = self.diag * u
        out[1:] += self.lower[1:] * u[:-1]
        out[:-1] += self.upper[:-1] * u[1:]
        return out

    def energy(self, u: np.ndarray) -> float:
        """Discrete ||grad u||^2 consistent with ``apply`` (summation by parts)."""
        return float(np.dot(self.faces, np.diff(np.asarray(u, dtype=float)) ** 2))

    def as_dense(self) -> np.ndarray:
        n = self.grid.count
        a = np.diag(self.diag)
        a[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        a[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return a

    def solve_implicit(self, rhs: np.ndarray, dt: float) -> np.ndarray:
        """Solve (I - dt L) x = rhs with x[-1] = 0."""
        n = self.grid.count
        ab = np.zeros((3, n))
        ab[0, 1:] = -dt * self.upper[:-1]
        ab[1] = 1.0 - dt * self.diag
        ab[2, :-1] = -dt * self.lower[1:]
        b = np.array(rhs, dtype=float)
        b[-1] = 0.0
        return solve_banded((1, 1), ab, b, overwrite_ab=True, overwrite_b=True,
                            check_finite=False)


def build_laplacian(grid: RadialGrid) -> RadialLaplacian:
    n, h, r, w = grid.dim, grid.h, grid.nodes, grid.weights
    N = grid.count
    # faces[i] = n * W_i / (h r_{i+1/2}) with W_i = sum_{j<=i} w_j: exact on
    # r^2, and faces[0] = 0 because w_0 = 0.
    cum = np.cumsum(w)[:-1]
    mid = r[:-1] + 0.5 * h
    faces = n * cum / (h * mid)

    lower = np.zeros(N)
    upper = np.zeros(N)
    diag = np.zeros(N)
    i = np.arange(1, N - 1)
    upper[i] = faces[i] / w[i]
    lower[i] = faces[i - 1] / w[i]
    diag[i] = -(upper[i] + lower[i])
    # r = 0: u'(0) = 0 and Delta u(0) = n u''(0)
    upper[0] = 2.0 * n / h**2
    diag[0] = -upper[0]
    for arr in (lower, diag, upper, faces):
        arr.setflags(write=False)
    return RadialLaplacian(grid, lower, diag, upper, faces)
