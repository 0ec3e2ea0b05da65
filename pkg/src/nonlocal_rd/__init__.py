"""Numerical lab for u_t = Lap u + u^alpha (M0 - int u) on radial R^n, n >= 3."""

__version__ = "0.1.0"

from .field import Field, grad_l2_sq, lp_norm, make_initial, mass
from .radial_grid import RadialGrid, RadialLaplacian, build_grid, build_laplacian, integrate

__all__ = ["Field", "RadialGrid", "RadialLaplacian", "build_grid", "build_laplacian",
           "grad_l2_sq", "integrate", "lp_norm", "make_initial", "mass"]
