"""Sobolev / Gagliardo-Nirenberg-Sobolev inequalities and ODE comparison bounds.

Each inequality is exposed as an evaluator returning both sides (or the
margin) on a discrete field, so tests can check it up to the grid tolerance
``eps_grid``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from scipy.special import gamma as gamma_fn

from .field import Field, grad_l2_sq, lp_norm, mass, power_integral
from .radial_grid import RadialGrid

# Relative O(h^2) tolerance; calibrated on heat-kernel profiles with
# sigma >= 1/4, whose energy error is about 0.6 h^2 at worst (n <= 5).
EPS_GRID_CONSTANT = 1.0


def eps_grid(grid: RadialGrid) -> float:
    return EPS_GRID_CONSTANT * grid.h**2


@dataclass(frozen=True)
class SobolevConstant:
    dim: int
    value: float


def sobolev_constant(dim: int) -> SobolevConstant:
    """Sharp constant S_n in S_n ||u||_{2n/(n-2)}^2 <= ||grad u||_2^2."""
    if dim < 3:
        raise ValueError(f"Sobolev embedding into L^(2n/(n-2)) needs n >= 3, got {dim}")
    n = dim
    value = (n * (n - 2) / 4) * 2 ** (2 / n) * math.pi ** (1 + 1 / n) * gamma_fn((n + 1) / 2) ** (-2 / n)
    return SobolevConstant(n, float(value))


@dataclass(frozen=True)
class GnsExponents:
    a: float
    b: float
    delta: float
    gamma: float
    theta: float


def gns_exponents(dim: int, a: float, b: float) -> GnsExponents:
    """Exponents of the GNS-Young bound; requires 1 < b/a < 2n/(a(n-2)) and b/a < 2/a + 2/n."""
    n = dim
    if not (a > 0 and b > 0):
        raise ValueError("a and b must be positive")
    q = b / a
    if not 1 < q < 2 * n / (a * (n - 2)):
        raise ValueError(f"need 1 < b/a < 2n/(a(n-2)); got b/a = {q}")
    if not q < 2 / a + 2 / n:
        raise ValueError(f"need b/a < 2/a + 2/n; got b/a = {q}")
    sob = (n - 2) / (2 * n)
    delta = 2 * (1 / a - sob) / (q - 1)
    gam = 1 + 2 * (b - a) / (2 * a - (b - 2) * n)
    theta = (1 / a - 1 / b) / (1 / a - sob)
    return GnsExponents(a, b, delta, gam, theta)


def sobolev_check(f: Field) -> float:
    """||grad f||^2 - S_n ||f||_{2n/(n-2)}^2; non-negative in the continuum."""
    n = f.grid.dim
    s = sobolev_constant(n).value
    return grad_l2_sq(f) - s * lp_norm(f, 2 * n / (n - 2)) ** 2


def _root_field(f: Field, a: float) -> Field:
    return Field(f.grid, f.values ** (1.0 / a))


def gns_sd_check(f: Field, a: float, b: float) -> tuple[float, float]:
    """Both sides of ||f||_{b/a}^{b/a} <= S_n^{-1} ||grad f^{1/a}||^2 ||f||_1^{2/n}.

    Only the balanced case b/a = 2/a + 2/n is accepted.
    """
    n = f.grid.dim
    q = b / a
    if not (a > 0 and 1 < q < 2 * n / (a * (n - 2))):
        raise ValueError(f"need 1 < b/a < 2n/(a(n-2)); got a={a}, b={b}")
    if not math.isclose(q, 2 / a + 2 / n, rel_tol=1e-12):
        raise ValueError(f"need b/a = 2/a + 2/n; got b/a = {q}, 2/a + 2/n = {2 / a + 2 / n}")
    s = sobolev_constant(n).value
    lhs = power_integral(f, q)
    rhs = grad_l2_sq(_root_field(f, a)) * mass(f) ** (2 / n) / s
    return lhs, rhs


def young_coefficient(dim: int, delta: float, c0: float) -> float:
    """(1 - 1/delta) delta^{-1/(delta-1)} (S_n c0)^{-1/(delta-1)}."""
    s = sobolev_constant(dim).value
    e = 1.0 / (delta - 1.0)
    return (1 - 1 / delta) * delta ** (-e) * (s * c0) ** (-e)


def gns_young_bound(f: Field, a: float, b: float, c0: float) -> tuple[float, float]:
    """Both sides of ||f||_{b/a}^{b/a} <= K(c0) ||f||_1^gamma + c0 ||grad f^{1/a}||^2."""
    if not c0 > 0:
        raise ValueError(f"c0 must be positive, got {c0}")
    n = f.grid.dim
    ex = gns_exponents(n, a, b)
    lhs = power_integral(f, b / a)
    m = mass(f)
    rhs = young_coefficient(n, ex.delta, c0) * (m**ex.gamma if m > 0 else 0.0)
    rhs += c0 * grad_l2_sq(_root_field(f, a))
    return lhs, rhs


def energy_factor(k: float) -> float:
    """4(k-1)/k^2, the dissipation factor of the L^k energy identity; maximal at k = 2."""
    return 4 * (k - 1) / k**2


def subcritical_young_exponent(dim: int, alpha: float, k: float) -> float:
    """delta*theta/(k+alpha-1) for the subcritical L^k estimate with k' = (k+alpha)/2.

    The absorption argument closes when this is < 1.
    """
    n = dim
    kk = k + alpha - 1
    kp = (kk + 1) / 2
    lam = (k / (2 * kp) - k / (2 * kk)) / (k / (2 * kp) - (n - 2) / (2 * n))
    delta = (1 - lam) * kk / (1 - lam * kk / k)
    theta = (1 - 1 / kp) / (1 - 1 / kk)
    return delta * theta / kk


# -- ODE comparison bounds for y' <= eta - beta y^p ---------------------------

def _check_ode(beta, p):
    if not beta > 0:
        raise ValueError(f"beta must be positive, got {beta}")
    if not p > 1:
        raise ValueError(f"p must exceed 1, got {p}")


def ode_bound_hyper(eta: float, beta: float, p: float, t: float) -> float:
    """(eta/beta)^{1/p} + (1/(beta (p-1) t))^{1/(p-1)}, valid for any y(0)."""
    _check_ode(beta, p)
    if eta < 0:
        raise ValueError(f"eta must be non-negative, got {eta}")
    if not t > 0:
        raise ValueError(f"t must be positive, got {t}")
    return (eta / beta) ** (1 / p) + (1 / (beta * (p - 1) * t)) ** (1 / (p - 1))


def ode_bound_capped(y0: float, eta: float, beta: float, p: float) -> float:
    """max(y(0), (eta/beta)^{1/p})."""
    _check_ode(beta, p)
    if eta < 0 or y0 < 0:
        raise ValueError("eta and y0 must be non-negative")
    return max(y0, (eta / beta) ** (1 / p))


def ode_bound_shifted(fval_at_t0: float, beta: float, p: float, t0: float, t: float) -> float:
    """Bound for y' <= f(t) - beta y^p with f >= 0 non-increasing, at t > t0."""
    _check_ode(beta, p)
    if fval_at_t0 < 0:
        raise ValueError("f(t0) must be non-negative")
    if not t0 > 0:
        raise ValueError(f"t0 must be positive, got {t0}")
    if not t > t0:
        raise ValueError(f"need t > t0, got t={t}, t0={t0}")
    return (fval_at_t0 / beta) ** (1 / p) + (1 / (beta * (p - 1) * (t - t0))) ** (1 / (p - 1))
