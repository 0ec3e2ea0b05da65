"""Numerical estimate of the sharp constant

    C* = sup ||u||_{alpha+1}^{alpha+1} / (||u||_1^{alpha-1} ||grad u||_2^2),  alpha = 1 + 2/n,

over non-negative radial profiles, and the critical carrying capacity it
determines.  The search is a projected gradient ascent: after each step the
iterate is clipped to u >= 0, replaced by its decreasing rearrangement and
rescaled to unit L^1 and L^{alpha+1} norms.  J is invariant under the
rescaling and does not decrease under rearrangement, so the projections do
not fight the ascent.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator
from scipy.linalg import solve_banded

from .field import Field, grad_l2_sq, lp_norm, mass, power_integral, write_snapshot
from .radial_grid import RadialGrid, ball_volume
from .inequalities import eps_grid, sobolev_constant

SEED_FAMILIES = ("gaussian", "tent", "poly")


def critical_alpha(dim: int) -> float:
    return 1.0 + 2.0 / dim


def j_functional(f: Field) -> float:
    alpha = critical_alpha(f.grid.dim)
    m = mass(f)
    if m <= 0:
        raise ValueError("J is undefined for the zero field")
    g = grad_l2_sq(f)
    if g <= 0:
        raise ValueError("J is undefined for a field with zero gradient")
    return power_integral(f, alpha + 1) / (m ** (alpha - 1) * g)


def rearrange_decreasing(f: Field) -> Field:
    """Discrete symmetric decreasing rearrangement.

    The node values are read as a piecewise-linear profile in r.  Its
    distribution function V(s) = |{u > s}| is computed exactly segment by
    segment at every node level, and the result at node r_i is the level s
    with V(s) = |B_{r_i}|, interpolated between node levels.  This keeps the
    mass and L^k norms to second order in h.  Already non-increasing
    profiles are returned unchanged.
    """
    g = f.grid
    v, r, n = f.values, g.nodes, g.dim
    if np.all(np.diff(v) <= 0):
        return f
    c = g.area / n
    levels = np.unique(v)[::-1]
    ua, ub = v[:-1, None], v[1:, None]
    ra, rb = r[:-1, None], r[1:, None]
    s = levels[None, :]
    ina, inb = ua > s, ub > s
    cross = ina != inb
    du = np.where(cross, ub - ua, 1.0)
    rc = ra + np.clip((s - ua) / du, 0.0, 1.0) * (rb - ra)
    lo = np.where(ina, ra, rc)
    hi = np.where(inb, rb, rc)
    V = np.where(ina | inb, c * (hi**n - lo**n), 0.0).sum(axis=0)
    out = np.interp(c * r**n, V, levels, right=0.0)
    # interp of a monotone table is monotone; this only removes rounding
    out = np.clip(np.minimum.accumulate(out), 0.0, None)
    return Field(g, out)


def scaling_parameters(f: Field) -> tuple[float, float]:
    """(mu, lambda) such that lambda * f(mu r) has unit L^1 and L^{alpha+1} norms."""
    n = f.grid.dim
    alpha = critical_alpha(n)
    m = mass(f)
    if m <= 0:
        raise ValueError("cannot normalize the zero field")
    p = lp_norm(f, alpha + 1)
    e = (alpha + 1) / (n * alpha)
    mu = m**e * p ** (-e)
    lam = mu**n / m
    return mu, lam


def rescale(f: Field, mu: float, lam: float) -> Field:
    """lam * f(mu r), resampled on the same grid by monotone cubic interpolation."""
    r = f.grid.nodes
    if mu == 1.0:
        return Field(f.grid, lam * f.values)
    interp = PchipInterpolator(r, f.values, extrapolate=False)
    vals = interp(mu * r)
    vals = np.nan_to_num(vals, nan=0.0)
    return Field(f.grid, lam * np.clip(vals, 0.0, None))


def normalize(f: Field) -> Field:
    mu, lam = scaling_parameters(f)
    if math.isclose(mu, 1.0, rel_tol=1e-14):
        mu = 1.0
    return rescale(f, mu, lam)


def j_gradient(f: Field) -> np.ndarray:
    """L^2 first variation of log J at the nodes (zero at r = 0 and r = R).

    d log J = (alpha+1) u^alpha / P - (alpha-1) / M + 2 Lap u / G
    """
    g = f.grid
    alpha = critical_alpha(g.dim)
    u = f.values
    P = power_integral(f, alpha + 1)
    M = mass(f)
    G = grad_l2_sq(f)
    grad = (alpha + 1) * u**alpha / P - (alpha - 1) / M + 2.0 * g.laplacian.apply(u) / G
    grad[0] = 0.0
    grad[-1] = 0.0
    return grad


def seed_profile(grid: RadialGrid, family: str) -> Field:
    r, n = grid.nodes, grid.dim
    if family == "gaussian":
        u = np.exp(-(r**2))
    elif family == "tent":
        u = np.clip(1.0 - r, 0.0, None)
    elif family == "poly":
        u = (1.0 + r**2) ** (-(n + 1) / 2)
    else:
        raise ValueError(f"unknown seed family {family!r}; choose from {SEED_FAMILIES}")
    return normalize(Field(grid, u))


@dataclass(frozen=True)
class OptimizerSettings:
    max_iterations: int = 4000
    step: float = 0.05
    min_step: float = 1e-10
    tol: float = 1e-10
    patience: int = 20
    smoothing: float = 0.05
    seeds: tuple = SEED_FAMILIES


@dataclass
class GnsEstimate:
    dim: int
    cstar: float
    profile: Field
    upper_bound: float
    m0_crit: float
    iterations: int
    converged: bool
    seed: str = ""
    trace: list = field(default_factory=list, repr=False)
    per_seed: dict = field(default_factory=dict)

    @property
    def alpha(self) -> float:
        return critical_alpha(self.dim)

    def to_json(self) -> dict:
        return {"n": self.dim, "alpha": self.alpha, "cstar": self.cstar,
                "upper_bound": self.upper_bound, "m0_crit": self.m0_crit,
                "iterations": self.iterations, "converged": self.converged}


def _project(grid: RadialGrid, v: np.ndarray) -> Field:
    v = np.clip(v, 0.0, None)
    v[-1] = 0.0
    # symmetry closure at r = 0: even quadratic through nodes 1 and 2
    v[0] = max(v[1], (4 * v[1] - v[2]) / 3)
    return normalize(rearrange_decreasing(Field(grid, v)))


def ascent_direction(f: Field, smoothing: float) -> np.ndarray:
    """Sobolev-preconditioned projected gradient.

    Solves (I - smoothing * Lap) d = grad on the free nodes, with d = 0 at
    r = 0, at r = R and wherever u = 0 with the gradient pointing outward.
    (I - s Lap) is self-adjoint in the quadrature inner product, so d is an
    ascent direction for J.
    """
    lap = f.grid.laplacian
    g = j_gradient(f)
    active = (f.values <= 0) & (g <= 0)
    active[0] = active[-1] = True
    n = f.grid.count
    ab = np.zeros((3, n))
    ab[0, 1:] = -smoothing * lap.upper[:-1]
    ab[1] = 1.0 - smoothing * lap.diag
    ab[2, :-1] = -smoothing * lap.lower[1:]
    idx = np.flatnonzero(active)
    ab[1, idx] = 1.0
    ab[0, idx[idx + 1 < n] + 1] = 0.0  # upper entry of active row i sits at column i+1
    ab[2, idx[idx > 0] - 1] = 0.0      # lower entry of active row i sits at column i-1
    rhs = np.where(active, 0.0, g)
    return solve_banded((1, 1), ab, rhs, check_finite=False)


def ascend(u: Field, settings: OptimizerSettings) -> tuple[Field, float, list, bool]:
    """Monotone projected ascent from a normalized non-increasing start."""
    grid = u.grid
    J = j_functional(u)
    trace = [J]
    s = settings.step
    quiet = 0
    converged = False
    for _ in range(settings.max_iterations):
        d = ascent_direction(u, settings.smoothing)
        d /= max(np.abs(d).max(), 1e-300)
        while True:
            cand = _project(grid, u.values + s * d * u.values.max())
            Jc = j_functional(cand) if mass(cand) > 0 else -np.inf
            if Jc > J:
                break
            s *= 0.5
            if s < settings.min_step:
                return u, J, trace, True
        gain = Jc - J
        u, J = cand, Jc
        trace.append(J)
        s = min(2.0 * s, 1.0)
        quiet = quiet + 1 if gain < settings.tol * J else 0
        if quiet >= settings.patience:
            converged = True
            break
    return u, J, trace, converged


def estimate_cstar(grid: RadialGrid, settings: OptimizerSettings | None = None) -> GnsEstimate:
    settings = settings or OptimizerSettings()
    n = grid.dim
    upper = 1.0 / sobolev_constant(n).value
    best = None
    per_seed = {}
    for family in settings.seeds:
        try:
            u0 = seed_profile(grid, family)
            j_functional(u0)
        except ValueError:
            continue
        u, J, trace, conv = ascend(u0, settings)
        per_seed[family] = J
        if best is None or J > best[1]:
            best = (u, J, trace, conv, family)
    if best is None:
        raise RuntimeError("no seed profile produced a finite J")
    u, J, trace, conv, family = best
    if J > upper * (1 + eps_grid(grid)):
        raise RuntimeError(f"estimate {J:.6g} exceeds the Sobolev certificate 1/S_n = {upper:.6g}")
    return GnsEstimate(dim=n, cstar=J, profile=u, upper_bound=upper,
                       m0_crit=critical_mass(J, n), iterations=len(trace) - 1,
                       converged=conv, seed=family, trace=trace, per_seed=per_seed)


def critical_mass(est, dim: int | None = None) -> float:
    """(alpha/(alpha-1)) ((alpha-1)/C*)^{1/alpha}; any M0 below it leaves eta0 > 0."""
    if isinstance(est, GnsEstimate):
        cstar, dim = est.cstar, est.dim
    else:
        cstar = float(est)
    if dim is None:
        raise ValueError("dimension required when passing a bare C* value")
    if not cstar > 0:
        raise ValueError(f"C* must be positive, got {cstar}")
    a = critical_alpha(dim)
    return a / (a - 1) * ((a - 1) / cstar) ** (1 / a)


def eta0(cstar: float, dim: int, m_cap: float) -> float:
    return critical_mass(cstar, dim) - m_cap


def decay_envelope(f: Field) -> np.ndarray:
    """Pointwise bound C0 min(r^-n, r^-(n-2)/2) valid for non-increasing profiles.

    Uses u(r) <= |B_1|^{-1} ||u||_1 r^-n and
    u(r) <= |B_1|^{-(n-2)/(2n)} S_n^{-1/2} ||grad u|| r^{-(n-2)/2}; inf at r = 0.
    """
    n = f.grid.dim
    r = f.grid.nodes
    an = ball_volume(n)
    s = sobolev_constant(n).value
    with np.errstate(divide="ignore"):
        b1 = mass(f) / an * r ** (-n)
        b2 = an ** (-(n - 2) / (2 * n)) * s ** -0.5 * math.sqrt(grad_l2_sq(f)) * r ** (-(n - 2) / 2)
    return np.minimum(b1, b2)


def write_estimate(est: GnsEstimate, directory, stem: str = "cstar") -> tuple[Path, Path]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    js = directory / f"{stem}.json"
    js.write_text(json.dumps(est.to_json(), indent=2, sort_keys=True) + "\n")
    snap = write_snapshot(directory / f"{stem}_profile.dat", est.profile)
    return js, snap
