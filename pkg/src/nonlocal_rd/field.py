"""Non-negative radial profiles and the functionals evaluated on them."""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .radial_grid import RadialGrid, build_grid, integrate


@dataclass(frozen=True, eq=False)
class Field:
    grid: RadialGrid
    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.count,):
            raise ValueError(f"expected {self.grid.count} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        if np.any(v < 0):
            raise ValueError(f"field must be non-negative (min {v.min():.3e})")
        v[-1] = 0.0  # Dirichlet closure at R
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def zeros(cls, grid: RadialGrid) -> "Field":
        return cls(grid, np.zeros(grid.count))

    def __mul__(self, c: float) -> "Field":
        return Field(self.grid, self.values * float(c))

    __rmul__ = __mul__


def lp_norm(f: Field, k: float) -> float:
    """L^k norm over R^n; ``k = math.inf`` gives the sup norm."""
    if k == math.inf:
        return float(f.values.max())
    if not k >= 1:
        raise ValueError(f"norm index must be >= 1, got {k}")
    s = integrate(f.grid, f.values**k)
    return s ** (1.0 / k) if s > 0 else 0.0


def power_integral(f: Field, k: float) -> float:
    """Integral of u^k (no root taken); defined for any k > 0."""
    return integrate(f.grid, f.values**k)


def mass(f: Field) -> float:
    return integrate(f.grid, f.values)


def grad_l2_sq(f: Field) -> float:
    """Discrete ||grad u||^2, from face differences with the Laplacian's flux weights."""
    return f.grid.laplacian.energy(f.values)


def make_initial(grid: RadialGrid, kind: str, **params) -> Field:
    """Initial profile families.

    gaussian(mass, sigma)
        mass * (4 pi sigma)^{-n/2} exp(-r^2 / (4 sigma)), the heat kernel at time sigma.
    bump(height, width)
        height * (1 - (r/width)^2)^2 on r < width; C^1 and compactly supported.
    singular(beta, cutoff, scale=1)
        scale * min(cap, r^-beta) on r <= cutoff, with cap = h^-beta. In L^1
        but not L^infinity as h -> 0 when 0 < beta < n.
    """
    r, n = grid.nodes, grid.dim
    if kind == "gaussian":
        m0, sigma = float(params.get("mass", 1.0)), float(params.get("sigma", 1.0))
        if not sigma > 0:
            raise ValueError("gaussian sigma must be positive")
        if m0 < 0:
            raise ValueError("gaussian mass must be non-negative")
        u = m0 * (4 * np.pi * sigma) ** (-n / 2) * np.exp(-(r**2) / (4 * sigma))
    elif kind == "bump":
        height, width = float(params.get("height", 1.0)), float(params.get("width", 1.0))
        if not width > 0:
            raise ValueError("bump width must be positive")
        if height < 0:
            raise ValueError("bump height must be non-negative")
        s = np.clip(1 - (r / width) ** 2, 0, None)
        u = height * s**2
    elif kind == "singular":
        beta = float(params["beta"])
        cutoff = float(params.get("cutoff", 1.0))
        scale = float(params.get("scale", 1.0))
        if not 0 < beta < n:
            raise ValueError(f"singular profile needs 0 < beta < n = {n} to be in L^1, got {beta}")
        if not cutoff > 0 or not scale > 0:
            raise ValueError("singular cutoff and scale must be positive")
        cap = grid.h ** (-beta)
        with np.errstate(divide="ignore"):
            u = np.minimum(cap, r ** (-beta))
        u = scale * np.where(r <= cutoff, u, 0.0)
    else:
        raise ValueError(f"unknown initial profile kind {kind!r}")
    return Field(grid, u)


# -- snapshot files: '# key=value' header lines, then two columns r, u --------

def write_snapshot(path, f: Field, t: float = 0.0) -> Path:
    g = f.grid
    path = Path(path)
    lines = [f"# n={g.dim} R={g.radius!r} N={g.count} t={float(t)!r}", "# r u"]
    lines += [f"{r!r} {u!r}" for r, u in zip(g.nodes.tolist(), f.values.tolist())]
    path.write_text("\n".join(lines) + "\n")
    return path


def read_snapshot(path) -> tuple[Field, float]:
    text = Path(path).read_text().splitlines()
    header = dict(tok.split("=", 1) for tok in text[0].lstrip("# ").split())
    grid = build_grid(int(header["n"]), float(header["R"]), int(header["N"]))
    data = np.loadtxt(text[2:], ndmin=2)
    if data.shape != (grid.count, 2):
        raise ValueError(f"{path}: expected {grid.count} rows of (r, u)")
    if not np.allclose(data[:, 0], grid.nodes, rtol=1e-12, atol=1e-12):
        raise ValueError(f"{path}: radial nodes do not match header")
    return Field(grid, data[:, 1]), float(header["t"])
