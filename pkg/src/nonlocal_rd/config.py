"""Scenario definitions: sectioned key=value config files and shipped presets.

Quantities the equation leaves symbolic can be written relative to derived
values, e.g. ``m_cap = 0.5*m0_crit`` (alias ``auto-threshold*0.5``) or
``mass = 0.8*m_cap`` for the initial data.
"""
from __future__ import annotations

import configparser
import functools
import math
import re
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .evolution import SolverConfig
from .field import Field, make_initial, mass
from .radial_grid import RadialGrid, build_grid
from .gns_optimizer import OptimizerSettings, SEED_FAMILIES, critical_alpha, critical_mass, estimate_cstar

ANALYSES = ("decay", "mass_ode", "mass_gap", "mass_bounds", "envelope", "bounded",
            "asymptotics", "contractivity", "blowup", "lk_finite")
SWEEP_AXES = {"m_cap": ("equation", "m_cap"), "alpha": ("equation", "alpha"),
              "count": ("grid", "count"), "radius": ("grid", "radius"),
              "dt_max": ("solver", "dt_max")}
CSTAR_GRID = (2.5, 513)

KEYS = {
    "grid": {"n", "radius", "count"},
    "equation": {"alpha", "m_cap", "damping", "cstar"},
    "initial": {"kind", "mass", "sigma", "height", "width", "beta", "cutoff", "scale"},
    "solver": {"t_end", "dt_init", "dt_min", "dt_max", "safety", "blowup_sup",
               "record_every", "ts_constant", "max_steps"},
    "diagnostics": {"norms", "analyses", "fit_window", "decay_k", "decay_tol", "p", "r",
                    "asymptotic_tol", "early_window", "late_window", "contract_tol",
                    "hyper_k", "hyper_tol", "snapshot_times", "expect", "refine",
                    "refine_factor", "bound_ratio"},
    "output": {"name", "directory"},
}


class ScenarioError(ValueError):
    """Invalid scenario file or parameters."""


@dataclass(frozen=True)
class Quantity:
    """A number, or a factor times a named derived value."""
    factor: float
    symbol: str | None = None

    @classmethod
    def parse(cls, text: str, symbols=()) -> "Quantity":
        s = text.strip().replace(" ", "")
        if s == "auto-threshold":
            s = "1*m0_crit"
        m = re.fullmatch(r"auto-threshold\*(.+)", s)
        if m:
            s = f"{m.group(1)}*m0_crit"
        m = re.fullmatch(r"(.+)\*([A-Za-z_][A-Za-z0-9_]*)", s)
        if m:
            if m.group(2) not in symbols:
                raise ScenarioError(f"unknown symbol {m.group(2)!r} (allowed: {', '.join(symbols) or 'none'})")
            return cls(float(m.group(1)), m.group(2))
        if s in symbols:
            return cls(1.0, s)
        return cls(float(s))

    def value(self, env: dict) -> float:
        return self.factor if self.symbol is None else self.factor * env[self.symbol]

    def __str__(self):
        return repr(self.factor) if self.symbol is None else f"{self.factor!r}*{self.symbol}"


@dataclass(frozen=True)
class Scenario:
    name: str
    dim: int
    radius: float
    count: int
    alpha: float
    m_cap: Quantity
    damping: bool = True
    cstar: float | None = None
    initial_kind: str = "gaussian"
    initial: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    norms: tuple = (2.0,)
    analyses: tuple = ()
    fit_window: tuple = (10.0, 100.0)
    decay_k: float = 2.0
    decay_tol: float = 0.15
    p: float | None = None
    r: float | None = None
    asymptotic_tol: float = 0.1
    early_window: tuple = (0.1, 1.0)
    late_window: tuple = (1.0, 100.0)
    contract_tol: float = 0.3
    hyper_k: float = 3.0
    hyper_tol: float = 0.15
    snapshot_times: tuple = ()
    expect: str = "global"
    refine: bool = False
    refine_factor: int = 2
    bound_ratio: float = 1.05
    directory: str = "runs"
    seed_profile: str | None = None

    def grid(self) -> RadialGrid:
        return build_grid(self.dim, self.radius, self.count)

    def needs_cstar(self) -> bool:
        return self.m_cap.symbol == "m0_crit"

    def to_dict(self) -> dict:
        d = asdict(self)
        d["m_cap"] = str(self.m_cap)
        d["initial"] = {k: str(v) for k, v in self.initial.items()}
        return d

    def with_value(self, axis: str, value) -> "Scenario":
        if axis not in SWEEP_AXES:
            raise ScenarioError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
        if axis == "m_cap":
            q = value if isinstance(value, Quantity) else Quantity.parse(str(value), ("m0_crit",))
            return replace(self, m_cap=q)
        if axis == "alpha":
            return replace(self, alpha=float(value))
        if axis == "count":
            return replace(self, count=int(float(value)))
        if axis == "radius":
            return replace(self, radius=float(value))
        return replace(self, solver={**self.solver, "dt_max": float(value)})


@functools.lru_cache(maxsize=None)
def threshold_cstar(dim: int, seed_profile: str | None = None) -> float:
    """C* on the default optimizer grid, cached per dimension and seed family."""
    seeds = SEED_FAMILIES if seed_profile is None else (seed_profile,)
    est = estimate_cstar(build_grid(dim, *CSTAR_GRID), OptimizerSettings(seeds=seeds))
    return est.cstar


@dataclass(frozen=True)
class Resolved:
    """Numeric form of a scenario: grid, initial field, solver config."""
    scenario: Scenario
    grid: RadialGrid
    u0: Field
    config: SolverConfig
    m_cap: float
    cstar: float | None
    m0_crit: float | None


def resolve(s: Scenario) -> Resolved:
    if s.dim < 3:
        raise ScenarioError(f"n = {s.dim} rejected: the equation is studied for n >= 3")
    if not s.alpha > 1:
        raise ScenarioError(f"alpha must exceed 1, got {s.alpha}")
    cstar, m0c = s.cstar, None
    if s.needs_cstar() and cstar is None:
        if not math.isclose(s.alpha, critical_alpha(s.dim)):
            raise ScenarioError("a threshold-relative M0 needs the critical alpha = 1 + 2/n")
        cstar = threshold_cstar(s.dim, s.seed_profile)
    if cstar is not None:
        m0c = critical_mass(cstar, s.dim)
    m_cap = s.m_cap.value({"m0_crit": m0c})
    if not m_cap > 0:
        raise ScenarioError(f"M0 must be positive, got {m_cap}")
    try:
        grid = s.grid()
    except ValueError as e:
        raise ScenarioError(str(e)) from None
    env = {"m_cap": m_cap, "m0_crit": m0c}
    params = {k: v.value(env) for k, v in s.initial.items()}
    target = params.pop("mass", None)
    if s.initial_kind == "gaussian" and target is not None:
        params["mass"] = target
    try:
        u0 = make_initial(grid, s.initial_kind, **params)
    except (ValueError, KeyError) as e:
        raise ScenarioError(f"initial data: {e}") from None
    if s.initial_kind != "gaussian" and target is not None:
        m = mass(u0)
        if m == 0:
            raise ScenarioError("cannot rescale a zero initial profile to a target mass")
        u0 = u0 * (target / m)
    m0 = mass(u0)
    if s.damping and not m0 < m_cap:
        raise ScenarioError(
            f"initial mass m0 = {m0:.6g} is not below M0 = {m_cap:.6g}; the damped "
            "equation is studied under the standing assumption m0 < M0")
    kw = dict(s.solver)
    kw["lk"] = s.norms
    kw["snapshot_times"] = s.snapshot_times
    try:
        cfg = SolverConfig(m_cap=m_cap, alpha=s.alpha, damping=s.damping, **kw)
    except (TypeError, ValueError) as e:
        raise ScenarioError(f"solver: {e}") from None
    return Resolved(s, grid, u0, cfg, m_cap, cstar, m0c)


# -- parsing ------------------------------------------------------------------

def _locate(text: str) -> dict:
    """(section, key) -> 1-based line number."""
    where, section = {}, None
    for i, line in enumerate(text.splitlines(), 1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.fullmatch(r"\[([^\]]+)\]", s)
        if m:
            section = m.group(1).strip()
            where.setdefault((section, None), i)
            continue
        m = re.match(r"([^=:]+?)\s*[=:]", s)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), i)
    return where


def _floats(text: str) -> tuple:
    return tuple(float(x) for x in re.split(r"[,\s]+", text.strip()) if x)


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "yes", "true", "on"):
        return True
    if t in ("0", "no", "false", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _times(text: str) -> tuple:
    """Comma list, or 'geom(lo, hi, count)' for log-spaced snapshot times."""
    m = re.fullmatch(r"geom\(([^)]*)\)", text.strip())
    if m:
        lo, hi, k = _floats(m.group(1))
        return tuple(float(f"{t:.12g}") for t in np.geomspace(lo, hi, int(k)))
    return _floats(text)


def parse_scenario(text: str, origin: str = "<config>") -> Scenario:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        cp.read_string(text, source=origin)
    except configparser.ParsingError as e:
        lineno, line = e.errors[0]
        raise ScenarioError(f"{origin}:{lineno}: cannot parse {line!r}") from None
    except (configparser.DuplicateOptionError, configparser.DuplicateSectionError) as e:
        raise ScenarioError(f"{origin}:{e.lineno}: {e.message if hasattr(e, 'message') else e}") from None
    except configparser.MissingSectionHeaderError as e:
        raise ScenarioError(f"{origin}:{e.lineno}: key outside any section") from None
    where = _locate(text)

    def loc(section, key=None):
        return f"{origin}:{where.get((section, key), where.get((section, None), '?'))}"

    for sec in cp.sections():
        if sec not in KEYS:
            raise ScenarioError(f"{loc(sec)}: unknown section [{sec}]")
        for key in cp[sec]:
            if key not in KEYS[sec]:
                raise ScenarioError(f"{loc(sec, key)}: unknown key {key!r} in [{sec}]")
    for sec in ("grid", "equation"):
        if sec not in cp:
            raise ScenarioError(f"{origin}: missing required section [{sec}]")

    def get(sec, key, conv, default=None, required=False):
        if sec in cp and key in cp[sec]:
            raw = cp[sec][key]
            try:
                return conv(raw)
            except (ValueError, ScenarioError) as e:
                raise ScenarioError(f"{loc(sec, key)}: bad value for {key!r}: {e}") from None
        if required:
            raise ScenarioError(f"{origin}: [{sec}] needs {key!r}")
        return default

    dim = get("grid", "n", int, required=True)
    if dim < 3:
        raise ScenarioError(f"{loc('grid', 'n')}: n = {dim} rejected: the equation is studied for n >= 3")

    def alpha_conv(raw):
        return critical_alpha(dim) if raw.strip() == "critical" else float(raw)

    initial = {}
    kind = "gaussian"
    if "initial" in cp:
        for key, raw in cp["initial"].items():
            if key == "kind":
                kind = raw.strip()
            else:
                symbols = ("m_cap", "m0_crit") if key == "mass" else ()
                initial[key] = get("initial", key, lambda s, sy=symbols: Quantity.parse(s, sy))

    solver = {}
    if "solver" in cp:
        ints = {"record_every", "max_steps"}
        for key in cp["solver"]:
            solver[key] = get("solver", key, (lambda s: int(float(s))) if key in ints else float)

    analyses = get("diagnostics", "analyses",
                   lambda s: tuple(a.strip() for a in s.split(",") if a.strip()), ())
    for a in analyses:
        if a not in ANALYSES:
            raise ScenarioError(f"{loc('diagnostics', 'analyses')}: unknown analysis {a!r}")
    expect = get("diagnostics", "expect", str.strip, "global")
    if expect not in ("global", "blowup"):
        raise ScenarioError(f"{loc('diagnostics', 'expect')}: expect must be 'global' or 'blowup'")

    s = Scenario(
        name=get("output", "name", str.strip, Path(origin).stem),
        dim=dim,
        radius=get("grid", "radius", float, required=True),
        count=get("grid", "count", int, required=True),
        alpha=get("equation", "alpha", alpha_conv, required=True),
        m_cap=get("equation", "m_cap", lambda x: Quantity.parse(x, ("m0_crit",)), required=True),
        damping=get("equation", "damping", _bool, True),
        cstar=get("equation", "cstar", float),
        initial_kind=kind,
        initial=initial,
        solver=solver,
        norms=get("diagnostics", "norms", _floats, (2.0,)),
        analyses=analyses,
        fit_window=get("diagnostics", "fit_window", _floats, (10.0, 100.0)),
        decay_k=get("diagnostics", "decay_k", float, 2.0),
        decay_tol=get("diagnostics", "decay_tol", float, 0.15),
        p=get("diagnostics", "p", float),
        r=get("diagnostics", "r", float),
        asymptotic_tol=get("diagnostics", "asymptotic_tol", float, 0.1),
        early_window=get("diagnostics", "early_window", _floats, (0.1, 1.0)),
        late_window=get("diagnostics", "late_window", _floats, (1.0, 100.0)),
        contract_tol=get("diagnostics", "contract_tol", float, 0.3),
        hyper_k=get("diagnostics", "hyper_k", float, 3.0),
        hyper_tol=get("diagnostics", "hyper_tol", float, 0.15),
        snapshot_times=get("diagnostics", "snapshot_times", _times, ()),
        expect=expect,
        refine=get("diagnostics", "refine", _bool, False),
        refine_factor=get("diagnostics", "refine_factor", int, 2),
        bound_ratio=get("diagnostics", "bound_ratio", float, 1.05),
        directory=get("output", "directory", str.strip, "runs"),
    )
    _check_requirements(s, loc)
    return s


def _check_requirements(s: Scenario, loc) -> None:
    """Each requested analysis must have its diagnostics enabled."""
    need = {"decay": [s.decay_k], "envelope": [2.0], "contractivity": []}
    for a in s.analyses:
        for k in need.get(a, []):
            if float(k) not in s.norms:
                raise ScenarioError(f"{loc('diagnostics', 'norms')}: analysis {a!r} needs the L^{k:g} norm in 'norms'")
    if "asymptotics" in s.analyses and len(s.snapshot_times) < 10:
        raise ScenarioError(f"{loc('diagnostics', 'snapshot_times')}: 'asymptotics' needs >= 10 snapshot times")
    if ("mass_ode" in s.analyses or "mass_gap" in s.analyses or "envelope" in s.analyses) and not s.damping:
        raise ScenarioError(f"{loc('equation', 'damping')}: mass-law analyses apply to the damped equation only")


def load_scenario(path) -> Scenario:
    """Parse and validate a scenario file (including the initial-mass assumption)."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"cannot read {path}: {e}") from None
    s = parse_scenario(text, str(path))
    resolve(s)
    return s


# -- presets ------------------------------------------------------------------

_CRITICAL_BASE = """
[grid]
n = 3
radius = 80
count = 512

[equation]
alpha = critical
m_cap = auto-threshold*0.5
damping = on

[initial]
kind = gaussian
mass = 0.8*m_cap
sigma = 1

[solver]
t_end = 100
dt_init = 1e-3
dt_max = 0.05
"""

PRESETS = {
    "subcritical-n3": """
[grid]
n = 3
radius = 120
count = 768

[equation]
alpha = 1.3
m_cap = 10
damping = on

[initial]
kind = gaussian
mass = 1
sigma = 1

[solver]
t_end = 100
dt_max = 0.05

[diagnostics]
norms = 2
analyses = mass_ode, mass_gap, mass_bounds, bounded

[output]
name = subcritical-n3
""",
    "critical-below-threshold": _CRITICAL_BASE + """
[diagnostics]
norms = 2, 3
analyses = decay, mass_ode, mass_gap, mass_bounds, envelope, bounded
fit_window = 10, 100
snapshot_times = 1, 10, 100

[output]
name = critical-below-threshold
""",
    "asymptotics": _CRITICAL_BASE + """
[diagnostics]
norms = 2
analyses = asymptotics, mass_bounds
p = 3
r = 2.5
fit_window = 10, 100
snapshot_times = geom(1, 100, 41)

[output]
name = asymptotics
""",
    "singular-data": """
[grid]
n = 3
radius = 80
count = 512

[equation]
alpha = critical
m_cap = auto-threshold*0.5
damping = on

[initial]
kind = singular
beta = 2.5
cutoff = 1
mass = 0.8*m_cap

[solver]
t_end = 100
dt_init = 1e-8
dt_max = 0.05

[diagnostics]
norms = 2, 3
analyses = contractivity, lk_finite, mass_bounds
early_window = 0.1, 1
late_window = 1, 100

[output]
name = singular-data
""",
    "fujita-control": _CRITICAL_BASE.replace("damping = on", "damping = off") + """
[diagnostics]
norms = 2
analyses = blowup
expect = blowup
refine = yes

[output]
name = fujita-control
""",
}


def preset(name: str) -> Scenario:
    if name not in PRESETS:
        raise ScenarioError(f"unknown preset {name!r}; available: {', '.join(PRESETS)}")
    return parse_scenario(PRESETS[name], f"<preset {name}>")


def scenario_from_arg(arg: str) -> Scenario:
    """A preset name or a config file path."""
    if arg in PRESETS:
        return preset(arg)
    return load_scenario(arg)
