"""IMEX time stepping for u_t = Lap u + u^alpha (M0 - int u) on radial R^n.

Diffusion is backward Euler, the reaction explicit (evaluated on the
pre-step field, including the total mass), so each step is one tridiagonal
solve.  Because the Laplacian is conservative in the trapezoid weights, the
discrete mass obeys m_new = m + dt (M0 - m) int u^alpha exactly, apart from
the flux through the Dirichlet node at R.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .field import Field, lp_norm, mass, power_integral, read_snapshot, write_snapshot

TINY = 1e-300
CSV_COLUMNS = ("t", "m", "int_u_alpha", "dt", "sup")


class BlowupSignal(ArithmeticError):
    """A step produced non-finite values."""


@dataclass(frozen=True)
class SolverConfig:
    m_cap: float
    alpha: float
    t_end: float = 1.0
    dt_init: float = 1e-3
    dt_min: float = 1e-12
    dt_max: float = 0.05
    safety: float = 0.5
    blowup_sup: float = 1e8
    damping: bool = True
    reaction: bool = True
    record_every: int = 1
    lk: tuple = (2.0,)
    snapshot_times: tuple = ()
    max_steps: int = 10_000_000
    ts_constant: float = 1.0

    def __post_init__(self):
        if not self.m_cap > 0:
            raise ValueError(f"m_cap (M0) must be positive, got {self.m_cap}")
        if not self.alpha > 1:
            raise ValueError(f"alpha must exceed 1, got {self.alpha}")
        if not 0 < self.dt_min <= self.dt_init <= self.dt_max:
            raise ValueError("need 0 < dt_min <= dt_init <= dt_max")
        if not 0 < self.safety <= 1:
            raise ValueError("safety must lie in (0, 1]")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        object.__setattr__(self, "lk", tuple(float(k) for k in self.lk))
        object.__setattr__(self, "snapshot_times", tuple(sorted(float(t) for t in self.snapshot_times)))

    @property
    def eps_ts(self) -> float:
        """Time-stepping tolerance used by the time-series contracts."""
        return self.ts_constant * self.dt_max


@dataclass
class RunRecord:
    config: SolverConfig
    times: np.ndarray
    mass_series: np.ndarray
    reaction_integral: np.ndarray
    sup_series: np.ndarray
    dt_series: np.ndarray
    lk_norms: dict
    outcome: str
    t_star: float | None = None
    m0: float = 0.0
    snapshots: dict = field(default_factory=dict)
    step_times: np.ndarray | None = None
    final: Field | None = None
    steps: int = 0

    @property
    def eps_ts(self) -> float:
        return self.config.eps_ts

    def norm(self, k: float) -> np.ndarray:
        if k == math.inf:
            return self.sup_series
        try:
            return self.lk_norms[float(k)]
        except KeyError:
            raise KeyError(f"L^{k} series not recorded (have {sorted(self.lk_norms)})") from None


def reaction_term(u: Field, cfg: SolverConfig) -> np.ndarray:
    if not cfg.reaction:
        return np.zeros_like(u.values)
    ua = u.values**cfg.alpha
    if cfg.damping:
        return ua * (cfg.m_cap - mass(u))
    return cfg.m_cap * ua


def step(u: Field, cfg: SolverConfig, dt: float) -> Field:
    """One IMEX step: (I - dt Lap) u_new = u + dt * reaction(u)."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    rhs = u.values + dt * reaction_term(u, cfg)
    new = u.grid.laplacian.solve_implicit(rhs, dt)
    if not np.all(np.isfinite(new)):
        raise BlowupSignal("non-finite values after implicit solve")
    lo = new.min()
    if lo < 0:
        # elimination round-off only; a genuine sign loss is an error
        if lo < -1e-12 * max(new.max(), TINY):
            raise ArithmeticError(f"step lost non-negativity (min {lo:.3e})")
        new = np.clip(new, 0.0, None)
    return Field(u.grid, new)


def stable_dt(u: Field, cfg: SolverConfig) -> float:
    """Reaction-stiffness step limit."""
    if not cfg.reaction:
        return cfg.dt_max
    sup = float(u.values.max())
    if sup <= 0:
        return cfg.dt_max
    a = cfg.alpha
    if cfg.damping:
        gap = abs(cfg.m_cap - mass(u))
        dt = cfg.safety / (a * sup ** (a - 1) * gap + TINY)
        # keeps dt * int u^alpha < 1, so the discrete mass cannot overshoot M0
        dt = min(dt, cfg.safety / (power_integral(u, a) + TINY))
    else:
        dt = cfg.safety / (a * cfg.m_cap * sup ** (a - 1) + TINY)
    return min(dt, cfg.dt_max)


class _Recorder:
    def __init__(self, cfg):
        self.cfg = cfg
        self.rows = []
        self.norms = {k: [] for k in cfg.lk}

    def add(self, t, u, dt):
        self.rows.append((t, mass(u), power_integral(u, self.cfg.alpha), float(u.values.max()), dt))
        for k in self.cfg.lk:
            self.norms[k].append(lp_norm(u, k))

    def arrays(self):
        a = np.array(self.rows, dtype=float).reshape(-1, 5)
        return a, {k: np.array(v) for k, v in self.norms.items()}


def run(u0: Field, cfg: SolverConfig, schedule=None, t_start: float = 0.0,
        dt_start: float | None = None) -> RunRecord:
    """Integrate from ``t_start`` to ``cfg.t_end``.

    With ``schedule`` (increasing step end times) the adaptive controller is
    bypassed and steps land exactly on the given times; used to compare runs
    on a common time grid.
    """
    m0 = mass(u0)
    if cfg.reaction and cfg.damping and not m0 < cfg.m_cap:
        raise ValueError(
            f"initial mass {m0:.6g} must be below M0 = {cfg.m_cap:.6g} "
            "(standing assumption m0 < M0 for the damped equation)")
    if not u0.values.max() < cfg.blowup_sup:
        raise ValueError("blowup_sup must exceed the initial sup norm")

    targets = [t for t in cfg.snapshot_times if t_start < t <= cfg.t_end]
    snapshots = {}
    if t_start in cfg.snapshot_times:
        snapshots[t_start] = u0
    sched = None if schedule is None else iter([float(s) for s in schedule if s > t_start])

    rec = _Recorder(cfg)
    u, t = u0, float(t_start)
    rec.add(t, u, 0.0)
    step_times = [t]
    dt_prev = cfg.dt_init if dt_start is None else float(dt_start)
    outcome, t_star, nsteps = "completed", None, 0
    recorded_last = True

    while t < cfg.t_end * (1 - 1e-14):
        if nsteps >= cfg.max_steps:
            outcome = "stalled"
            break
        if sched is not None:
            nxt = next(sched, None)
            if nxt is None:
                break
            dt = nxt - t
        else:
            dt = min(stable_dt(u, cfg), 2.0 * dt_prev)
            if dt < cfg.dt_min:
                outcome, t_star = "blowup", t
                break
            nxt = min([cfg.t_end] + [s for s in targets if s > t * (1 + 1e-14)])
            if t + dt >= nxt * (1 - 1e-12):
                dt = nxt - t
            else:
                dt_prev = dt
        try:
            u = step(u, cfg, dt)
        except BlowupSignal:
            outcome, t_star = "blowup", t
            break
        nsteps += 1
        t = t + dt
        for s in targets:
            if abs(t - s) <= 1e-12 * max(1.0, s):
                t = s
                snapshots[s] = u
        step_times.append(t)
        recorded_last = nsteps % cfg.record_every == 0
        if recorded_last:
            rec.add(t, u, dt)
        if u.values.max() >= cfg.blowup_sup:
            outcome, t_star = "blowup", t
            break
    if not recorded_last:
        rec.add(t, u, dt)

    rows, norms = rec.arrays()
    return RunRecord(
        config=cfg, times=rows[:, 0], mass_series=rows[:, 1], reaction_integral=rows[:, 2],
        sup_series=rows[:, 3], dt_series=rows[:, 4], lk_norms=norms, outcome=outcome,
        t_star=t_star, m0=m0, snapshots=snapshots, step_times=np.array(step_times),
        final=u, steps=nsteps)


def heat_only_run(u0: Field, cfg: SolverConfig, schedule=None) -> RunRecord:
    """Same engine with the reaction switched off: the discrete heat semigroup."""
    return run(u0, replace(cfg, reaction=False), schedule=schedule)


def _require_damped(rec: RunRecord):
    if not (rec.config.reaction and rec.config.damping):
        raise ValueError("mass law only applies to damped runs")


def mass_ode_residual(rec: RunRecord) -> float:
    """max |dm/dt - (M0 - m) int u^alpha| over interior samples, relative to max |rhs|."""
    _require_damped(rec)
    t, m, ia = rec.times, rec.mass_series, rec.reaction_integral
    if len(t) < 3:
        raise ValueError("need at least 3 samples")
    dmdt = (m[2:] - m[:-2]) / (t[2:] - t[:-2])
    rhs = (rec.config.m_cap - m) * ia
    res = np.abs(dmdt - rhs[1:-1])
    scale = np.abs(rhs).max()
    if scale == 0:
        return float(res.max())
    return float(res.max() / scale)


def mass_gap_identity(rec: RunRecord, m0: float | None = None) -> float:
    """Max deviation between M0 - m(t) and (M0 - m0) exp(-int_0^t ||u||_alpha^alpha),

    relative to M0 - m0.
    """
    _require_damped(rec)
    ia = rec.reaction_integral
    if ia is None or len(ia) != len(rec.times):
        raise ValueError("record lacks the int u^alpha series")
    m0 = rec.mass_series[0] if m0 is None else float(m0)
    t = rec.times
    cum = np.concatenate([[0.0], np.cumsum(0.5 * (ia[1:] + ia[:-1]) * np.diff(t))])
    lhs = rec.config.m_cap - rec.mass_series
    rhs = (rec.config.m_cap - m0) * np.exp(-cum)
    dev = np.abs(lhs - rhs).max()
    scale = rec.config.m_cap - m0
    return float(dev / scale) if scale > 0 else float(dev)


# -- persistence ----------------------------------------------------------------

def record_columns(rec: RunRecord) -> list[str]:
    return list(CSV_COLUMNS) + [f"L{k:g}" for k in rec.config.lk]


def record_to_csv(rec: RunRecord) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(record_columns(rec))
    cols = [rec.times, rec.mass_series, rec.reaction_integral, rec.dt_series, rec.sup_series]
    cols += [rec.lk_norms[k] for k in rec.config.lk]
    for row in zip(*cols):
        w.writerow([repr(float(x)) for x in row])
    return buf.getvalue()


def write_record_csv(rec: RunRecord, path) -> Path:
    path = Path(path)
    path.write_text(record_to_csv(rec))
    return path


def read_record_csv(path) -> dict:
    """Column name -> array."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    header, data = rows[0], np.array(rows[1:], dtype=float).reshape(-1, len(rows[0]))
    return {name: data[:, i] for i, name in enumerate(header)}


def write_checkpoint(stem, u: Field, t: float, dt: float) -> tuple[Path, Path]:
    """Snapshot file ``<stem>.dat`` plus scalar state in ``<stem>.state``."""
    stem = Path(stem)
    snap = write_snapshot(stem.with_suffix(".dat"), u, t)
    state = stem.with_suffix(".state")
    state.write_text(f"t={float(t)!r}\ndt={float(dt)!r}\n")
    return snap, state


def read_checkpoint(stem) -> tuple[Field, float, float]:
    stem = Path(stem)
    u, _ = read_snapshot(stem.with_suffix(".dat"))
    kv = dict(line.split("=", 1) for line in stem.with_suffix(".state").read_text().split())
    return u, float(kv["t"]), float(kv["dt"])


def config_dict(cfg: SolverConfig) -> dict:
    return asdict(cfg)
