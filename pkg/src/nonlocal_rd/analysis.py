"""Post-processing of run records: decay exponents, heat-kernel asymptotics,
contractivity rates and blow-up summaries.

Only exponents are ever compared with theory; prefactors are left free.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np
from scipy.special import gamma as gamma_fn
from scipy.special import ive

from .evolution import RunRecord
from .field import Field

MIN_FIT_SAMPLES = 10


@dataclass(frozen=True)
class DecayFit:
    k: float
    window: tuple
    slope: float
    intercept: float
    r_squared: float
    predicted_slope: float
    samples: int = 0

    def relative_error(self) -> float:
        return abs(self.slope - self.predicted_slope) / abs(self.predicted_slope)

    def within(self, rel_tol: float) -> bool:
        return self.relative_error() <= rel_tol

    def to_json(self) -> dict:
        d = asdict(self)
        d["k"] = "inf" if self.k == math.inf else self.k
        d["window"] = list(self.window)
        return d


def predicted_decay_slope(k: float, alpha: float) -> float:
    """Exponent of ||u(t)||_k <= C t^{-(k-1)/(k(alpha-1))}."""
    if k == math.inf:
        return -1.0 / (alpha - 1)
    return -(k - 1) / (k * (alpha - 1))


def loglog_fit(times, values, window, k: float, predicted: float) -> DecayFit:
    """Least-squares line through (log t, log y) restricted to ``window``."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    lo, hi = float(window[0]), float(window[1])
    if not 0 < lo < hi:
        raise ValueError(f"fit window must satisfy 0 < lo < hi, got {window}")
    sel = (t >= lo * (1 - 1e-12)) & (t <= hi * (1 + 1e-12))
    count = int(sel.sum())
    if count < MIN_FIT_SAMPLES:
        raise ValueError(f"fit window {window} holds {count} samples; need >= {MIN_FIT_SAMPLES}")
    ys = y[sel]
    if not np.all(ys > 0):
        raise ValueError("series must be strictly positive in the fit window (log undefined)")
    x, z = np.log(t[sel]), np.log(ys)
    slope, intercept = np.polyfit(x, z, 1)
    resid = z - (slope * x + intercept)
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0 else max(0.0, 1.0 - float(np.sum(resid**2)) / ss_tot)
    return DecayFit(k=k, window=(lo, hi), slope=float(slope), intercept=float(intercept),
                    r_squared=min(r2, 1.0), predicted_slope=float(predicted), samples=count)


def fit_decay(rec: RunRecord, k: float, window=(10.0, 100.0)) -> DecayFit:
    """Fit the log-log slope of ||u(t)||_k over ``window``."""
    return loglog_fit(rec.times, rec.norm(k), window, k,
                      predicted_decay_slope(k, rec.config.alpha))


# -- L^2 envelope -------------------------------------------------------------

@dataclass(frozen=True)
class EnvelopeCheck:
    constant: float
    violation: float
    eta0: float
    m_cap: float
    passed: bool


def l2_decay_envelope(rec: RunRecord, eta0: float, m0cap: float,
                      tol: float | None = None) -> EnvelopeCheck:
    """Test int u^2 <= (y0^{1-alpha} + (alpha-1) C t)^{-1/(alpha-1)} with C fitted.

    The largest admissible C is min_t (y^{1-alpha} - y0^{1-alpha}) / ((alpha-1) t);
    if it is positive the envelope holds with zero violation.  Otherwise the
    violation is the relative excess of the series over the C -> 0 envelope y0.
    """
    if not eta0 > 0:
        raise ValueError("the L^2 envelope is stated for eta0 > 0 (M0 below the threshold)")
    a = rec.config.alpha
    y = rec.norm(2.0) ** 2
    t = rec.times
    tol = rec.eps_ts if tol is None else tol
    y0 = y[0]
    if y0 == 0:
        return EnvelopeCheck(math.inf, 0.0, eta0, m0cap, True)
    sel = (t > 0) & (y > 0)
    if not sel.any():
        return EnvelopeCheck(math.inf, 0.0, eta0, m0cap, True)
    c = float(np.min((y[sel] ** (1 - a) - y0 ** (1 - a)) / ((a - 1) * t[sel])))
    if c > 0:
        env = (y0 ** (1 - a) + (a - 1) * c * t) ** (-1 / (a - 1))
        viol = float(max(0.0, np.max((y - env) / env)))
    else:
        c = 0.0
        viol = float(max(0.0, np.max(y / y0 - 1)))
    return EnvelopeCheck(c, viol, eta0, m0cap, c > 0 and viol <= tol)


# -- heat semigroup and asymptotics -------------------------------------------

def heat_semigroup(u0: Field, t: float) -> Field:
    """Continuum heat flow of a radial profile, by quadrature of the radial kernel.

    (G_t * u)(r) = int K_t(r, s) u(s) dx(s) with the angular average of the
    Gaussian expressed through the modified Bessel function I_{(n-2)/2}.
    """
    if not t > 0:
        raise ValueError("t must be positive")
    g = u0.grid
    n, r = g.dim, g.nodes
    nu = (n - 2) / 2
    rr, ss = np.meshgrid(r, r, indexing="ij")
    z = rr * ss / (2 * t)
    with np.errstate(invalid="ignore", divide="ignore"):
        ang = np.where(z > 0, ive(nu, z) / np.where(z > 0, z, 1.0) ** nu, 0.0)
    ang = np.where(z > 0, ang, 1.0 / (2**nu * gamma_fn(nu + 1)))
    ang *= gamma_fn(n / 2) * 2**nu
    kern = (4 * math.pi * t) ** (-n / 2) * np.exp(-((rr - ss) ** 2) / (4 * t)) * ang
    vals = kern @ (g.weights * u0.values)
    vals[-1] = 0.0
    return Field(g, np.clip(vals, 0.0, None))


def asymptotic_rate(dim: int, p: float, r: float) -> float:
    return -(dim * r / (2 * p) - 1)


def default_asymptotic_params(dim: int) -> tuple[float, float]:
    """p = n and r at the midpoint of (2p/n, 2p/n + 1)."""
    p = float(dim)
    lo = 2 * p / dim
    return p, lo + 0.5


def check_asymptotic_params(dim: int, p: float, r: float) -> None:
    q = 2 * p / dim
    if not 1 < q < r < q + 1:
        raise ValueError(f"need 1 < 2p/n < r < 2p/n + 1; got 2p/n = {q}, r = {r}")
    if not dim * r / (2 * p) > 1:
        raise ValueError("need nr/(2p) > 1")


@dataclass(frozen=True)
class AsymptoticsReport:
    p: float
    r: float
    predicted_rate: float
    times: tuple
    difference: tuple
    min_difference: float
    exact_match: bool
    fit: DecayFit | None
    tol: float
    passed: bool

    def to_json(self) -> dict:
        return {"p": self.p, "r": self.r, "predicted_rate": self.predicted_rate,
                "min_difference": self.min_difference, "exact_match": self.exact_match,
                "fit": None if self.fit is None else self.fit.to_json(),
                "tol": self.tol, "passed": self.passed}


def heat_asymptotics(rec: RunRecord, heat_rec: RunRecord, p: float, r: float,
                     window=(10.0, 100.0), tol: float = 0.1) -> AsymptoticsReport:
    """Sup-distance between the damped run and the heat-only run at shared snapshots.

    The fitted slope must not exceed the predicted rate -(nr/(2p) - 1) by more
    than ``tol``.  The signed difference is reported so the ordering of the two
    solutions can be checked too.
    """
    if rec.final is None:
        raise ValueError("record carries no field data")
    dim = rec.final.grid.dim
    check_asymptotic_params(dim, p, r)
    if not rec.snapshots or not heat_rec.snapshots:
        raise ValueError("both records need field snapshots at matched times")
    if set(rec.snapshots) != set(heat_rec.snapshots):
        raise ValueError("snapshot times of the two records differ")
    ts = sorted(t for t in rec.snapshots if t > 0)
    diff, lows = [], []
    for t in ts:
        a, b = rec.snapshots[t], heat_rec.snapshots[t]
        if a.grid != b.grid:
            raise ValueError("records were computed on different grids")
        d = a.values - b.values
        diff.append(float(np.max(np.abs(d))))
        lows.append(float(d.min()))
    diff = np.array(diff)
    pred = asymptotic_rate(dim, p, r)
    lo = float(min(lows)) if lows else 0.0
    if np.all(diff == 0):
        return AsymptoticsReport(p, r, pred, tuple(ts), tuple(diff), lo, True, None, tol, True)
    fit = loglog_fit(ts, diff, window, math.inf, pred)
    ok = fit.slope <= pred + tol
    return AsymptoticsReport(p, r, pred, tuple(ts), tuple(diff), lo, False, fit, tol, ok)


# -- contractivity ------------------------------------------------------------

@dataclass(frozen=True)
class ContractivityReport:
    applicable: bool
    early: DecayFit | None
    late: DecayFit | None
    hyper: DecayFit | None
    early_bound: float
    late_bound: float
    early_ok: bool | None
    late_ok: bool | None
    hyper_ok: bool | None
    informational: bool
    note: str = ""

    def to_json(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("early", "late", "hyper")}
        for name in ("early", "late", "hyper"):
            fit = getattr(self, name)
            d[name] = None if fit is None else fit.to_json()
        return d


def contractivity_report(rec: RunRecord, singular: bool = True, early=(0.1, 1.0),
                         late=(1.0, None), tol: float = 0.3, hyper_k: float = 3.0,
                         hyper_tol: float = 0.15) -> ContractivityReport:
    """Sup-norm slopes on an early window inside (0, 1] and a late window in (1, t_end].

    Bounds: early slope >= -alpha/(alpha-1) + n/2 - tol, late slope
    <= -alpha/(alpha-1) + tol.  The L^k fit on the late window is compared
    with -(k-1)/(k(alpha-1)) to relative tolerance ``hyper_tol``.
    """
    a = rec.config.alpha
    dim = rec.final.grid.dim if rec.final is not None else 3
    eb = -a / (a - 1) + dim / 2
    lb = -a / (a - 1)
    informational = dim != 3
    if not singular:
        return ContractivityReport(False, None, None, None, eb, lb, None, None, None,
                                   informational, "not applicable: bounded initial data")
    if not early[1] <= 1.0:
        raise ValueError("early window must lie in (0, 1]")
    t_hi = rec.times[-1] if late[1] is None else late[1]
    e = loglog_fit(rec.times, rec.sup_series, early, math.inf, eb)
    lt = loglog_fit(rec.times, rec.sup_series, (late[0], t_hi), math.inf, lb)
    hyper = None
    hyper_ok = None
    if float(hyper_k) in rec.lk_norms:
        hyper = fit_decay(rec, hyper_k, (late[0], t_hi))
        hyper_ok = hyper.within(hyper_tol)
    return ContractivityReport(True, e, lt, hyper, eb, lb, e.slope >= eb - tol,
                               lt.slope <= lb + tol, hyper_ok, informational)


# -- blow-up ------------------------------------------------------------------

@dataclass(frozen=True)
class BlowupSummary:
    t_star: float
    sup_at_detect: float
    refined_t_star: float | None
    drift: float | None
    tol: float

    @property
    def passed(self) -> bool:
        return math.isfinite(self.t_star) and (self.drift is None or self.drift <= self.tol)

    def to_json(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def blowup_summary(rec: RunRecord, refined: RunRecord | None = None,
                   tol: float = 0.2) -> BlowupSummary:
    """Detection time, sup at detection, and relative drift against a refined run."""
    if rec.outcome != "blowup":
        raise ValueError(f"run did not blow up (outcome {rec.outcome!r})")
    t_ref, drift = None, None
    if refined is not None:
        if refined.outcome != "blowup":
            raise ValueError(f"refined run did not blow up (outcome {refined.outcome!r})")
        t_ref = float(refined.t_star)
        drift = abs(t_ref - rec.t_star) / t_ref
    return BlowupSummary(float(rec.t_star), float(rec.sup_series[-1]), t_ref, drift, tol)


# -- emission -----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if hasattr(obj, "to_json"):
        return _jsonable(obj.to_json())
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else repr(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_report_json(report: dict, path) -> Path:
    path = Path(path)
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


def format_report_text(report: dict) -> str:
    """Aligned two-column text rendering of a flat-or-nested report."""
    flat = {}

    def walk(prefix, obj):
        if isinstance(obj, dict):
            for k in sorted(obj):
                walk(f"{prefix}.{k}" if prefix else str(k), obj[k])
        else:
            flat[prefix] = obj

    walk("", _jsonable(report))
    width = max((len(k) for k in flat), default=0)
    lines = []
    for k, v in flat.items():
        if isinstance(v, float):
            v = f"{v:.6g}"
        elif isinstance(v, list):
            v = f"[{len(v)} values]"
        lines.append(f"{k.ljust(width)}  {v}")
    return "\n".join(lines) + "\n"


def write_loglog(path, times, values, header: str = "t value") -> Path:
    """Two-column plot data; non-positive entries are dropped."""
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    keep = (t > 0) & (y > 0)
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"# {header}\n")
        for a, b in zip(t[keep], y[keep]):
            fh.write(f"{float(a)!r} {float(b)!r}\n")
    return path
