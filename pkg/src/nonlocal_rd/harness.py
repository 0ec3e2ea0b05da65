"""Run orchestration: execute a scenario, write artifacts, sweep a parameter."""
from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
import math
import os
import tempfile
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (blowup_summary, contractivity_report, default_asymptotic_params,
                       fit_decay, format_report_text, heat_asymptotics, l2_decay_envelope,
                       write_loglog, write_report_json)
from .config import SWEEP_AXES, Resolved, Scenario, ScenarioError, resolve
from .evolution import (CSV_COLUMNS, RunRecord, heat_only_run, mass_gap_identity,
                        mass_ode_residual, read_record_csv, record_columns, run,
                        write_record_csv)
from .field import write_snapshot

EXIT_OK, EXIT_ERROR, EXIT_BLOWUP, EXIT_CONTRACT = 0, 1, 2, 3
STATUS_NAMES = {EXIT_OK: "ok", EXIT_ERROR: "error", EXIT_BLOWUP: "blowup-as-expected",
                EXIT_CONTRACT: "contract-violation"}
REPORT_SCHEMA = 1
# relative mass loss through the Dirichlet boundary tolerated for contained runs
MASS_FLUX_TOL = 1e-6


@dataclass
class RunManifest:
    scenario: dict
    version: str
    started: str
    finished: str
    outcome: str
    status: int
    files: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    csv_columns: list = field(default_factory=list)
    report_schema: int = REPORT_SCHEMA
    directory: str = ""
    error: str = ""

    @property
    def status_name(self) -> str:
        return STATUS_NAMES[self.status]

    def to_json(self) -> dict:
        d = dict(self.__dict__)
        d["status_name"] = self.status_name
        return d


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def _atomic_write(path: Path, text: str) -> None:
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=".tmp-", suffix=path.suffix)
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _contract(report: dict, violations: list, name: str, ok: bool, **details) -> None:
    report.setdefault("contracts", {})[name] = {"passed": bool(ok), **details}
    if not ok:
        violations.append(name)


def _refined(res: Resolved) -> Scenario:
    s = res.scenario
    f = s.refine_factor
    solver = dict(s.solver)
    solver["dt_max"] = res.config.dt_max / f
    solver["dt_init"] = min(res.config.dt_init, solver["dt_max"])
    return replace(s, count=(s.count - 1) * f + 1, solver=solver, cstar=res.cstar)


def analyse(res: Resolved, rec: RunRecord, out: Path, written: list) -> tuple[dict, list]:
    """Run the scenario's analyses; returns (report, violated contract names)."""
    s, cfg = res.scenario, res.config
    report = {"outcome": rec.outcome, "t_star": rec.t_star, "steps": rec.steps,
              "m0": rec.m0, "m_cap": res.m_cap, "eps_ts": rec.eps_ts,
              "sup_max": float(rec.sup_series.max())}
    if res.cstar is not None:
        report["cstar"] = res.cstar
        report["m0_crit"] = res.m0_crit
        report["eta0"] = res.m0_crit - res.m_cap
    violations: list = []
    blew = rec.outcome == "blowup"
    # decay claims are made only below the threshold (eta0 > 0)
    below = res.m0_crit is None or res.m0_crit > res.m_cap
    if s.expect == "global":
        _contract(report, violations, "global_existence", rec.outcome == "completed",
                  outcome=rec.outcome)
    else:
        _contract(report, violations, "blowup_expected", blew, outcome=rec.outcome)

    for a in s.analyses:
        if a == "decay" and not blew:
            fit = fit_decay(rec, s.decay_k, s.fit_window)
            report["decay"] = fit
            if below:
                _contract(report, violations, "decay_exponent", fit.within(s.decay_tol),
                          slope=fit.slope, predicted=fit.predicted_slope, rel_tol=s.decay_tol)
            sel = rec.times > 0
            written.append(write_loglog(out / f"decay_L{s.decay_k:g}.dat", rec.times[sel],
                                        rec.norm(s.decay_k)[sel], f"t L{s.decay_k:g}"))
        elif a == "mass_ode":
            v = mass_ode_residual(rec)
            report["mass_ode_residual"] = v
            _contract(report, violations, "mass_ode_residual", v <= rec.eps_ts, value=v, tol=rec.eps_ts)
        elif a == "mass_gap":
            v = mass_gap_identity(rec)
            report["mass_gap_identity"] = v
            _contract(report, violations, "mass_gap_identity", v <= rec.eps_ts, value=v, tol=rec.eps_ts)
        elif a == "mass_bounds" and cfg.damping:
            m = rec.mass_series
            # only boundary flux at R can lower the discrete mass
            drawdown = float(np.max(np.maximum.accumulate(m) - m))
            capped = bool(m.max() <= cfg.m_cap * (1 + rec.eps_ts))
            _contract(report, violations, "mass_monotone_bounded",
                      drawdown <= MASS_FLUX_TOL * cfg.m_cap and capped,
                      m_first=float(m[0]), m_last=float(m[-1]), m_max=float(m.max()),
                      drawdown=drawdown)
        elif a == "envelope" and not blew:
            if res.m0_crit is None:
                raise ScenarioError("'envelope' needs C* (threshold-relative M0 or explicit cstar)")
            if not below:
                report["l2_envelope"] = "not applicable: M0 at or above the threshold"
                continue
            env = l2_decay_envelope(rec, res.m0_crit - res.m_cap, res.m_cap)
            report["l2_envelope"] = env.__dict__
            _contract(report, violations, "l2_envelope", env.passed, constant=env.constant,
                      violation=env.violation)
        elif a == "bounded" and not blew:
            t = rec.times
            early = float(rec.sup_series[t <= 10.0].max())
            whole = float(rec.sup_series.max())
            _contract(report, violations, "uniform_bound", whole <= s.bound_ratio * early,
                      max_t_le_10=early, max_all=whole, ratio=s.bound_ratio)
        elif a == "asymptotics" and not blew:
            p, r = (s.p, s.r) if s.p is not None else default_asymptotic_params(s.dim)
            steps = rec.step_times[1:]
            heat = heat_only_run(res.u0, cfg, schedule=steps)
            rep = heat_asymptotics(rec, heat, p, r, s.fit_window, s.asymptotic_tol)
            report["asymptotics"] = rep
            _contract(report, violations, "heat_asymptotics", rep.passed,
                      slope=None if rep.fit is None else rep.fit.slope,
                      bound=rep.predicted_rate + rep.tol)
            scale = float(rec.sup_series.max())
            _contract(report, violations, "heat_domination", rep.min_difference >= -1e-12 * scale,
                      min_difference=rep.min_difference)
            written.append(write_loglog(out / "heat_difference.dat", rep.times, rep.difference,
                                        "t sup|u-heat|"))
        elif a == "contractivity" and not blew:
            rep = contractivity_report(rec, singular=s.initial_kind == "singular",
                                       early=s.early_window, late=s.late_window,
                                       tol=s.contract_tol, hyper_k=s.hyper_k,
                                       hyper_tol=s.hyper_tol)
            report["contractivity"] = rep
            if rep.applicable:
                if not rep.informational:
                    _contract(report, violations, "ultracontractive_early", rep.early_ok,
                              slope=rep.early.slope, bound=rep.early_bound - s.contract_tol)
                    _contract(report, violations, "ultracontractive_late", rep.late_ok,
                              slope=rep.late.slope, bound=rep.late_bound + s.contract_tol)
                if rep.hyper is not None:
                    _contract(report, violations, "hypercontractive_lk", rep.hyper_ok,
                              slope=rep.hyper.slope, predicted=rep.hyper.predicted_slope)
            sel = rec.times > 0
            written.append(write_loglog(out / "sup.dat", rec.times[sel], rec.sup_series[sel], "t sup"))
        elif a == "lk_finite":
            sel = rec.times > 0
            ok = all(bool(np.all(np.isfinite(rec.norm(k)[sel]))) for k in cfg.lk)
            _contract(report, violations, "lk_finite", ok, norms=list(cfg.lk))
        elif a == "blowup" and blew:
            refined = None
            if s.refine:
                rres = resolve(_refined(res))
                refined = run(rres.u0, rres.config)
                if refined.outcome != "blowup":
                    _contract(report, violations, "blowup_refinement", False,
                              refined_outcome=refined.outcome)
                    continue
            summ = blowup_summary(rec, refined)
            report["blowup"] = summ
            _contract(report, violations, "blowup_refinement", summ.passed,
                      t_star=summ.t_star, refined_t_star=summ.refined_t_star, drift=summ.drift)
    return report, violations


def execute(s: Scenario, out=None) -> RunManifest:
    """Run one scenario into ``out/<name>`` and return its manifest.

    Never raises for run-time failures; those become status ``error``.
    """
    started = _now()
    base = Path(out if out is not None else s.directory)
    target = base / s.name
    written: list[Path] = []
    manifest = RunManifest(scenario=s.to_dict(), version=__version__, started=started,
                           finished="", outcome="error", status=EXIT_ERROR,
                           csv_columns=list(CSV_COLUMNS), directory=str(target))
    try:
        target.mkdir(parents=True, exist_ok=True)
        res = resolve(s)
        manifest.scenario["resolved"] = {"m_cap": res.m_cap, "cstar": res.cstar,
                                         "m0_crit": res.m0_crit, "alpha": res.config.alpha}
        rec = run(res.u0, res.config)
        manifest.outcome = rec.outcome
        manifest.csv_columns = record_columns(rec)
        written.append(write_record_csv(rec, target / "record.csv"))
        snapdir = target / "snapshots"
        if rec.snapshots or rec.final is not None:
            snapdir.mkdir(exist_ok=True)
        for t in sorted(rec.snapshots):
            written.append(write_snapshot(snapdir / f"u_t{t:.6g}.dat", rec.snapshots[t], t))
        written.append(write_snapshot(snapdir / "u_final.dat", rec.final, float(rec.times[-1])))
        if s.analyses:
            report, violations = analyse(res, rec, target, written)
            written.append(write_report_json(report, target / "analysis.json"))
            txt = target / "analysis.txt"
            txt.write_text(format_report_text(report))
            written.append(txt)
        else:
            violations = []
            if s.expect == "blowup" and rec.outcome != "blowup":
                violations.append("blowup_expected")
            if s.expect == "global" and rec.outcome != "completed":
                violations.append("global_existence")
        manifest.violations = violations
        if violations:
            manifest.status = EXIT_CONTRACT
        elif rec.outcome == "blowup":
            manifest.status = EXIT_BLOWUP
        else:
            manifest.status = EXIT_OK
    except Exception as e:  # recorded in the manifest, reported via exit status
        manifest.status = EXIT_ERROR
        manifest.error = f"{type(e).__name__}: {e}"
        manifest.scenario.setdefault("traceback", traceback.format_exc(limit=5))
    manifest.finished = _now()
    manifest.files = [{"path": str(p.relative_to(target)), "sha256": sha256_file(p),
                       "bytes": p.stat().st_size} for p in written if p.exists()]
    if target.exists():
        _atomic_write(target / "manifest.json",
                      json.dumps(manifest.to_json(), indent=2, sort_keys=True, default=str) + "\n")
    return manifest


# -- sweeps -------------------------------------------------------------------

SUMMARY_COLUMNS = ("value", "status", "outcome", "t_star", "sup_max", "m_final",
                   "decay_slope", "violations", "error")


def _point_name(s: Scenario, axis: str, value) -> str:
    return f"{s.name}_{axis}={str(value).replace('*', 'x')}"


def _sweep_point(args):
    base, axis, value, out = args
    try:
        s = base.with_value(axis, value)
        s = replace(s, name=_point_name(base, axis, value))
    except Exception as e:
        return value, None, f"{type(e).__name__}: {e}"
    m = execute(s, out)
    return value, m, m.error


def _summary_row(value, m: RunManifest | None, err: str) -> dict:
    row = {c: "" for c in SUMMARY_COLUMNS}
    row["value"] = str(value)
    if m is None:
        row.update(status=STATUS_NAMES[EXIT_ERROR], outcome="error", error=err)
        return row
    row.update(status=m.status_name, outcome=m.outcome, error=m.error,
               violations=";".join(m.violations))
    rpath = Path(m.directory) / "analysis.json"
    cpath = Path(m.directory) / "record.csv"
    if cpath.exists():
        data = read_record_csv(cpath)
        row["sup_max"] = repr(float(np.max(data["sup"])))
        row["m_final"] = repr(float(data["m"][-1]))
    if rpath.exists():
        rep = json.loads(rpath.read_text())
        if rep.get("t_star") is not None:
            row["t_star"] = repr(rep["t_star"])
        if "decay" in rep:
            row["decay_slope"] = repr(rep["decay"]["slope"])
    return row


def sweep(base: Scenario, axis: str, values, out=None, workers: int = 1) -> tuple[list, Path]:
    """Execute one scenario per value; returns (manifests, summary CSV path).

    Failures are isolated per point and recorded in the summary.
    """
    if axis not in SWEEP_AXES:
        raise ScenarioError(f"sweep axis must be one of {sorted(SWEEP_AXES)}, got {axis!r}")
    values = list(values)
    for v in values:
        if axis != "m_cap" and not math.isfinite(float(v)):
            raise ScenarioError(f"sweep values must be finite, got {v!r}")
    outdir = Path(out if out is not None else base.directory)
    outdir.mkdir(parents=True, exist_ok=True)
    jobs = [(base, axis, v, outdir) for v in values]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_point, jobs))
    else:
        results = [_sweep_point(j) for j in jobs]
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=SUMMARY_COLUMNS, lineterminator="\n")
    w.writeheader()
    for value, m, err in results:
        w.writerow(_summary_row(value, m, err))
    path = outdir / f"{base.name}_sweep_{axis}.csv"
    path.write_text(buf.getvalue())
    return [m for _, m, _ in results], path
