import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import PchipInterpolator

from nonlocal_rd.analysis import heat_semigroup
from nonlocal_rd.evolution import (SolverConfig, heat_only_run, mass_gap_identity,
                                   mass_ode_residual, read_checkpoint, read_record_csv,
                                   record_to_csv, run, step, write_checkpoint, write_record_csv)
from nonlocal_rd.field import Field, make_initial, mass
from nonlocal_rd.radial_grid import build_grid

ALPHA = 5 / 3
M0 = 4.8  # below the critical mass (about 9.62) for n = 3
G = build_grid(3, 40.0, 256)


def data(grid=G, m=0.8 * M0, sigma=1.0):
    return make_initial(grid, "gaussian", mass=m, sigma=sigma)


def cfg(**kw):
    base = dict(m_cap=M0, alpha=ALPHA, t_end=5.0, dt_max=0.05)
    base.update(kw)
    return SolverConfig(**base)


# -- config and preconditions --------------------------------------------------

@pytest.mark.parametrize("kw", [dict(m_cap=0.0), dict(alpha=1.0), dict(dt_init=1.0, dt_max=0.5),
                                dict(dt_min=0.0), dict(safety=0.0), dict(safety=1.5),
                                dict(t_end=-1.0), dict(record_every=0)])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        cfg(**kw)


def test_run_requires_mass_below_cap():
    with pytest.raises(ValueError, match="m0 < M0"):
        run(data(m=M0), cfg())
    run(data(m=M0), cfg(damping=False, t_end=0.01))  # no assumption without damping


def test_run_requires_blowup_ceiling_above_initial_sup():
    with pytest.raises(ValueError):
        run(data(), cfg(blowup_sup=1e-6))


# -- single steps -------------------------------------------------------------

def test_step_fixes_zero():
    z = Field.zeros(G)
    assert not step(z, cfg(), 0.1).values.any()
    with pytest.raises(ValueError):
        step(z, cfg(), 0.0)


def test_step_at_capacity_is_heat_step():
    u = make_initial(G, "bump", height=1.0, width=3.0)
    c = cfg(m_cap=mass(u))
    new = step(u, c, 0.05)
    heat = G.laplacian.solve_implicit(u.values, 0.05)
    np.testing.assert_array_equal(new.values, heat)
    assert abs(mass(new) - mass(u)) < 1e-8


def test_undamped_step_exceeds_heat_step():
    u = data()
    c = cfg(damping=False)
    heat = G.laplacian.solve_implicit(u.values, 1e-3)
    assert step(u, c, 1e-3).values.max() > heat.max()


@settings(max_examples=40, deadline=None)
@given(amps=st.lists(st.floats(0.0, 0.3), min_size=1, max_size=4),
       widths=st.lists(st.floats(0.3, 3.0), min_size=4, max_size=4),
       dt=st.floats(1e-4, 1.0), damping=st.booleans())
def test_step_preserves_non_negativity(amps, widths, dt, damping):
    r = G.nodes
    u = sum(a * np.clip(1 - (r / w) ** 2, 0, None) ** 2 for a, w in zip(amps, widths))
    f = Field(G, u)
    if damping and mass(f) >= M0:
        return
    new = step(f, cfg(damping=damping), dt)
    assert np.all(new.values >= 0) and new.values[-1] == 0


# -- whole runs ---------------------------------------------------------------

def test_zero_run():
    rec = run(Field.zeros(G), cfg(t_end=1.0))
    assert rec.outcome == "completed"
    for s in (rec.mass_series, rec.sup_series, rec.reaction_integral, rec.norm(2.0)):
        assert not np.any(s)
    assert mass_ode_residual(rec) == 0.0
    assert mass_gap_identity(rec) == 0.0


def test_times_strictly_increasing_and_land_on_targets():
    rec = run(data(), cfg(snapshot_times=(0.5, 1.7), record_every=3))
    assert np.all(np.diff(rec.times) > 0)
    assert rec.times[-1] == 5.0
    assert set(rec.snapshots) == {0.5, 1.7}
    assert np.all(np.isfinite(rec.norm(2.0)))


def test_undamped_blows_up_damped_does_not():
    u0 = data(m=0.8 * M0)
    bad = run(u0, cfg(damping=False, t_end=50.0))
    assert bad.outcome == "blowup" and 0 < bad.t_star < 50
    good = run(u0, cfg(t_end=50.0))
    assert good.outcome == "completed"
    assert good.sup_series.max() == good.sup_series[0]


def test_tiny_dt_min_trigger():
    # a huge reaction forces the stiffness limit below dt_min before sup reaches the ceiling
    rec = run(data(m=1.0), cfg(m_cap=1e6, damping=False, dt_min=1e-6, dt_init=1e-6, blowup_sup=1e30))
    assert rec.outcome == "blowup" and rec.t_star is not None


def test_mass_monotone_and_capped():
    rec = run(data(), cfg(t_end=30.0))
    m = rec.mass_series
    assert np.all(np.diff(m) >= 0)
    assert m[-1] <= M0 + rec.eps_ts
    assert m[0] == pytest.approx(0.8 * M0, rel=1e-6)


def test_mass_gap_strictly_decreasing():
    rec = run(data(), cfg(t_end=10.0))
    gap = M0 - rec.mass_series
    assert np.all(np.diff(gap) < 0)


def test_mass_law_residuals_within_tolerance():
    rec = run(data(), cfg(t_end=10.0))
    assert mass_ode_residual(rec) <= rec.eps_ts
    assert mass_gap_identity(rec) <= rec.eps_ts


def test_mass_law_residuals_first_order_in_dt():
    coarse = run(data(), cfg(t_end=10.0, dt_max=0.04))
    fine = run(data(), cfg(t_end=10.0, dt_max=0.02))
    assert mass_ode_residual(coarse) / mass_ode_residual(fine) > 1.8
    assert mass_gap_identity(coarse) / mass_gap_identity(fine) > 1.8


def test_mass_diagnostics_need_damped_records():
    heat = heat_only_run(data(), cfg(t_end=1.0))
    with pytest.raises(ValueError):
        mass_ode_residual(heat)
    short = run(data(), cfg(t_end=1e-3, dt_init=1e-3, dt_max=1e-3))
    with pytest.raises(ValueError):
        mass_ode_residual(short)


def test_determinism_bit_identical():
    a = run(data(), cfg(t_end=5.0, lk=(2.0, 3.0)))
    b = run(data(), cfg(t_end=5.0, lk=(2.0, 3.0)))
    assert record_to_csv(a) == record_to_csv(b)
    np.testing.assert_array_equal(a.final.values, b.final.values)


# -- comparison with the heat flow --------------------------------------------

def test_heat_run_tracks_exact_gaussian():
    g = build_grid(3, 30.0, 401)
    u0 = make_initial(g, "gaussian", mass=2.0, sigma=0.5)
    rec = heat_only_run(u0, cfg(t_end=2.0, dt_max=0.005, dt_init=0.005))
    exact = 2.0 * (4 * math.pi * 2.5) ** -1.5
    assert rec.sup_series[-1] == pytest.approx(exact, rel=rec.eps_ts)
    assert abs(mass(rec.final) - 2.0) / 2.0 < 1e-6
    ref = heat_semigroup(u0, 2.0)
    assert np.max(np.abs(rec.final.values - ref.values)) <= rec.eps_ts * exact


def test_heat_semigroup_facts():
    u0 = make_initial(G, "bump", height=2.0, width=2.0)
    rec = heat_only_run(u0, cfg(t_end=3.0, lk=(2.0,)))
    m0 = mass(u0)
    assert np.max(np.abs(rec.mass_series - m0)) / m0 < 1e-6
    for series in (rec.mass_series, rec.norm(2.0), rec.sup_series):
        assert np.all(np.diff(series) <= 1e-14 * series[0])
    t = rec.times[1:]
    assert np.all(rec.sup_series[1:] <= (4 * math.pi * t) ** -1.5 * m0)


def _schedule(n, dt):
    return np.arange(1, n + 1) * dt


def test_subsolution_and_supersolution_domination():
    u0 = data(m=0.8 * M0)
    sched = _schedule(400, 0.01)
    damped = run(u0, cfg(t_end=4.0, snapshot_times=tuple(sched[::40])), schedule=sched)
    heat = heat_only_run(u0, cfg(t_end=4.0, snapshot_times=tuple(sched[::40])), schedule=sched)
    fuji = run(u0, cfg(t_end=4.0, damping=False, snapshot_times=tuple(sched[::40])), schedule=sched)
    assert fuji.outcome == "completed"
    assert damped.snapshots.keys() == heat.snapshots.keys() == fuji.snapshots.keys()
    for t in damped.snapshots:
        d, h, f = (x.snapshots[t].values for x in (damped, heat, fuji))
        tol = 1e-12 * f.max()
        assert np.all(d >= h - tol)
        assert np.all(f >= d - tol)


def test_scale_invariance_exact_for_scaled_discretisation():
    lam = 2.0
    g1 = build_grid(3, 40.0, 256)
    g2 = build_grid(3, 40.0 / lam, 256)
    u1 = data(g1)
    u2 = Field(g2, lam**3 * u1.values)
    c1 = cfg(t_end=8.0, dt_init=1e-3, dt_max=0.05)
    c2 = cfg(t_end=8.0 / lam**2, dt_init=1e-3 / lam**2, dt_max=0.05 / lam**2,
             dt_min=c1.dt_min / lam**2)
    a, b = run(u1, c1), run(u2, c2)
    assert mass(u1) == pytest.approx(mass(u2), rel=1e-12)
    np.testing.assert_allclose(b.final.values, lam**3 * a.final.values, rtol=1e-8,
                               atol=1e-12 * b.final.values.max())


def test_scale_invariance_on_common_grid():
    lam = 2.0
    g = build_grid(3, 40.0, 512)
    u0 = data(g)
    interp0 = PchipInterpolator(g.nodes, u0.values)
    u0_lam = Field(g, lam**3 * interp0(np.minimum(lam * g.nodes, g.radius)))
    T = 8.0
    a = run(u0, cfg(t_end=T, dt_max=0.01))
    b = run(u0_lam, cfg(t_end=T / lam**2, dt_max=0.01 / lam**2, dt_init=1e-3 / lam**2))
    pred = lam**3 * PchipInterpolator(g.nodes, a.final.values)(np.minimum(lam * g.nodes, g.radius))
    assert np.max(np.abs(b.final.values - pred)) <= 0.02 * pred.max()


# -- persistence --------------------------------------------------------------

def test_csv_roundtrip(tmp_path):
    rec = run(data(), cfg(t_end=1.0, lk=(2.0, 3.5)))
    p = write_record_csv(rec, tmp_path / "r.csv")
    head = p.read_text().splitlines()[0]
    assert head == "t,m,int_u_alpha,dt,sup,L2,L3.5"
    back = read_record_csv(p)
    np.testing.assert_array_equal(back["t"], rec.times)
    np.testing.assert_array_equal(back["L3.5"], rec.norm(3.5))
    np.testing.assert_array_equal(back["int_u_alpha"], rec.reaction_integral)


def test_checkpoint_roundtrip_and_resume(tmp_path):
    c = cfg(t_end=2.0)
    first = run(data(), c)
    write_checkpoint(tmp_path / "ck", first.final, 2.0, first.dt_series[-1])
    u, t, dt = read_checkpoint(tmp_path / "ck")
    np.testing.assert_array_equal(u.values, first.final.values)
    assert t == 2.0 and dt == first.dt_series[-1]
    resumed = run(u, replace(c, t_end=4.0), t_start=t, dt_start=dt)
    straight = run(data(), replace(c, t_end=4.0))
    assert resumed.times[0] == 2.0
    assert np.max(np.abs(resumed.final.values - straight.final.values)) <= 1e-3 * straight.final.values.max()
