"""Grid and time-step refinement of the critical run and its undamped control.

For each N the damped run reports the fitted L^2 slope and both mass-law
residuals; the undamped run reports its detection time t*.  dt_max is scaled
with h so both discretisations refine together.

    python3 scripts/refinement_study.py --counts 128 256 512 1024
"""
import argparse

from nonlocal_rd.analysis import fit_decay
from nonlocal_rd.evolution import SolverConfig, mass_gap_identity, mass_ode_residual, run
from nonlocal_rd.field import make_initial
from nonlocal_rd.gns_optimizer import critical_mass, estimate_cstar
from nonlocal_rd.radial_grid import build_grid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--counts", type=int, nargs="+", default=[128, 256, 512, 1024])
    p.add_argument("--radius", type=float, default=80.0)
    p.add_argument("--fraction", type=float, default=0.5, help="M0 as a fraction of m0_crit")
    p.add_argument("--dt-max", type=float, default=0.05, help="dt_max at the first count")
    args = p.parse_args()

    m_cap = args.fraction * critical_mass(estimate_cstar(build_grid(3, 2.5, 513)))
    print(f"M0 = {m_cap:.6f}")
    print(f"{'N':>6} {'dt_max':>9} {'L2 slope':>10} {'mass ODE':>10} {'mass gap':>10} {'t* (off)':>10}")
    for count in args.counts:
        dt = args.dt_max * (args.counts[0] - 1) / (count - 1)
        u0 = make_initial(build_grid(3, args.radius, count), "gaussian", mass=0.8 * m_cap, sigma=1.0)
        on = run(u0, SolverConfig(m_cap=m_cap, alpha=5 / 3, t_end=100.0, dt_max=dt))
        off = run(u0, SolverConfig(m_cap=m_cap, alpha=5 / 3, t_end=100.0, dt_max=dt, damping=False))
        t_star = f"{off.t_star:.4f}" if off.outcome == "blowup" else "none"
        print(f"{count:>6} {dt:>9.5f} {fit_decay(on, 2.0).slope:>10.5f} "
              f"{mass_ode_residual(on):>10.3e} {mass_gap_identity(on):>10.3e} {t_star:>10}")


if __name__ == "__main__":
    main()
