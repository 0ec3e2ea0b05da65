"""Observational sweep of the carrying capacity across multiples of the estimated threshold.

Runs the critical-below-threshold preset with M0 in {0.5, 1, 2, 4} * m0_crit and
prints the outcome column.  Nothing is asserted: the threshold is sufficient for
global existence, and where (or whether) the outcome changes above it is open.

    python3 scripts/threshold_sweep.py --out runs/threshold --workers 1
"""
import argparse
import csv
from dataclasses import replace

from nonlocal_rd.config import preset
from nonlocal_rd.harness import sweep


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="runs/threshold")
    p.add_argument("--factors", default="0.5,1,2,4")
    p.add_argument("--t-end", type=float, default=100.0)
    p.add_argument("--workers", type=int, default=1)
    args = p.parse_args()

    base = preset("critical-below-threshold")
    base = replace(base, name="threshold", solver={**base.solver, "t_end": args.t_end},
                   analyses=("mass_ode", "mass_gap", "mass_bounds", "bounded"))
    values = [f"{f.strip()}*m0_crit" for f in args.factors.split(",") if f.strip()]
    _, path = sweep(base, "m_cap", values, args.out, args.workers)
    with open(path) as fh:
        for row in csv.DictReader(fh):
            print(f"{row['value']:>14}  {row['outcome']:>9}  sup_max={row['sup_max']:<22} "
                  f"m_final={row['m_final']:<22} {row['violations']}")
    print(f"summary: {path}")


if __name__ == "__main__":
    main()
