"""Estimate C* and the critical mass for several dimensions, with a refinement column.

    python3 scripts/cstar_estimate.py --dims 3 4 5 --radius 2.5 --counts 257 513 1025
"""
import argparse
import time

from nonlocal_rd.gns_optimizer import estimate_cstar
from nonlocal_rd.radial_grid import build_grid


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--dims", type=int, nargs="+", default=[3, 4, 5])
    p.add_argument("--radius", type=float, default=2.5)
    p.add_argument("--counts", type=int, nargs="+", default=[257, 513, 1025])
    args = p.parse_args()

    print(f"{'n':>2} {'N':>6} {'C*':>12} {'1/S_n':>10} {'m0_crit':>9} {'iters':>6} {'drift':>9} {'sec':>6}")
    for n in args.dims:
        prev = None
        for count in args.counts:
            t0 = time.perf_counter()
            est = estimate_cstar(build_grid(n, args.radius, count))
            drift = "" if prev is None else f"{abs(est.cstar - prev) / est.cstar:.2e}"
            print(f"{n:>2} {count:>6} {est.cstar:>12.8f} {est.upper_bound:>10.6f} "
                  f"{est.m0_crit:>9.5f} {est.iterations:>6} {drift:>9} {time.perf_counter() - t0:>6.2f}")
            prev = est.cstar


if __name__ == "__main__":
    main()
