"""Command line: ``python3 -m nonlocal_rd {run,sweep,cstar,presets}``."""
from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace

from .config import PRESETS, SWEEP_AXES, ScenarioError, scenario_from_arg
from .gns_optimizer import SEED_FAMILIES, OptimizerSettings, estimate_cstar, write_estimate
from .radial_grid import build_grid
from .harness import EXIT_ERROR, EXIT_OK, STATUS_NAMES, execute, sweep


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nonlocal_rd", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="execute a scenario file or preset")
    r.add_argument("config", help="config path or preset name")
    r.add_argument("--out", help="output root (default: the scenario's directory)")
    r.add_argument("--seed-profile", choices=SEED_FAMILIES,
                   help="restrict the C* estimate to one seed family")

    s = sub.add_parser("sweep", help="run one scenario per parameter value")
    s.add_argument("config")
    s.add_argument("--axis", required=True, choices=sorted(SWEEP_AXES))
    s.add_argument("--values", required=True,
                   help="comma-separated; m_cap accepts e.g. 0.5*m0_crit")
    s.add_argument("--out")
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--seed-profile", choices=SEED_FAMILIES)

    c = sub.add_parser("cstar", help="estimate the GNS constant C* and the critical mass")
    c.add_argument("--n", type=int, required=True, dest="dim")
    c.add_argument("--radius", type=float, default=2.5)
    c.add_argument("--count", type=int, default=513)
    c.add_argument("--out", help="write cstar.json and the profile here")
    c.add_argument("--seed-profile", choices=SEED_FAMILIES)

    pr = sub.add_parser("presets", help="list shipped presets")
    pr.add_argument("--show", metavar="NAME", help="print one preset's config text")
    return p


def _load(arg, seed_profile):
    s = scenario_from_arg(arg)
    return replace(s, seed_profile=seed_profile) if seed_profile else s


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "presets":
            if args.show:
                if args.show not in PRESETS:
                    raise ScenarioError(f"unknown preset {args.show!r}")
                print(PRESETS[args.show].strip())
            else:
                for name in PRESETS:
                    print(name)
            return EXIT_OK
        if args.command == "cstar":
            seeds = SEED_FAMILIES if args.seed_profile is None else (args.seed_profile,)
            est = estimate_cstar(build_grid(args.dim, args.radius, args.count),
                                 OptimizerSettings(seeds=seeds))
            print(json.dumps(est.to_json(), indent=2, sort_keys=True))
            if args.out:
                write_estimate(est, args.out)
            return EXIT_OK
        if args.command == "run":
            m = execute(_load(args.config, args.seed_profile), args.out)
            print(f"{m.status_name}: outcome={m.outcome} dir={m.directory}")
            for v in m.violations:
                print(f"  violated: {v}")
            if m.error:
                print(f"  error: {m.error}", file=sys.stderr)
            return m.status
        if args.command == "sweep":
            values = [v.strip() for v in args.values.split(",") if v.strip()]
            manifests, path = sweep(_load(args.config, args.seed_profile), args.axis, values,
                                    args.out, args.workers)
            print(f"summary: {path}")
            for v, m in zip(values, manifests):
                print(f"  {args.axis}={v}: {STATUS_NAMES[m.status] if m else 'error'}")
            return EXIT_OK
    except (ScenarioError, ValueError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_ERROR
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
