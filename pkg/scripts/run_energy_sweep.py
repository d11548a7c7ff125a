"""Savings-vs-population sweep on a fixed cluster.

Reruns the consolidation loop over a grid of populations and strategies and
writes one CSV row per cell.  Defaults mirror the 4-server testbed: one
mandatory host, three optional, 90/10/10/10 workload mix.

    python3 scripts/run_energy_sweep.py --counts 4,10,40 --out sweep.csv
"""

import argparse
import csv
import sys
import time

from ricplan import (
    ServerSpec,
    SolveLimits,
    SweepSpec,
    XAppClass,
    default_calibration,
    energy_sweep,
)
from ricplan.cli import CSV_HEADER, _cell
from ricplan.model import ScenarioParams

# the four calibrated workload profiles: (msg size B, period s)
CLASS_DEFS = {"A": (100.0, 1.0), "B": (100.0, 0.1),
              "C": (100e3, 1.0), "D": (100e3, 0.1)}


def build_servers(n, cpu, mem, disk):
    return tuple(
        ServerSpec(id=f"s{i + 1}", optional_flag=(i > 0),
                   cpu_cap=cpu, mem_cap=mem, disk_cap=disk)
        for i in range(n)
    )


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--servers", type=int, default=4)
    ap.add_argument("--cpu", type=float, default=128.0)
    ap.add_argument("--mem", type=float, default=125.0)
    ap.add_argument("--disk", type=float, default=250.0)
    ap.add_argument("--counts", default="4,10,20,40",
                    help="comma-separated total populations")
    ap.add_argument("--strategies", default="sdl,sm-mr,sm-md")
    ap.add_argument("--rho", type=float, default=1.0, help="state size, MB")
    ap.add_argument("--nu", type=float, default=1.0,
                    help="maintenance period, s")
    ap.add_argument("--solver", default="bnb",
                    choices=("bnb", "bruteforce", "greedy"))
    ap.add_argument("--time-limit", type=float, default=60.0)
    ap.add_argument("--out", default="-", help="CSV path, - for stdout")
    args = ap.parse_args(argv)

    spec = SweepSpec(
        classes=tuple(XAppClass(id=c, msg_size=s, msg_period=p)
                      for c, (s, p) in CLASS_DEFS.items()),
        dominant_class="A",
        count_range=tuple(int(v) for v in args.counts.split(",")),
        rho_list_mb=(args.rho,),
        nu_list_s=(args.nu,),
        strategies=tuple(args.strategies.split(",")),
    )
    servers = build_servers(args.servers, args.cpu, args.mem, args.disk)
    params = ScenarioParams(state_size=args.rho * 1e6,
                            strategy=spec.strategies[0],
                            maintenance_period=args.nu, slot_length=3600.0,
                            max_sm_downtime=300.0, max_defrag_downtime=1.0)
    limits = SolveLimits(time_limit=args.time_limit)

    t0 = time.perf_counter()
    rows = energy_sweep(spec, servers, params, default_calibration(),
                        solver=args.solver, limits=limits)
    elapsed = time.perf_counter() - t0

    fh = sys.stdout if args.out == "-" else open(args.out, "w", newline="")
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in rows:
            writer.writerow([_cell(row[k]) for k in CSV_HEADER])
    finally:
        if fh is not sys.stdout:
            fh.close()
    print(f"{len(rows)} rows in {elapsed:.1f} s", file=sys.stderr)


if __name__ == "__main__":
    main()
