"""Feasible-population grid over state size and maintenance period.

Prints the largest population each (strategy, rho, nu) cell can carry under
its downtime budget, and optionally dumps the per-population rows to CSV.
Cells without calibration coverage print "-".

    python3 scripts/run_feasibility_grid.py --rhos 1,10,100 --max 70
"""

import argparse
import contextlib
import csv
import io
import sys

from ricplan import (
    SweepSpec,
    XAppClass,
    default_calibration,
    feasibility_sweep,
)
from ricplan.cli import CSV_HEADER, _cell
from ricplan.model import ScenarioParams

CLASS_DEFS = {"A": (100.0, 1.0), "B": (100.0, 0.1),
              "C": (100e3, 1.0), "D": (100e3, 0.1)}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--strategies", default="sdl,sm-mr,sm-md")
    ap.add_argument("--rhos", default="1,10,100",
                    help="state sizes to try, MB")
    ap.add_argument("--nus", default="1", help="maintenance periods, s")
    ap.add_argument("--max", type=int, default=70,
                    help="largest population to probe")
    ap.add_argument("--dominant", default="A", choices=sorted(CLASS_DEFS))
    ap.add_argument("--out", help="also write per-population rows as CSV")
    args = ap.parse_args(argv)

    spec = SweepSpec(
        classes=tuple(XAppClass(id=c, msg_size=s, msg_period=p)
                      for c, (s, p) in CLASS_DEFS.items()),
        dominant_class=args.dominant,
        count_range=tuple(range(0, args.max + 1)),
        rho_list_mb=tuple(float(v) for v in args.rhos.split(",")),
        nu_list_s=tuple(float(v) for v in args.nus.split(",")),
        strategies=tuple(args.strategies.split(",")),
    )
    params = ScenarioParams(state_size=spec.rho_list_mb[0] * 1e6,
                            strategy=spec.strategies[0],
                            maintenance_period=spec.nu_list_s[0],
                            slot_length=3600.0, max_sm_downtime=300.0,
                            max_defrag_downtime=1.0)
    # the sweep notes every uncovered row; one line per cell is enough here
    notes = io.StringIO()
    with contextlib.redirect_stderr(notes):
        rows, summary = feasibility_sweep(spec, params, default_calibration())
    for line in dict.fromkeys(notes.getvalue().splitlines()):
        print(line, file=sys.stderr)

    print(f"{'strategy':8} {'rho_mb':>7} {'nu_s':>6} {'max_feasible':>12}")
    for (strategy, rho, nu), best in sorted(summary.items()):
        cell = "-" if best is None else str(best)
        print(f"{strategy:8} {rho:7g} {nu:6g} {cell:>12}")

    if args.out:
        with open(args.out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            for row in rows:
                writer.writerow([_cell(row[k]) for k in CSV_HEADER])
        print(f"wrote {len(rows)} rows to {args.out}", file=sys.stderr)


if __name__ == "__main__":
    main()
