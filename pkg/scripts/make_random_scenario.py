"""Emit a random scenario file for the planner CLI.

Scenarios are drawn so the do-nothing baseline stays feasible: all servers
start active, per-server load is rechecked against capacity, and backend
populations are rechecked against the maintenance budget.  Seed controls
everything; the same seed always emits the same file.

    python3 scripts/make_random_scenario.py --seed 7 --out scen.json
    ricplan plan --scenario scen.json --out run/
"""

import argparse
import json
import random
import sys

from ricplan import (
    ClusterState,
    ServerSpec,
    build_problem,
    default_calibration,
    identity_plan,
    validate_plan,
)
from ricplan.model import ScenarioParams

CLASS_DEFS = {"A": (100.0, 1.0), "B": (100.0, 0.1),
              "C": (100e3, 1.0), "D": (100e3, 0.1)}


def draw(rng, args):
    chosen = sorted(rng.sample(sorted(CLASS_DEFS), args.classes))
    strategy = args.strategy or rng.choice(["sdl", "sm-mr", "sm-md"])
    rho = 1.0 if strategy == "sdl" else rng.choice([1.0, 10.0, 100.0])
    servers = [
        {"id": f"s{i + 1}", "optional": i > 0 and rng.random() < 0.8,
         "cpu_cap": rng.choice([64.0, 128.0]),
         "mem_cap": rng.choice([64.0, 125.0]),
         "disk_cap": 250.0}
        for i in range(args.servers)
    ]
    counts = {c: [0] * args.servers for c in chosen}
    for _ in range(rng.randint(0, args.total)):
        counts[rng.choice(chosen)][rng.randrange(args.servers)] += 1
    doc = {
        "classes": [{"id": c, "msg_size": CLASS_DEFS[c][0],
                     "msg_period": CLASS_DEFS[c][1]} for c in chosen],
        "servers": servers,
        "initial_counts": counts,
        "params": {"state_size": rho * 1e6, "strategy": strategy},
    }
    if args.deploys and rng.random() < 0.5:
        doc["pending_deploys"] = {chosen[0]: rng.randint(1, args.deploys)}
    return doc


def baseline_ok(doc):
    state = ClusterState(
        servers=tuple(ServerSpec(id=s["id"], optional_flag=s["optional"],
                                 cpu_cap=s["cpu_cap"], mem_cap=s["mem_cap"],
                                 disk_cap=s["disk_cap"])
                      for s in doc["servers"]),
        initial_counts={c: tuple(v) for c, v in doc["initial_counts"].items()},
        initial_active=tuple(1 for _ in doc["servers"]),
        pending_deploys=doc.get("pending_deploys", {}),
    )
    params = ScenarioParams(state_size=doc["params"]["state_size"],
                            strategy=doc["params"]["strategy"],
                            maintenance_period=1.0, slot_length=3600.0,
                            max_sm_downtime=300.0, max_defrag_downtime=1.0)
    problem = build_problem(state, params, default_calibration())
    verdict = validate_plan(problem, identity_plan(problem))
    # deploys are the planner's job; judge only the standing population
    return verdict.valid or all(v == "(14)" for v in verdict.violations)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--servers", type=int, default=3)
    ap.add_argument("--classes", type=int, default=2, choices=(1, 2, 3, 4))
    ap.add_argument("--total", type=int, default=6,
                    help="upper bound on the xApp population")
    ap.add_argument("--strategy", choices=("sdl", "sm-mr", "sm-md"))
    ap.add_argument("--deploys", type=int, default=1,
                    help="max pending deployments (0 disables)")
    ap.add_argument("--out", default="-", help="path, - for stdout")
    args = ap.parse_args(argv)

    rng = random.Random(args.seed)
    for _ in range(200):
        doc = draw(rng, args)
        if baseline_ok(doc):
            break
    else:
        print("no feasible draw in 200 tries; loosen the knobs",
              file=sys.stderr)
        return 1

    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out == "-":
        sys.stdout.write(text)
    else:
        with open(args.out, "w") as fh:
            fh.write(text)
        print(f"wrote {args.out}", file=sys.stderr)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
