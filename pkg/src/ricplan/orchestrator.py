"""Timeslot lifecycle around the solver: apply workload changes, pick a
plan, score it against the keep-everything-on baseline, advance the state.

Also hosts the two parameter sweeps used in the experiment scripts: a
feasibility grid (how many xApps each strategy configuration can carry) and
an energy grid (realized savings and activation ratios across populations).
"""

from __future__ import annotations

import dataclasses
import sys
import time
from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Tuple

from . import model
from .bnb import solve_bnb
from .bruteforce import solve_bruteforce
from .calibration import CalibrationLookupError, CalibrationSet
from .greedy import solve_greedy
from .model import (
    ClusterState,
    ScenarioParams,
    ServerSpec,
    StrategyId,
    XAppClass,
)
from .problem import (
    MigrationPlan,
    SolveLimits,
    SolveReport,
    annotate_plan,
    build_problem,
    plan_aggregates,
)

SOLVERS = ("bnb", "bruteforce", "greedy")


class BaselineInfeasible(RuntimeError):
    """The do-nothing baseline itself cannot host the requested workload."""


@dataclass(frozen=True)
class SlotResult:
    """Outcome of one planning slot."""

    plan: Optional[MigrationPlan]
    report: SolveReport
    baseline_energy: Optional[float]
    energy_gain: Optional[float]
    activation_ratio: Optional[float]
    next_state: ClusterState
    baseline_feasible: bool


@dataclass(frozen=True)
class SweepSpec:
    """Grid definition shared by the feasibility and energy sweeps.

    The workload mix gives `dominant_share` of the population to the
    dominant class and splits the rest evenly across the other classes,
    rounding by largest remainder so counts always sum exactly.
    """

    classes: Tuple[XAppClass, ...]
    dominant_class: str
    count_range: Tuple[int, ...]
    rho_list_mb: Tuple[float, ...]
    nu_list_s: Tuple[float, ...]
    strategies: Tuple[str, ...]
    dominant_share: float = 0.75

    def __post_init__(self):
        ids = [c.id for c in self.classes]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate xApp class ids in sweep spec")
        if self.dominant_class not in ids:
            raise ValueError(
                f"dominant class {self.dominant_class!r} not among classes"
            )
        if not 0.0 < self.dominant_share <= 1.0:
            raise ValueError("dominant_share must be in (0, 1]")
        if any(n < 0 for n in self.count_range):
            raise ValueError("count_range entries must be >= 0")
        for st in self.strategies:
            StrategyId(st)


def mix_counts(spec: SweepSpec, total: int) -> Mapping[str, int]:
    """Per-class counts for a population of `total` under the sweep mix."""
    if total < 0:
        raise ValueError("total must be >= 0")
    ids = [c.id for c in spec.classes]
    others = [i for i in ids if i != spec.dominant_class]
    # shares must sum to 1: a lone class absorbs the whole population
    share = spec.dominant_share if others else 1.0
    quota = {spec.dominant_class: share * total}
    rest = (1.0 - share) / len(others) if others else 0.0
    for i in others:
        quota[i] = rest * total
    counts = {i: int(quota[i]) for i in ids}
    short = total - sum(counts.values())
    order = sorted(ids, key=lambda i: (-(quota[i] - counts[i]), ids.index(i)))
    for i in order[:short]:
        counts[i] += 1
    return counts


def balanced_state(classes: Sequence[XAppClass],
                   servers: Sequence[ServerSpec],
                   counts: Mapping[str, int]) -> ClusterState:
    """All servers on, each class spread as evenly as indices allow."""
    n = len(servers)
    initial = {}
    for cls in classes:
        c = counts.get(cls.id, 0)
        base, extra = divmod(c, n)
        initial[cls.id] = tuple(base + (1 if s < extra else 0)
                                for s in range(n))
    return ClusterState(
        servers=tuple(servers),
        initial_counts=initial,
        initial_active=tuple(1 for _ in range(n)),
    )


def _default_drain_policy(server, hosted_total):
    # optional servers before mandatory, busiest first, ties by server id
    return (0 if server.optional_flag else 1, -hosted_total, server.id)


def apply_undeployments(state: ClusterState,
                        n_minus: Mapping[str, int] = None,
                        policy=None) -> ClusterState:
    """Remove xApps ahead of planning, most-loaded optional server first.

    Removal is unit by unit; `policy` maps (server, hosted_total) to a sort
    key and the lowest key loses the next xApp.  The default drains optional
    servers before mandatory ones, busiest first, ties by server id, which
    frees the servers a consolidation pass wants to shut down anyway.
    Returns a state with the removals folded in and no pending undeploys.
    """
    if policy is None:
        policy = _default_drain_policy
    removals = dict(n_minus) if n_minus is not None else dict(state.pending_undeploys)
    counts = {cls: list(state.initial_counts[cls]) for cls in state.classes}
    n = len(state.servers)
    for cls in state.classes:
        want = removals.get(cls, 0)
        if want < 0:
            raise ValueError(f"negative undeploy count for class {cls!r}")
        if want > sum(counts[cls]):
            raise ValueError(
                f"cannot undeploy {want} of class {cls!r}: only "
                f"{sum(counts[cls])} hosted"
            )
        for _ in range(want):
            candidates = [s for s in range(n) if counts[cls][s] > 0]
            candidates.sort(key=lambda s: policy(
                state.servers[s], sum(counts[c][s] for c in counts)))
            counts[cls][candidates[0]] -= 1
    return dataclasses.replace(
        state,
        initial_counts={cls: tuple(v) for cls, v in counts.items()},
        pending_undeploys={},
    )


def stage_deployments(state: ClusterState,
                      n_plus: Mapping[str, int]) -> ClusterState:
    """Replace (not accumulate) the pending deployment request."""
    return dataclasses.replace(state, pending_deploys=dict(n_plus))


def baseline_plan(state: ClusterState, params: ScenarioParams,
                  cal: CalibrationSet) -> MigrationPlan:
    """The do-nothing reference: every server on, nothing migrates, pending
    deployments land on the least CPU-utilized server one unit at a time.

    Raises BaselineInfeasible when even this cannot respect capacity or the
    instantiation window.
    """
    n = len(state.servers)
    classes = state.classes
    if any(state.pending_undeploys.get(c, 0) for c in classes):
        raise ValueError("apply undeployments before planning a baseline")
    hosted = {cls: list(state.initial_counts[cls]) for cls in classes}
    new = {cls: [0] * n for cls in classes}
    totals = {cls: sum(hosted[cls]) + state.pending_deploys.get(cls, 0)
              for cls in classes}
    sdl = params.strategy is StrategyId.SDL

    def cpu_util(s):
        u = model.server_resources(
            state.servers[s], True,
            {cls: hosted[cls][s] + new[cls][s] for cls in classes},
            params.strategy, cal, total_counts=totals, server_count=n,
            participates=sdl,
        ).cpu
        return u / state.servers[s].cpu_cap

    def fits(s, cls):
        trial = {c: hosted[c][s] + new[c][s] + (1 if c == cls else 0)
                 for c in classes}
        usage = model.server_resources(
            state.servers[s], True, trial, params.strategy, cal,
            total_counts=totals, server_count=n, participates=sdl,
        )
        caps = (state.servers[s].cpu_cap, state.servers[s].mem_cap,
                state.servers[s].disk_cap)
        return all(u <= c * (1 + 1e-9) for u, c in zip(usage, caps))

    for cls in classes:
        for _ in range(state.pending_deploys.get(cls, 0)):
            best, best_util = None, None
            for s in range(n):
                if not fits(s, cls):
                    continue
                new[cls][s] += 1
                util = cpu_util(s)
                new[cls][s] -= 1
                if best is None or util < best_util - 1e-12:
                    best, best_util = s, util
            if best is None:
                raise BaselineInfeasible(
                    f"no server can host another {cls!r} xApp"
                )
            new[cls][best] += 1

    for s in range(n):
        window = sum(model.instantiation_time(new[cls][s], cal)
                     for cls in classes)
        if window > params.slot_length:
            raise BaselineInfeasible(
                f"instantiation window on server {state.servers[s].id!r} "
                f"exceeds the slot"
            )

    x = {}
    for cls in classes:
        rows = []
        for src in range(n):
            row = [0] * n
            row[src] = hosted[cls][src]
            rows.append(row)
        rows.append(list(new[cls]))
        x[cls] = tuple(tuple(r) for r in rows)
    return MigrationPlan(x=x, mu=tuple(1 for _ in range(n)))


def baseline_energy(state: ClusterState, params: ScenarioParams,
                    cal: CalibrationSet) -> float:
    """Slot energy of the do-nothing baseline (not validated against the
    empty-active-server rule; an idle server that stays on is the point)."""
    plan = baseline_plan(state, params, cal)
    return model.cluster_energy(plan, state, params, cal).total


def _advance_state(state: ClusterState, problem, plan: MigrationPlan) -> ClusterState:
    o, m, d, h = plan_aggregates(problem, plan)
    return ClusterState(
        servers=state.servers,
        initial_counts={cls: tuple(h[cls]) for cls in state.classes},
        initial_active=tuple(int(v) for v in plan.mu),
        pending_deploys={},
        pending_undeploys={},
    )


def run_timeslot(state: ClusterState, params: ScenarioParams,
                 cal: CalibrationSet, solver: str = "bnb",
                 limits: SolveLimits = None) -> SlotResult:
    """Plan one slot end to end and report the energy saved.

    Undeployments are applied first, then the chosen solver runs on the
    staged problem.  An infeasible slot leaves the state where it was
    (deployments stay pending).
    """
    if solver not in SOLVERS:
        raise ValueError(f"unknown solver {solver!r}; choose from {SOLVERS}")
    if any(state.pending_undeploys.get(c, 0) for c in state.classes):
        state = apply_undeployments(state)
    problem = build_problem(state, params, cal)

    try:
        base = baseline_energy(state, params, cal)
        base_ok = True
    except BaselineInfeasible:
        base, base_ok = None, False

    fn = {"bnb": solve_bnb, "bruteforce": solve_bruteforce,
          "greedy": solve_greedy}[solver]
    plan, report = fn(problem, limits or SolveLimits())

    if plan is None:
        return SlotResult(
            plan=None, report=report, baseline_energy=base, energy_gain=None,
            activation_ratio=None, next_state=state, baseline_feasible=base_ok,
        )
    if plan.energy_total is None:
        plan = annotate_plan(problem, plan)
    gain = None
    if base_ok and base > 0:
        gain = 1.0 - plan.energy_total / base
    return SlotResult(
        plan=plan, report=report, baseline_energy=base, energy_gain=gain,
        activation_ratio=plan.activation_ratio,
        next_state=_advance_state(state, problem, plan),
        baseline_feasible=base_ok,
    )


def _sweep_params(template: ScenarioParams, strategy: str, rho_mb: float,
                  nu_s: float) -> ScenarioParams:
    return dataclasses.replace(
        template, strategy=StrategyId(strategy), state_size=rho_mb * 1e6,
        maintenance_period=nu_s,
    )


def _row(strategy, cls_id, rho, nu, n_total, feasible, gain=None, ratio=None,
         gap=None, runtime=None):
    return {
        "strategy": strategy, "class": cls_id, "rho_mb": rho, "nu_s": nu,
        "n_total": n_total, "feasible": feasible, "energy_gain": gain,
        "activation_ratio": ratio, "mip_gap": gap, "runtime_s": runtime,
    }


def feasibility_sweep(spec: SweepSpec, params_template: ScenarioParams,
                      cal: CalibrationSet):
    """How many xApps each (strategy, state size, period) can carry.

    Backend rows check the maintenance budget against the mixed population;
    stateful rows check that a single source holding the whole population
    could still drain within the downtime budget.  Configurations without
    calibration coverage produce a blank row and a note on stderr.

    Returns (rows, summary) where summary maps (strategy, rho_mb, nu_s) to
    the largest feasible population, or None.
    """
    rows, summary = [], {}
    for strategy in spec.strategies:
        sid = StrategyId(strategy)
        for rho in spec.rho_list_mb:
            for nu in spec.nu_list_s:
                params = _sweep_params(params_template, strategy, rho, nu)
                best = None
                for n_total in spec.count_range:
                    counts = mix_counts(spec, n_total)
                    try:
                        if sid is StrategyId.SDL:
                            ok = model.sdl_feasible(counts, params, cal).feasible
                        else:
                            t_d = model.sm_downtime(sid, n_total, cal, rho)
                            ok = t_d <= params.max_sm_downtime
                    except CalibrationLookupError as exc:
                        print(
                            f"note: no calibration for {strategy} at "
                            f"rho={rho} MB, nu={nu} s ({exc}); skipping",
                            file=sys.stderr,
                        )
                        rows.append(_row(strategy, spec.dominant_class, rho,
                                         nu, n_total, None))
                        continue
                    rows.append(_row(strategy, spec.dominant_class, rho, nu,
                                     n_total, ok))
                    if ok and (best is None or n_total > best):
                        best = n_total
                summary[(strategy, rho, nu)] = best
    return rows, summary


def energy_sweep(spec: SweepSpec, servers: Sequence[ServerSpec],
                 params_template: ScenarioParams, cal: CalibrationSet,
                 solver: str = "bnb", limits: SolveLimits = None):
    """Realized savings across the grid, starting from a balanced cluster."""
    rows = []
    for strategy in spec.strategies:
        for rho in spec.rho_list_mb:
            for nu in spec.nu_list_s:
                params = _sweep_params(params_template, strategy, rho, nu)
                for n_total in spec.count_range:
                    counts = mix_counts(spec, n_total)
                    state = balanced_state(spec.classes, servers, counts)
                    t0 = time.perf_counter()
                    try:
                        slot = run_timeslot(state, params, cal, solver, limits)
                    except CalibrationLookupError as exc:
                        print(
                            f"note: no calibration for {strategy} at "
                            f"rho={rho} MB, nu={nu} s ({exc}); skipping",
                            file=sys.stderr,
                        )
                        rows.append(_row(strategy, spec.dominant_class, rho,
                                         nu, n_total, None))
                        continue
                    elapsed = time.perf_counter() - t0
                    if slot.plan is None:
                        rows.append(_row(strategy, spec.dominant_class, rho,
                                         nu, n_total, False,
                                         runtime=elapsed))
                    else:
                        rows.append(_row(
                            strategy, spec.dominant_class, rho, nu, n_total,
                            True, gain=slot.energy_gain,
                            ratio=slot.activation_ratio,
                            gap=slot.report.mip_gap, runtime=elapsed,
                        ))
    return rows
