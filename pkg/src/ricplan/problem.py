"""Planning-slot optimization problem: variables, constraints, objective.

A plan decides, per xApp class, how many instances move between each pair of
servers (x[class][src][dst], the last index being the virtual staging server
that holds pending deployments) and which servers stay powered (mu).  The
objective is total cluster energy over the slot.

Constraint labels follow the numbering used throughout reports and the CLI:
  (12) conservation: every row of x sums to the initial count at its source
  (13) nothing may flow into the staging server
  (14) the staging server ends the slot empty
  (15) only initially-active servers may send migrations
  (16) an optional server that stays on must host at least one xApp
  (17) hosting anything requires the server to be on
  (18) per-server resource capacities, final hosting
  (19) mandatory servers stay on; mu is binary, x non-negative integer
  (20) per-server migration downtime budget (stateful strategies)
  (21) backend maintenance feasibility (backend strategy)
plus "window": no server's migration window may exceed the slot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Optional

from . import model
from .calibration import CalibrationSet, load_coeff, sm_overhead_coeff
from .model import (
    ClusterState,
    KpiBundle,
    ModelDomainError,
    ScenarioParams,
    StrategyId,
)

_CAP_SLACK = 1e-9  # relative slack on capacity/deadline comparisons (fp noise)

STATUS_OPTIMAL = "optimal"
STATUS_GAP = "gap_reached"
STATUS_TIME = "time_limit"
STATUS_INFEASIBLE = "infeasible"


@dataclass(frozen=True)
class SolveLimits:
    """Solver stopping rules.  eval_cap guards the exhaustive oracle only."""

    time_limit: float = 300.0
    gap_target: float = 0.0
    eval_cap: int = 10_000_000


@dataclass(frozen=True)
class SalProblem:
    """Immutable problem instance.

    `staged` is the initial-count matrix extended with the staging-server row
    (index n_servers) holding pending deployments.  big_M exceeds the total
    number of xApps that could ever move, keeping activation gating exact.
    """

    state: ClusterState
    params: ScenarioParams
    cal: CalibrationSet
    big_M: int
    staged: Mapping[str, tuple]

    @property
    def n_servers(self) -> int:
        return len(self.state.servers)

    @property
    def classes(self) -> tuple:
        return self.state.classes

    @property
    def totals(self) -> dict:
        """Final population per class (deployments in, undeployments gone)."""
        return {cls: sum(row) for cls, row in self.staged.items()}


@dataclass(frozen=True)
class MigrationPlan:
    """A (possibly annotated) assignment of migrations and activations."""

    x: Mapping[str, tuple]
    mu: tuple
    kpi: Optional[KpiBundle] = None
    energy_total: Optional[float] = None
    energy_per_server: Optional[Mapping[str, float]] = None
    activation_ratio: Optional[float] = None

    def __post_init__(self):
        x = {cls: tuple(tuple(int(v) for v in row) for row in rows)
             for cls, rows in self.x.items()}
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "mu", tuple(int(v) for v in self.mu))

    def to_dict(self) -> dict:
        doc = {
            "mu": list(self.mu),
            "x": {cls: [list(row) for row in rows] for cls, rows in self.x.items()},
        }
        if self.activation_ratio is not None:
            doc["activation_ratio"] = self.activation_ratio
        if self.energy_total is not None:
            doc["energy_total_j"] = self.energy_total
            doc["energy_per_server_j"] = dict(self.energy_per_server)
        if self.kpi is not None:
            doc["kpi"] = {
                "downtime_s": {c: list(v) for c, v in self.kpi.downtime.items()},
                "migration_duration_s": {
                    c: list(v) for c, v in self.kpi.migration_duration.items()
                },
                "instantiation_s": {
                    c: list(v) for c, v in self.kpi.instantiation.items()
                },
                "defrag_downtime_s": self.kpi.defrag_downtime,
                "active_time_s": self.kpi.active_time,
            }
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MigrationPlan":
        try:
            return cls(x=doc["x"], mu=doc["mu"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed plan document: {exc}") from None


@dataclass
class SolveReport:
    status: str  # optimal | gap_reached | time_limit | infeasible
    objective: Optional[float]
    lower_bound: float
    mip_gap: float
    runtime: float
    nodes_explored: int
    detail: str = ""
    trace: tuple = field(default_factory=tuple, repr=False, compare=False)

    def to_dict(self) -> dict:
        def _num(v):
            if v is None or (isinstance(v, float) and not math.isfinite(v)):
                return None
            return v
        return {
            "status": self.status,
            "objective_j": _num(self.objective),
            "lower_bound_j": _num(self.lower_bound),
            "mip_gap": _num(self.mip_gap),
            "runtime_s": self.runtime,
            "nodes_explored": self.nodes_explored,
            "detail": self.detail,
        }


@dataclass(frozen=True)
class ValidationResult:
    valid: bool
    violations: tuple
    messages: tuple

    def __bool__(self) -> bool:
        return self.valid


def mip_gap(objective: Optional[float], lower_bound: float) -> float:
    if objective is None:
        return math.inf
    if not math.isfinite(lower_bound):
        return math.inf
    return max(0.0, objective - lower_bound) / max(objective, 1e-12)


# ---------------------------------------------------------------------------
# problem construction

def build_problem(state: ClusterState, params: ScenarioParams,
                  cal: CalibrationSet) -> SalProblem:
    """Assemble a solvable problem from a cluster snapshot.

    Undeployments must have been applied already (the orchestrator owns slot
    sequencing); pending deployments become the staging-server row.
    """
    if any(v > 0 for v in state.pending_undeploys.values()):
        raise ValueError("apply undeployments before building the problem")
    staged = {
        cls: tuple(state.initial_counts[cls]) + (state.pending_deploys[cls],)
        for cls in state.classes
    }
    total = sum(sum(row) for row in staged.values())
    return SalProblem(state=state, params=params, cal=cal,
                      big_M=total + 1, staged=staged)


def identity_plan(problem: SalProblem) -> MigrationPlan:
    """Everything stays put, deployments unassigned only if there are none."""
    n = problem.n_servers
    x = {}
    for cls in problem.classes:
        rows = [[0] * (n + 1) for _ in range(n + 1)]
        for s in range(n):
            rows[s][s] = problem.staged[cls][s]
        x[cls] = rows
    mu = tuple(1 if (problem.state.initial_active[s] or
                     not problem.state.servers[s].optional_flag) else 0
               for s in range(n))
    return MigrationPlan(x=x, mu=mu)


# ---------------------------------------------------------------------------
# aggregates

def plan_aggregates(problem: SalProblem, plan: MigrationPlan):
    """Per-(class, server) outgoing/incoming/deploy/hosted counts."""
    n = problem.n_servers
    o, m, d, h = {}, {}, {}, {}
    for cls in problem.classes:
        rows = plan.x[cls]
        o[cls] = tuple(
            sum(rows[s][t] for t in range(n) if t != s) for s in range(n)
        )
        m[cls] = tuple(
            sum(rows[t][s] for t in range(n) if t != s) for s in range(n)
        )
        d[cls] = tuple(rows[n][s] for s in range(n))
        h[cls] = tuple(
            rows[s][s] + m[cls][s] + d[cls][s] for s in range(n)
        )
    return o, m, d, h


def _resource_participates(problem: SalProblem, mu_s: int, outgoing_s: int) -> bool:
    if problem.params.strategy is StrategyId.SDL:
        return bool(mu_s)
    return bool(mu_s) and outgoing_s > 0


# ---------------------------------------------------------------------------
# validation

def validate_plan(problem: SalProblem, plan: MigrationPlan) -> ValidationResult:
    """Check every active constraint; violations are data, not errors.

    Raises ValueError only on a dimension mismatch between plan and problem.
    """
    n = problem.n_servers
    classes = problem.classes
    if set(plan.x.keys()) != set(classes):
        raise ValueError("plan classes do not match problem classes")
    if len(plan.mu) != n:
        raise ValueError(f"plan mu has {len(plan.mu)} entries, expected {n}")
    for cls in classes:
        rows = plan.x[cls]
        if len(rows) != n + 1 or any(len(r) != n + 1 for r in rows):
            raise ValueError(f"plan x[{cls}] must be {n + 1}x{n + 1}")

    violations, messages = [], []

    def hit(tag: str, msg: str):
        if tag not in violations:
            violations.append(tag)
        messages.append(f"{tag} {msg}")

    negative = False
    for cls in classes:
        for row in plan.x[cls]:
            for v in row:
                if v < 0:
                    hit("(19)", f"negative migration count in class {cls}")
                    negative = True
                    break
    for s, v in enumerate(plan.mu):
        if v not in (0, 1):
            hit("(19)", f"mu[{problem.state.servers[s].id}] not binary")

    # (12) conservation at every source, staging row included
    for cls in classes:
        for s in range(n + 1):
            if sum(plan.x[cls][s]) != problem.staged[cls][s]:
                src = problem.state.servers[s].id if s < n else "staging"
                hit("(12)", f"class {cls} row {src} does not sum to its count")

    # (13) no inflow to staging
    inflow = sum(plan.x[cls][s][n] for cls in classes for s in range(n + 1))
    if inflow != 0:
        hit("(13)", f"{inflow} xApps routed into the staging server")

    # (14) staging drained
    for cls in classes:
        placed = sum(plan.x[cls][n][s] for s in range(n))
        if placed != problem.staged[cls][n]:
            hit("(14)", f"class {cls}: {placed} of {problem.staged[cls][n]} "
                        "pending deployments placed")

    if negative:
        # aggregate-based checks are meaningless on corrupt counts
        return ValidationResult(valid=False, violations=tuple(violations),
                                messages=tuple(messages))

    o, m, d, h = plan_aggregates(problem, plan)
    servers = problem.state.servers
    mu0 = problem.state.initial_active

    # (15) migrations only out of initially-active servers
    for s in range(n):
        if mu0[s]:
            continue
        out = sum(o[cls][s] for cls in classes)
        if out > 0:
            hit("(15)", f"{servers[s].id} sends migrations while initially off")

    # (17) hosting requires power; (16) powered optional servers host something
    for s in range(n):
        hosted = sum(h[cls][s] for cls in classes)
        if plan.mu[s] == 0 and hosted > 0:
            hit("(17)", f"{servers[s].id} hosts {hosted} xApps while off")
        if plan.mu[s] == 1 and servers[s].optional_flag and hosted == 0:
            hit("(16)", f"optional {servers[s].id} is on but hosts nothing")

    # (19) mandatory servers stay on
    for s in range(n):
        if not servers[s].optional_flag and plan.mu[s] == 0:
            hit("(19)", f"mandatory {servers[s].id} turned off")

    # (18) capacity on the final hosting
    totals = problem.totals
    for s in range(n):
        if plan.mu[s] == 0:
            continue  # (17) already guards hosting on off servers
        hosted = {cls: h[cls][s] for cls in classes}
        out_s = sum(o[cls][s] for cls in classes)
        usage = model.server_resources(
            servers[s], True, hosted, problem.params.strategy, problem.cal,
            total_counts=totals, server_count=n,
            participates=_resource_participates(problem, plan.mu[s], out_s),
        )
        caps = (servers[s].cpu_cap, servers[s].mem_cap, servers[s].disk_cap)
        for used, cap, name in zip(usage, caps, ("CPU", "MEM", "DISK")):
            if used > cap * (1.0 + _CAP_SLACK):
                hit("(18)", f"{servers[s].id} {name} {used:.6g} over cap {cap:.6g}")

    params, cal = problem.params, problem.cal
    rho = params.rho_mb

    # (20) downtime budget per source server, stateful strategies only
    if params.strategy in model.SM_STRATEGIES:
        for s in range(n):
            t_d = sum(
                model.sm_downtime(params.strategy, o[cls][s], cal, rho)
                for cls in classes
            )
            if t_d > params.max_sm_downtime * (1.0 + _CAP_SLACK):
                hit("(20)", f"{servers[s].id} downtime {t_d:.6g} s over "
                            f"budget {params.max_sm_downtime:.6g} s")

    # (21) backend maintenance feasibility, backend strategy only
    if params.strategy is StrategyId.SDL:
        verdict = model.sdl_feasible(totals, params, cal)
        if not verdict.feasible:
            hit("(21)", f"defrag downtime {verdict.defrag_downtime:.6g} s "
                        f"(budget {params.max_defrag_downtime:.6g} s, "
                        f"active time {verdict.active_time:.6g} s)")

    # migration windows must fit in the slot
    for s in range(n):
        w = sum(
            model.migration_duration(params.strategy, o[cls][s], cal, rho)
            + model.instantiation_time(d[cls][s], cal)
            for cls in classes
        )
        if w > params.slot_length * (1.0 + _CAP_SLACK):
            hit("window", f"{servers[s].id} migration window {w:.6g} s exceeds "
                          f"slot {params.slot_length:.6g} s")

    return ValidationResult(valid=not violations, violations=tuple(violations),
                            messages=tuple(messages))


# ---------------------------------------------------------------------------
# objective and annotation

def objective_eval(problem: SalProblem, plan: MigrationPlan) -> float:
    """Total slot energy of a plan, joules.  Does not re-validate."""
    return model.cluster_energy(plan, problem.state, problem.params,
                                problem.cal).total


def plan_kpis(problem: SalProblem, plan: MigrationPlan) -> KpiBundle:
    n = problem.n_servers
    params, cal = problem.params, problem.cal
    o, m, d, h = plan_aggregates(problem, plan)
    rho = params.rho_mb
    strategy = params.strategy
    downtime, duration, inst = {}, {}, {}
    for cls in problem.classes:
        if strategy is StrategyId.SDL:
            downtime[cls] = tuple(model.sdl_downtime() for _ in range(n))
        else:
            downtime[cls] = tuple(
                model.sm_downtime(strategy, o[cls][s], cal, rho) for s in range(n)
            )
        duration[cls] = tuple(
            model.migration_duration(strategy, o[cls][s], cal, rho)
            for s in range(n)
        )
        inst[cls] = tuple(
            model.instantiation_time(d[cls][s], cal) for s in range(n)
        )
    if strategy is StrategyId.SDL:
        totals = problem.totals
        t_df = model.defrag_downtime(totals, cal, rho, params.maintenance_period)
        active = params.maintenance_period - t_df
    else:
        t_df = 0.0
        active = params.maintenance_period
    return KpiBundle(downtime=downtime, migration_duration=duration,
                     instantiation=inst, defrag_downtime=t_df, active_time=active)


def annotate_plan(problem: SalProblem, plan: MigrationPlan) -> MigrationPlan:
    """Fill in derived KPIs, energy breakdown, and activation ratio."""
    result = model.cluster_energy(plan, problem.state, problem.params, problem.cal)
    return replace(
        plan,
        kpi=plan_kpis(problem, plan),
        energy_total=result.total,
        energy_per_server=dict(result.per_server),
        activation_ratio=sum(plan.mu) / problem.n_servers,
    )


# ---------------------------------------------------------------------------
# assembling x from aggregated decisions

def _transport_feasible(src, dst, row_rem, col_rem):
    """Can the remaining supplies still reach the remaining demands?

    Row `src` may only use columns after `dst` (minus its own); rows after it
    may use every column but their own; earlier rows are exhausted.  With one
    forbidden cell per row, Hall's condition reduces to a handful of subset
    checks: any union of two unrestricted rows already covers all columns.
    """
    n = len(col_rem)
    total = sum(col_rem)
    if sum(row_rem[src:]) != total:
        return False
    tail = sum(col_rem[j] for j in range(dst + 1, n) if j != src)
    if row_rem[src] > tail:
        return False
    for i in range(src + 1, n):
        if row_rem[i] + col_rem[i] > total:
            return False
        if i <= dst and row_rem[src] + row_rem[i] > total - col_rem[i]:
            return False
    return True


def lexmin_transport(outgoing, incoming):
    """Smallest (in flattened lexicographic order) migration matrix moving
    `outgoing[s]` units out of each server and `incoming[s]` units in, with
    no self-arcs.  Returns a square matrix with a zero diagonal.
    """
    n = len(outgoing)
    row_rem = list(outgoing)
    col_rem = list(incoming)
    if not _transport_feasible(0, -1, row_rem, col_rem):
        raise ValueError("aggregated migration counts are unrealizable")
    t = [[0] * n for _ in range(n)]
    for src in range(n):
        for dst in range(n):
            if dst == src:
                continue
            hi = min(row_rem[src], col_rem[dst])
            chosen = None
            for v in range(hi + 1):
                row_rem[src] -= v
                col_rem[dst] -= v
                if _transport_feasible(src, dst, row_rem, col_rem):
                    chosen = v
                    break
                row_rem[src] += v
                col_rem[dst] += v
            if chosen is None:
                raise ValueError("aggregated migration counts are unrealizable")
            t[src][dst] = chosen
    if any(row_rem) or any(col_rem):
        raise ValueError("aggregated migration counts are unrealizable")
    return t


def plan_from_aggregates(problem: SalProblem, mu, outgoing, incoming, deploys
                         ) -> MigrationPlan:
    """Build the canonical (lex-min) plan realizing aggregated decisions.

    outgoing/incoming/deploys map class -> per-server counts; staying is
    inferred from the initial counts.
    """
    n = problem.n_servers
    x = {}
    for cls in problem.classes:
        t = lexmin_transport(list(outgoing[cls]), list(incoming[cls]))
        rows = [[0] * (n + 1) for _ in range(n + 1)]
        for s in range(n):
            for sp in range(n):
                rows[s][sp] = t[s][sp]
            rows[s][s] = problem.staged[cls][s] - outgoing[cls][s]
            if rows[s][s] < 0:
                raise ValueError(f"class {cls}: outgoing exceeds initial count")
            rows[n][s] = deploys[cls][s]
        x[cls] = rows
    return MigrationPlan(x=x, mu=tuple(mu))
