"""Exhaustive reference solver.

Enumerates every activation vector and every per-row destination split,
evaluates each complete assignment with the exact energy model, and keeps the
best.  Intended as the ground-truth oracle at desk scale; refuses instances
whose search-space estimate exceeds the evaluation cap.
"""

from __future__ import annotations

import math
import time
from itertools import product

from . import model
from .calibration import idle_coeff, kpi_coeffs, load_coeff, sm_overhead_coeff
from .model import StrategyId
from .problem import (
    STATUS_INFEASIBLE,
    STATUS_OPTIMAL,
    MigrationPlan,
    SalProblem,
    SolveLimits,
    SolveReport,
    annotate_plan,
    mip_gap,
    validate_plan,
)


class SearchSpaceError(ValueError):
    """Instance too large for exhaustive search; carries the estimate."""

    def __init__(self, estimate: int, cap: int):
        super().__init__(
            f"estimated {estimate} plan evaluations exceed the cap of {cap}"
        )
        self.estimate = estimate
        self.cap = cap


def _compositions(total: int, slots: int):
    """All ways to split `total` over `slots` ordered bins, ascending lex."""
    if slots == 0:
        return [()] if total == 0 else []
    if slots == 1:
        return [(total,)]
    out = []
    for first in range(total + 1):
        for rest in _compositions(total - first, slots - 1):
            out.append((first,) + rest)
    return out


def search_space_estimate(problem: SalProblem) -> int:
    n = problem.n_servers
    est = 2 ** sum(1 for srv in problem.state.servers if srv.optional_flag)
    for cls in problem.classes:
        for count in problem.staged[cls]:
            est *= math.comb(count + n - 1, n - 1)
    return est


def solve_bruteforce(problem: SalProblem, limits: SolveLimits = None):
    """Globally optimal plan by enumeration, or an infeasibility report.

    Ties on the objective resolve to the first candidate in enumeration
    order, which is the lexicographically smallest (mu, flattened x).
    """
    limits = limits or SolveLimits()
    t0 = time.perf_counter()

    n = problem.n_servers
    classes = problem.classes
    params, cal = problem.params, problem.cal
    servers = problem.state.servers
    staged = problem.staged
    totals = problem.totals
    rho = params.rho_mb
    strategy = params.strategy
    sdl = strategy is StrategyId.SDL

    def report(status, objective, nodes, detail=""):
        lb = objective if objective is not None else math.inf
        return SolveReport(
            status=status, objective=objective, lower_bound=lb,
            mip_gap=mip_gap(objective, lb), runtime=time.perf_counter() - t0,
            nodes_explored=nodes, detail=detail,
        )

    # population-level infeasibility needs no enumeration, check before
    # refusing on size
    if sdl:
        verdict = model.sdl_feasible(totals, params, cal)
        if not verdict.feasible:
            return None, report(STATUS_INFEASIBLE, None, 0, "(21)")

    est = search_space_estimate(problem)
    if est > limits.eval_cap:
        raise SearchSpaceError(est, limits.eval_cap)

    # per-(strategy, rho) timing coefficients, fetched once
    coeff = dict(kpi_coeffs(cal, strategy.value, None if sdl else rho))
    inst_c = kpi_coeffs(cal, StrategyId.SDL.value, None)
    delta_d = coeff["delta_d"]
    p_cpu = {c: load_coeff(cal, c, "CPU") for c in classes}
    p_mem = {c: load_coeff(cal, c, "MEM") for c in classes}
    p_dsk = {c: load_coeff(cal, c, "DISK") for c in classes}
    q = {r: idle_coeff(cal, r) for r in ("CPU", "MEM", "DISK")}
    if sdl:
        share = {
            r: model.strategy_overhead(strategy, r, totals, n, cal, True)
            for r in ("CPU", "MEM", "DISK")
        }
    else:
        share = {r: sm_overhead_coeff(cal, strategy.value, r)
                 for r in ("CPU", "MEM", "DISK")}

    def t_mig(out_count):
        if out_count == 0:
            return 0.0
        return coeff["delta_m"] * out_count + coeff["b_m"]

    def t_inst(new_count):
        if new_count == 0:
            return 0.0
        return inst_c["delta_m"] * new_count + inst_c["b_m"]

    rows = [(cls, src) for cls in classes for src in range(n + 1)]
    mu_axes = [[1] if not srv.optional_flag else [0, 1] for srv in servers]
    comp_cache = {}

    best_obj = None
    best_mu = None
    best_combo = None
    evaluated = 0

    for mu in product(*mu_axes):
        active = [s for s in range(n) if mu[s]]
        if not active:
            continue  # at least one mandatory server exists

        # a server that powers off must drain completely: check its budget once
        drain_ok = True
        for s in range(n):
            if mu[s]:
                continue
            out_total = sum(staged[cls][s] for cls in classes)
            if out_total == 0:
                continue
            if not sdl and delta_d * out_total > params.max_sm_downtime * (1 + 1e-9):
                drain_ok = False
                break
            w = sum(t_mig(staged[cls][s]) for cls in classes)
            if w > params.slot_length * (1 + 1e-9):
                drain_ok = False
                break
        if not drain_ok:
            continue

        # destination splits per row, restricted to active servers
        per_row = []
        feasible_mu = True
        for cls, src in rows:
            count = staged[cls][src]
            key = (count, len(active))
            if key not in comp_cache:
                comp_cache[key] = _compositions(count, len(active))
            if count > 0 and not comp_cache[key]:
                feasible_mu = False
                break
            per_row.append(comp_cache[key])
        if not feasible_mu:
            continue

        for combo in product(*per_row):
            evaluated += 1
            # aggregates per (class, server)
            out = {cls: [0] * n for cls in classes}
            arr = {cls: [0] * n for cls in classes}
            dep = {cls: [0] * n for cls in classes}
            hosted = {cls: [0] * n for cls in classes}
            ok = True
            for (cls, src), split in zip(rows, combo):
                for pos, v in enumerate(split):
                    dst = active[pos]
                    if src == n:
                        dep[cls][dst] += v
                    elif dst == src:
                        hosted[cls][dst] += v
                    else:
                        out[cls][src] += v
                        arr[cls][dst] += v
            for cls in classes:
                for s in active:
                    hosted[cls][s] += arr[cls][s] + dep[cls][s]

            # powered optional servers must host something
            for s in active:
                if servers[s].optional_flag and \
                        sum(hosted[cls][s] for cls in classes) == 0:
                    ok = False
                    break
            if not ok:
                continue

            # downtime budget and migration windows at each source
            windows = [0.0] * n
            for s in range(n):
                o_tot = sum(out[cls][s] for cls in classes)
                if not sdl and o_tot and \
                        delta_d * o_tot > params.max_sm_downtime * (1 + 1e-9):
                    ok = False
                    break
                w = sum(t_mig(out[cls][s]) + t_inst(dep[cls][s])
                        for cls in classes)
                if w > params.slot_length * (1 + 1e-9):
                    ok = False
                    break
                windows[s] = w
            if not ok:
                continue

            # capacity at the final hosting (mirrors the resource model)
            for s in active:
                if sdl:
                    over = share
                else:
                    participates = sum(out[cls][s] for cls in classes) > 0
                    over = share if participates else None
                cpu = q["CPU"] + (over["CPU"] if over else 0.0)
                mem = q["MEM"] + (over["MEM"] if over else 0.0)
                dsk = q["DISK"] + (over["DISK"] if over else 0.0)
                for cls in classes:
                    h = hosted[cls][s]
                    cpu += p_cpu[cls] * h
                    mem += p_mem[cls] * h
                    dsk += p_dsk[cls] * h
                if cpu > servers[s].cpu_cap * (1 + 1e-9) or \
                        mem > servers[s].mem_cap * (1 + 1e-9) or \
                        dsk > servers[s].disk_cap * (1 + 1e-9):
                    ok = False
                    break
            if not ok:
                continue

            energy = 0.0
            for s in range(n):
                energy += model.server_energy(
                    {cls: out[cls][s] for cls in classes},
                    {cls: arr[cls][s] for cls in classes},
                    {cls: hosted[cls][s] - arr[cls][s] - dep[cls][s]
                     for cls in classes},
                    {cls: dep[cls][s] for cls in classes},
                    {cls: staged[cls][s] for cls in classes},
                    mu[s], totals, n, params, cal,
                )
            if best_obj is None or energy < best_obj:
                best_obj = energy
                best_mu = mu
                best_combo = combo

    if best_obj is None:
        return None, report(STATUS_INFEASIBLE, None, evaluated,
                            "no feasible assignment in the full search space")

    # rebuild the winning tensor
    active = [s for s in range(n) if best_mu[s]]
    x = {cls: [[0] * (n + 1) for _ in range(n + 1)] for cls in classes}
    for (cls, src), split in zip(rows, best_combo):
        for pos, v in enumerate(split):
            x[cls][src][active[pos]] = v
    plan = MigrationPlan(x=x, mu=best_mu)
    check = validate_plan(problem, plan)
    if not check.valid:  # pragma: no cover - enumeration and validator agree
        raise AssertionError(f"oracle produced an invalid plan: {check.violations}")
    plan = annotate_plan(problem, plan)
    return plan, report(STATUS_OPTIMAL, plan.energy_total, evaluated)
