"""KPI, resource, and energy formulas against hand-derived values."""

import math

import pytest

from ricplan import (
    ClusterState,
    ModelDomainError,
    ScenarioParams,
    StrategyId,
    identity_plan,
    build_problem,
)
from ricplan import model as M
from tests.conftest import make_class, make_params, make_servers


def close(a, b):
    return math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


# traffic

def test_traffic_load():
    assert close(M.traffic_load(make_class("A"), 10), 1000.0)
    assert close(M.traffic_load(make_class("D"), 1), 1.0e6)
    assert M.traffic_load(make_class("C"), 0) == 0.0


def test_traffic_rejects_negative():
    with pytest.raises(ValueError):
        M.traffic_load(make_class("A"), -1)


# downtime and duration

def test_sm_downtime_values(cal):
    assert close(M.sm_downtime("sm-mr", 20, cal, 1.0), 211.0)
    assert close(M.sm_downtime("sm-md", 3, cal, 10.0), 19.47)
    assert M.sm_downtime("sm-mr", 0, cal, 1.0) == 0.0
    assert M.sm_downtime("sm-md", 0, cal, 100.0) == 0.0


def test_sm_downtime_rejects_sdl(cal):
    with pytest.raises(ValueError):
        M.sm_downtime("sdl", 3, cal, 1.0)


def test_sdl_downtime_is_zero():
    assert M.sdl_downtime() == 0.0


def test_migration_duration_values(cal):
    assert close(M.migration_duration("sm-md", 5, cal, 1.0), 101.4)
    assert close(M.migration_duration("sdl", 10, cal), 5.07)
    assert close(M.migration_duration("sm-mr", 2, cal, 100.0), 46.6)
    assert M.migration_duration("sdl", 0, cal) == 0.0
    assert M.migration_duration("sm-mr", 0, cal, 1.0) == 0.0


def test_migration_duration_needs_rho_for_sm(cal):
    with pytest.raises(ValueError):
        M.migration_duration("sm-md", 5, cal)


def test_sm_mr_duration_equals_downtime(cal):
    for n in (1, 2, 20):
        assert close(M.migration_duration("sm-mr", n, cal, 1.0),
                     M.sm_downtime("sm-mr", n, cal, 1.0))


def test_instantiation_time(cal):
    assert close(M.instantiation_time(10, cal), 5.07)
    assert close(M.instantiation_time(1, cal), 4.35)
    assert M.instantiation_time(0, cal) == 0.0


# backend maintenance

def test_defrag_downtime(cal):
    assert close(M.defrag_downtime({"A": 50}, cal, 1.0, 1.0), 0.831)
    assert close(M.defrag_downtime({"C": 30, "D": 30}, cal, 1.0, 1.0), 0.5799)
    assert M.defrag_downtime({"A": 0, "B": 0}, cal, 1.0, 1.0) == 0.0


def test_sdl_feasible_boundary(cal):
    params = make_params("sdl")
    f60 = M.sdl_feasible({"A": 60}, params, cal)
    assert f60.feasible
    assert close(f60.defrag_downtime, 0.9972)
    assert f60.active_time > 0.0
    f61 = M.sdl_feasible({"A": 61}, params, cal)
    assert not f61.feasible
    assert close(f61.defrag_downtime, 1.01382)
    f0 = M.sdl_feasible({"A": 0}, params, cal)
    assert f0.feasible
    assert f0.defrag_downtime == 0.0


# resource models

def test_strategy_overhead(cal):
    assert close(M.strategy_overhead("sdl", "CPU", {"A": 10}, 4, cal, True), 1.33)
    assert close(M.strategy_overhead("sm-md", "CPU", {"A": 10}, 4, cal, True), 0.76)
    assert M.strategy_overhead("sm-mr", "MEM", {"A": 10}, 4, cal, True) == 0.0
    assert M.strategy_overhead("sdl", "CPU", {"A": 10}, 4, cal, False) == 0.0
    assert M.strategy_overhead("sm-md", "CPU", {"A": 10}, 4, cal, False) == 0.0


def test_strategy_overhead_unknown_resource(cal):
    with pytest.raises(ValueError):
        M.strategy_overhead("sdl", "GPU", {"A": 10}, 4, cal, True)


def test_server_resources(cal):
    srv = make_servers(1)[0]
    r = M.server_resources(srv, True, {"A": 10}, "sdl", cal,
                           total_counts={"A": 10}, server_count=4,
                           participates=True)
    assert close(r.cpu, 6.13)
    off = M.server_resources(srv, False, {}, "sdl", cal,
                             total_counts={"A": 10}, server_count=4,
                             participates=False)
    assert off.as_tuple() == (0.0, 0.0, 0.0)
    r2 = M.server_resources(srv, True, {"B": 2}, "sm-mr", cal,
                            total_counts={"B": 2}, server_count=4,
                            participates=False)
    assert close(r2.cpu, 5.82)


# energy

def test_sm_migration_energy(cal):
    assert close(M.sm_migration_energy("sm-mr", [211.0], cal), 3770.57)
    assert close(M.sm_migration_energy("sm-md", 100.0, cal), 2756.0)
    assert M.sm_migration_energy("sm-mr", [], cal) == 0.0
    assert M.sm_migration_energy("sm-md", 0.0, cal) == 0.0


def test_sm_migration_energy_rejects_sdl(cal):
    with pytest.raises(ValueError):
        M.sm_migration_energy("sdl", 10.0, cal)


def test_sdl_energy_per_server(cal):
    assert close(M.sdl_energy_per_server({"A": 40}, 4, 3600.0, cal), 22635.0)
    # backend idles even with nothing deployed: intercepts still accrue
    empty = {"A": 0, "B": 0, "C": 0, "D": 0}
    assert close(M.sdl_energy_per_server(empty, 4, 3600.0, cal), 127467.0)
    assert M.sdl_energy_per_server({"A": 40}, 4, 0.0, cal) == 0.0


def test_server_energy_steady(cal):
    params = make_params("sm-mr", slot=3600.0)
    e = M.server_energy(outgoing={}, incoming={}, staying={"A": 1}, new={},
                        n0_s={"A": 1}, mu_s=1, totals={"A": 1}, server_count=1,
                        params=params, cal=cal)
    assert close(e, 444348.0)


def test_server_energy_off_empty(cal):
    params = make_params("sm-mr")
    e = M.server_energy(outgoing={}, incoming={}, staying={}, new={},
                        n0_s={}, mu_s=0, totals={"A": 1}, server_count=1,
                        params=params, cal=cal)
    assert e == 0.0


def test_server_energy_drain(cal):
    # source drains 2 xApps and shuts down: engine energy plus the window
    # billed at the initial hosting, nothing after
    params = make_params("sm-mr")
    e = M.server_energy(outgoing={"A": 2}, incoming={}, staying={}, new={},
                        n0_s={"A": 2}, mu_s=0, totals={"A": 2}, server_count=1,
                        params=params, cal=cal)
    assert close(e, 3053.803)


def test_server_energy_window_exceeds_slot(cal):
    params = make_params("sm-mr", slot=10.0)
    with pytest.raises(ModelDomainError, match="window"):
        M.server_energy(outgoing={"A": 2}, incoming={}, staying={}, new={},
                        n0_s={"A": 2}, mu_s=0, totals={"A": 2}, server_count=1,
                        params=params, cal=cal)


def test_cluster_energy_single_idle_server(cal):
    servers = make_servers(1)
    state = ClusterState(servers=servers, initial_counts={"A": (0,)},
                         initial_active=(1,))
    params = make_params("sm-mr")
    problem = build_problem(state, params, cal)
    res = M.cluster_energy(identity_plan(problem), state, params, cal)
    assert close(res.total, 432000.0)


def test_cluster_energy_low_load_baseline(cal, low_load_state, low_load_params):
    problem = build_problem(low_load_state, low_load_params, cal)
    res = M.cluster_energy(identity_plan(problem), low_load_state,
                           low_load_params, cal)
    assert close(res.total, 1851480.0)
    assert set(res.per_server) == {s.id for s in low_load_state.servers}
    assert close(sum(res.per_server.values()), res.total)


# constructors and validation

def test_scenario_params_rho():
    p = make_params("sdl", rho_mb=10.0)
    assert close(p.rho_mb, 10.0)
    assert p.strategy is StrategyId.SDL


def test_scenario_params_rejects_bad():
    with pytest.raises(ValueError):
        make_params("warp-drive")
    with pytest.raises(ValueError):
        make_params("sdl", slot=-1.0)


def test_cluster_state_checks():
    servers = make_servers(2)
    with pytest.raises(ValueError, match="unknown class"):
        ClusterState(servers=servers, initial_counts={"A": (1, 0)},
                     initial_active=(1, 1), pending_deploys={"B": 1})
    with pytest.raises(ValueError):
        ClusterState(servers=servers, initial_counts={"A": (1,)},
                     initial_active=(1, 1))


def test_cluster_state_totals():
    servers = make_servers(2)
    st = ClusterState(servers=servers, initial_counts={"A": (3, 2), "B": (0, 1)},
                      initial_active=(1, 1))
    assert st.total_count("A") == 5
    assert st.total_count("B") == 1
    assert st.classes == ("A", "B")
