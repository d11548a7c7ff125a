import pytest

from ricplan import (
    ClusterState,
    ScenarioParams,
    ServerSpec,
    StrategyId,
    XAppClass,
    default_calibration,
)

# message size (bytes), period (s) of the four calibrated traffic classes
CLASS_DEFS = {
    "A": (100.0, 1.0),
    "B": (100.0, 0.1),
    "C": (100e3, 1.0),
    "D": (100e3, 0.1),
}


def make_class(cid: str) -> XAppClass:
    size, period = CLASS_DEFS[cid]
    return XAppClass(id=cid, msg_size=size, msg_period=period)


def make_servers(n, n_mandatory=1, cpu=128.0, mem=125.0, disk=250.0):
    return tuple(
        ServerSpec(id=f"s{i + 1}", optional_flag=(i >= n_mandatory),
                   cpu_cap=cpu, mem_cap=mem, disk_cap=disk)
        for i in range(n)
    )


def make_params(strategy, rho_mb=1.0, nu=1.0, slot=3600.0, td_max=300.0,
                tdf_max=1.0):
    return ScenarioParams(
        state_size=rho_mb * 1e6, maintenance_period=nu, slot_length=slot,
        max_sm_downtime=td_max, max_defrag_downtime=tdf_max,
        strategy=strategy,
    )


@pytest.fixture(scope="session")
def cal():
    return default_calibration()


@pytest.fixture
def low_load_state():
    # 10 class-A xApps spread (3,3,2,2) over 4 servers, only s1 mandatory
    return ClusterState(
        servers=make_servers(4),
        initial_counts={"A": (3, 3, 2, 2)},
        initial_active=(1, 1, 1, 1),
    )


@pytest.fixture
def low_load_params():
    return make_params(StrategyId.SM_MR)
