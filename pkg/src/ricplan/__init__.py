"""Energy-aware xApp placement planning for near-RT RIC clusters.

Calibrated affine KPI/resource/energy models, a migration-plan validator,
exact and heuristic consolidation solvers, and the slot orchestration and
sweep machinery on top of them.
"""

from .bnb import solve_bnb
from .bruteforce import SearchSpaceError, solve_bruteforce
from .calibration import (
    CalibrationError,
    CalibrationLookupError,
    CalibrationSet,
    DegenerateFitError,
    LinearFit,
    MeasurementSeries,
    default_calibration,
    fit_linear,
    load_calibration,
    read_measurement_csv,
    serialize_calibration,
)
from .greedy import solve_greedy
from .model import (
    ClusterState,
    KpiBundle,
    ModelDomainError,
    ResourceUsage,
    ScenarioParams,
    SdlFeasibility,
    ServerSpec,
    StrategyId,
    XAppClass,
)
from .orchestrator import (
    BaselineInfeasible,
    SlotResult,
    SweepSpec,
    apply_undeployments,
    balanced_state,
    baseline_energy,
    baseline_plan,
    energy_sweep,
    feasibility_sweep,
    mix_counts,
    run_timeslot,
    stage_deployments,
)
from .problem import (
    MigrationPlan,
    SalProblem,
    SolveLimits,
    SolveReport,
    ValidationResult,
    annotate_plan,
    build_problem,
    identity_plan,
    objective_eval,
    plan_kpis,
    validate_plan,
)
from .scenario import ScenarioError, ScenarioFile, parse_scenario, parse_sweep

__version__ = "0.1.0"

__all__ = [
    "BaselineInfeasible",
    "CalibrationError",
    "CalibrationLookupError",
    "CalibrationSet",
    "ClusterState",
    "DegenerateFitError",
    "KpiBundle",
    "LinearFit",
    "MeasurementSeries",
    "MigrationPlan",
    "ModelDomainError",
    "ResourceUsage",
    "SalProblem",
    "ScenarioError",
    "ScenarioFile",
    "ScenarioParams",
    "SdlFeasibility",
    "SearchSpaceError",
    "ServerSpec",
    "SlotResult",
    "SolveLimits",
    "SolveReport",
    "StrategyId",
    "SweepSpec",
    "ValidationResult",
    "XAppClass",
    "annotate_plan",
    "apply_undeployments",
    "balanced_state",
    "baseline_energy",
    "baseline_plan",
    "build_problem",
    "default_calibration",
    "energy_sweep",
    "feasibility_sweep",
    "fit_linear",
    "identity_plan",
    "load_calibration",
    "mix_counts",
    "objective_eval",
    "parse_scenario",
    "parse_sweep",
    "plan_kpis",
    "read_measurement_csv",
    "run_timeslot",
    "serialize_calibration",
    "solve_bnb",
    "solve_bruteforce",
    "solve_greedy",
    "stage_deployments",
    "validate_plan",
]
