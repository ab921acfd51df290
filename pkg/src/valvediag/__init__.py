"""Model-based online fault identification for digital hydraulic valve systems.

A steady-state model of a four-DFCU cylinder actuator predicts the flow
balance implied by three pressure sensors and the commanded valve words;
per-period quantile regression over the resulting residuals estimates which
of the valves is jammed open or closed, and an activity-gated EWMA filter
turns the per-period estimates into robust verdicts.
"""

from ._backend import BACKEND, available_backends
from .errors import (
    ConfigError,
    ConflictingFaults,
    EmptyPeriod,
    NoConvergence,
    NumericalFailure,
    OutOfRange,
    ReportFormatError,
    SimulationError,
    SingularSystem,
    TraceFormatError,
    ValvediagError,
)
from .estimator import (
    FaultVariables,
    PenaltyConfig,
    SensingSystem,
    build_system,
    quantile_regression,
    sensing_row,
    solve_quantile_lp,
)
from .model import (
    DfcuFlows,
    PressureState,
    SteadyState,
    SystemConfig,
    ValveParams,
    balance_residual,
    complement_flow,
    default_config,
    dfcu_flows,
    signed_power,
    steady_state_solve,
    valve_flow,
    valve_flows,
    valve_index,
    valve_names,
)
from .pipeline import (
    DiagnosticsConfig,
    FaultReport,
    FaultVerdict,
    FilterState,
    activity_fraction,
    activity_fractions,
    diagnose_period,
    ewma_update,
    reject_spikes,
    run_diagnostics,
)
from .simulator import (
    FaultMode,
    FaultSpec,
    Sample,
    SampleBlock,
    Scenario,
    ScenarioStep,
    Trace,
    apply_fault,
    simulate,
)

__version__ = "0.1.0"
