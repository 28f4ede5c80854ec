"""Decentralized energy-optimal coordination of automated vehicles at a signal-free intersection."""

from .model import (
    Arc,
    ArcKind,
    ConfigurationError,
    Direction,
    DomainError,
    InfeasibleError,
    IntersectionGeometry,
    Lane,
    NumericalError,
    PiecewiseTrajectory,
    Relation,
    SignalFreeError,
    VehicleLimits,
    VehicleRecord,
    classify_relation,
    four_approach_geometry,
)
from .ocp import BoundaryConditions, dynamics_lower_bound, solve, solve_unconstrained, solve_with_constraints
from .scheduler import Arrival, BindingCase, FirstVehiclePolicy, ScheduleEntry, schedule_next, schedule_sequence
from .feasibility import PredecessorContext, feasibility_map, is_feasible, min_gap
from .fuel import FuelCoefficients, fuel_rate
from .monitors import MonitorViolation, monitor_lateral, monitor_rear_end
from .config import ScenarioConfig, parse_config
from .sim import admit_vehicle, run
from .baseline import SignalBaseline, run_baseline

__version__ = "0.1.0"
