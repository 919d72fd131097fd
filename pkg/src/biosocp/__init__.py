"""Second-order cone relaxations of bioprocess network control, with exactness certificates."""

__version__ = "0.1.0"

from .network import NetworkSchedule, TankNetwork, ValidationError, build_matrices, is_outflow_connected
from .kinetics import Contois, GeometricInteractive, KineticsSpec, Monod, NonInteractive
from .discretize import FIXED, PERIODIC, ImplicitEuler, TimeGrid
from .program import (Allocation, BiogasMax, Composite, ConicProgram, ConstraintSet, SetpointTracking,
                      SubstrateOutflow, build_steady_state, build_transient, read_interchange,
                      write_interchange)
from .solver import Solution, SolverOptions, solve, verify_kkt
from .exactness import certify, omega_certificate, residual_exactness, steady_state_certificate
from .simulate import find_steady_state, forward_simulate
from .scenario import Scenario, dump_scenario, load_scenario, scenario_from_config

__all__ = [
    "Allocation", "BiogasMax", "Composite", "ConicProgram", "ConstraintSet", "Contois", "FIXED",
    "GeometricInteractive", "ImplicitEuler", "KineticsSpec", "Monod", "NetworkSchedule",
    "NonInteractive", "PERIODIC", "Scenario", "SetpointTracking", "Solution", "SolverOptions",
    "SubstrateOutflow", "TankNetwork", "TimeGrid", "ValidationError", "build_matrices",
    "build_steady_state", "build_transient", "certify", "dump_scenario", "find_steady_state",
    "forward_simulate", "is_outflow_connected", "load_scenario", "omega_certificate",
    "read_interchange", "residual_exactness", "scenario_from_config", "solve",
    "steady_state_certificate", "verify_kkt", "write_interchange",
]
