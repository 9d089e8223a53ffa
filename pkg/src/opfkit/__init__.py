"""Optimal power flow on radial networks through conic relaxations.

The package models tree-shaped distribution feeders in per-unit, checks
a-priori conditions under which the second-order-cone relaxation of OPF is
exact, solves the plain and the modified relaxations, certifies exactness,
recovers physical voltages, and measures how closely the lossless linear
voltage model tracks the exact one on the bundled utility feeders.
"""

from .branchflow import (BranchFlowPoint, check_lemma1_bounds, exactness_gap,
                         feasibility, objective_value)
from .certificate import (ImprovementResult, KeyStepData, check_matrix_lemma,
                          construct_improved_point, find_violating_line,
                          improve_with_line_search, key_step_check,
                          two_bus_counterexample)
from .errors import (ImprovementError, InfeasibleError, NetworkFormatError, OpfkitError,
                     PowerFlowError, RecoveryError, SolverError, TopologyError,
                     ValidationError)
from .lindistflow import (ACoefficients, C1Report, ConditionReport, EpsilonReport,
                          a_coefficients, check_c1, check_proposition_conditions,
                          check_well_constrained, condition_report, epsilon_metric,
                          linear_flow, linear_voltage, minimum_interval, rx_range,
                          subtree_injection)
from .netmodel import (LOSS, SUM_COST, BaseSystem, Box, Bus, CapacitorDiscrete,
                       ConstantPF, Fixed, InjectionSum, InverterPV, Line, LinearCost,
                       Network, QuadraticCost, convexify, injection_box, load_network,
                       merge_zero_impedance, network_from_components, path_to_root,
                       serialize, subtree_buses)
from .powerflow import PowerFlowSolution, pf_residual, solve_power_flow, to_branch_flow
from .socp import (SOCP, SOCP_M, RelaxationProblem, SocpSolution, SolveSettings,
                   build_relaxation, recover_voltages, resolve_discrete_capacitors,
                   solve, solve_network)

__version__ = "0.1.0"
