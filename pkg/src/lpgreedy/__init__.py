"""Greedy sparse approximation in finite-dimensional lp spaces.

Public surface: space geometry (lp_space, norming functionals, modulus
estimates), dictionary construction and target generation, the greedy run
drivers (exact and approximate), diagnostics over run reports, and the CLI
entry point in :mod:`lpgreedy.harness`.
"""

from .algorithms import (ALGORITHM_IDS, IterationRecord, RunReport,
                         WeaknessSchedule, run_greedy)
from .diagnostics import (BOUND_IDS, AuditReport, BoundSpec, audit_conditions,
                          bound_curve, error_reduction_margins, rate_bound,
                          verify_rates)
from .dictionary import (Dictionary, Target, TargetSpec, build_dictionary,
                         greedy_select, make_target, perturb_target,
                         sample_a1_target)
from .perturbation import (AWBGA_IDS, ErrorSchedule, PerturbedFunctional,
                           SequenceSpec, derived_eps_bound,
                           perturbed_functional, relaxed_minimize, run_awbga)
from .solvers import (ProjectionResult, SolverConfig, bracket_minimum,
                      chebyshev_project, line_search, minimize_2d)
from .space import (DualFunctional, Element, LpSpace, apply_functional,
                    dict_dual_norm, empirical_modulus, lp_space, norm,
                    norming_functional, smoothness_bound, xi_root)
from .tolerances import DEFAULT_TOLS, Tolerances

__version__ = "0.1.0"

__all__ = [
    "ALGORITHM_IDS", "AWBGA_IDS", "BOUND_IDS", "AuditReport", "BoundSpec",
    "DEFAULT_TOLS", "Dictionary", "DualFunctional", "Element",
    "ErrorSchedule", "IterationRecord", "LpSpace", "PerturbedFunctional",
    "ProjectionResult", "RunReport", "SequenceSpec", "SolverConfig",
    "Target", "TargetSpec", "Tolerances", "WeaknessSchedule",
    "apply_functional", "audit_conditions", "bound_curve",
    "bracket_minimum", "build_dictionary", "chebyshev_project",
    "derived_eps_bound", "dict_dual_norm", "empirical_modulus",
    "error_reduction_margins", "greedy_select", "line_search", "lp_space",
    "make_target", "minimize_2d", "norm", "norming_functional",
    "perturb_target", "perturbed_functional", "rate_bound",
    "relaxed_minimize", "run_awbga", "run_greedy", "sample_a1_target",
    "smoothness_bound", "verify_rates", "xi_root",
]
