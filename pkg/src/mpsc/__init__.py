"""Predictive safety certification for linear systems.

A learning controller proposes inputs; the filter passes them through when a
tube-robust backup plan into a safe terminal set exists and otherwise applies
the closest certifiable input.  The tube cross-section is an ellipsoid designed
from sampled model-mismatch residuals.
"""

from .core import MpscConfig, MpscSolution, certify_pass_through, solve_mpsc, validate_solution
from .enlargement import (EnlargementLog, TerminalController, TubeSet, enlarge_measured,
                          enlarge_nominal, init_trivial, terminal_control)
from .errors import (ConfigError, DimensionError, EmptySetWarning, EnlargementWarning, MpscError,
                     RecursiveFeasibilityError, SafetyFault, SolverFailure)
from .geometry import (Ellipsoid, Polytope, VertexHull, hull_add_points, hull_membership_weights,
                       tighten_input, tighten_state)
from .linsys import LinearModel, Trajectory, TubeGain, lqr_gain, step_nominal, step_plant
from .safety_filter import (FilterDecision, FilterState, filter_step, is_in_safe_set,
                            run_closed_loop)
from .scenario import (RpiDesign, ScenarioBound, ScenarioSet, build_scenarios, design_rpi,
                       epsilon_for_confidence, scenario_confidence)

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DimensionError", "Ellipsoid", "EmptySetWarning", "EnlargementLog",
    "EnlargementWarning", "FilterDecision", "FilterState", "LinearModel", "MpscConfig",
    "MpscError", "MpscSolution", "Polytope", "RecursiveFeasibilityError", "RpiDesign",
    "SafetyFault", "ScenarioBound", "ScenarioSet", "SolverFailure", "TerminalController",
    "Trajectory", "TubeGain", "TubeSet", "VertexHull", "build_scenarios", "certify_pass_through",
    "design_rpi", "enlarge_measured", "enlarge_nominal", "epsilon_for_confidence",
    "filter_step", "hull_add_points", "hull_membership_weights", "init_trivial",
    "is_in_safe_set", "lqr_gain", "run_closed_loop", "scenario_confidence", "solve_mpsc",
    "step_nominal", "step_plant", "terminal_control", "tighten_input", "tighten_state",
    "validate_solution",
]
