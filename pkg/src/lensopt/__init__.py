"""Phase-field shape and topology optimization of acoustic lenses.

The package solves a semilinear strongly damped wave equation on a fixed
rectangular domain, its adjoint, and assembles the reduced gradient of a
tracking objective regularized by a Ginzburg-Landau interface energy;
a projected-gradient loop minimizes over box-constrained phase fields and
sharp-interface tooling probes the small-interface-width limit.
"""

from .errors import (InfeasiblePhaseFieldError, LensoptError, LinearSolveError,
                     PicardDivergenceError, ScenarioError)
from .grid import (Grid, assemble_boundary_load, assemble_graddot_load,
                   assemble_weighted_mass, assemble_weighted_stiffness,
                   build_grid, norm_h1, norm_l2, solve_spd)
from .medium import (CoefficientFields, GLParams, MediumParams,
                     coefficient_derivatives, gl_energy, gl_gradient,
                     interpolate_coefficients, project_box)
from .wave import (AlphaCoefficient, PicardReport, SourceSpec, WaveTrajectory,
                   energy_identity_residual, solve_linearized, solve_state,
                   time_weights, u_norm, x_norm)
from .adjoint import AdjointTrajectory, solve_adjoint
from .gradient import (GradientField, ObjectiveValue, evaluate_objective,
                       fd_directional, objective_from_state, reduced_gradient,
                       smooth_gradient, solve_sensitivity, tracking_derivative,
                       tracking_misfit)
from .optimizer import (IterateRecord, OptimizeResult, OptimizerConfig,
                       optimize, stationarity_measure)
from .sharp import (PROFILE_CONSTANT, SweepResult, SweepRow, eps_sweep,
                    optimal_profile_energy, perimeter_tv, sharp_objective,
                    threshold)
from .scenario import (DEFAULT_CONFIG, Scenario, load_scenario,
                       scenario_from_config)

__version__ = "0.1.0"
