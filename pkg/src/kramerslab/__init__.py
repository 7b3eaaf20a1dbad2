"""Numerical laboratory for the high-activation-energy limit of a double-well
drift-diffusion on a cylinder and its two-species reaction-diffusion limit."""

from .enthalpy import (EnthalpyProfile, SkewedEnthalpy, from_coefficients,
                       quartic_default, skewed, validate)
from .gibbs import (EPS_CEIL, EPS_FLOOR, GibbsMeasure, LimitMeasure,
                    laplace_i, laplace_i_shifted, laplace_z,
                    log_barrier_integral, log_laplace_i, log_partition,
                    log_tau, tau)
from .grid_forms import (Field, FormMatrices, Grid, LimitField,
                         LimitFormMatrices, a_form, assemble, assemble_limit,
                         assemble_limit_rates, b_form, build_grid,
                         energy_split, graded_nodes, pair_limit, pair_measure)
from .transition import (TransitionProfile, k_eps, lift, limit_rate, q_eps,
                         transition_cost, transition_mass, transition_profile)
from .evolve_kramers import (LinearSolver, SolverError, Trajectory,
                             energy_identity_residual, regularization_check,
                             solve, step_theta)
from .evolve_limit import (LimitTrajectory, homogeneous_pair_solution,
                           limit_energy_identity, solve_limit)
from .convergence import (ConvergenceReport, StudyConfig, cutoff_average,
                          cutoff_mass, gamma_limsup_check,
                          nonlinear_observable, nonlinear_observable_limit,
                          regime_study, run_ladder_study, theorem1_study,
                          theorem2_study, traces)

__version__ = "0.1.0"
