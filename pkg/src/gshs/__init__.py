"""Simulation and numerical-verification lab for kinetic Langevin
systems with general velocity potentials, their Gibbs measures,
generators, martingale structure, varying-Hilbert-space convergence and
overdamped limit."""

from .potentials import (PotentialSpec, GrowthConstants, GrowthReport,
                         quadratic_potential, quartic_potential,
                         double_well_potential, lennard_jones_potential,
                         linear_potential, zero_potential,
                         expression_potential, make_potential,
                         scale_velocity_potential, check_growth_condition)
from .testfunctions import (TestFunction, product_bump, radial_bump,
                            position_plus_velocity_coordinate,
                            velocity_coordinate, position_coordinate,
                            lift_position, lift_velocity, hermite_function,
                            tf_linear_combination, tf_square,
                            constant_function)
from .measures import (GibbsMeasure, InitialDistribution, SamplerStuckError,
                       normalize, weighted_l2_inner, weighted_l2_norm,
                       moment, sample, marginal_cdf_table)
from .assumptions import (AssumptionEntry, AssumptionReport,
                          validate_assumptions)
from .generator import (DomainViolationError, apply_gshs_generator,
                        apply_overdamped_generator, decompose,
                        apply_adjoint_generator, invariance_residual,
                        relative_invariance_residual, carre_du_champ,
                        generator_action)
from .dynamics import (SdeConfig, PathEnsemble, PathBlowupError,
                       NumericFailure, ResolutionWarning, simulate_gshs,
                       simulate_overdamped, martingale_process,
                       quadratic_compensator, save_ensemble, load_ensemble,
                       export_ensemble_csv)
from .scaling import (CutoffFunction, build_cutoff, embed,
                      norm_convergence_curve, generator_summand_norms,
                      SummandReport, embedded_inner)
from .stats import (FddSample, fdd_from_ensemble, phase_metric,
                    energy_distance, martingale_zscores,
                    default_weight_battery, ZScore,
                    empirical_quadratic_variation, cross_variation,
                    increment_moment_diagnostic, rescale_ensemble,
                    semigroup_estimate, ou_fdd_sample,
                    overdamped_limit_experiment)
from .report import ConvergenceReport
from .config import (ExperimentConfig, PotentialConfig, SdeSettings,
                     ConfigError, load_config, save_config, config_hash)
from .quadrature import QuadratureError

__version__ = "0.1.0"
