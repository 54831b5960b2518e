"""Joint estimation of a lognormal accelerated-failure-time duration and an
ordered-probit category with correlated normal errors."""

from .errors import (ConfigurationError, ConvergenceError, DataError, DomainError,
                     JointModelError, SchemaError)
from .estimator import (EstimationResult, estimate, hessian_standard_errors,
                        inverse_reparameterize, reparameterize, standard_errors)
from .inference import (adjusted_rho_squared, correlation_matrix, descriptive_stats,
                        duration_marginal_effects, likelihood_ratio_test, marginal_effects,
                        ordinal_marginal_effects)
from .likelihood import (LikelihoodValue, ParameterVector, joint_log_density,
                         log_likelihood_gradient, std_normal_cdf, std_normal_pdf,
                         total_log_likelihood)
from .model import (Dataset, DerivedColumn, EstimationSettings, ModelSpec, Observation,
                    build_design_matrices, categorize_travel_time, make_interaction,
                    make_threshold_indicator)
from .network import EgoNetwork, continuous_heterogeneity, iqv, network_size
from .simulate import (SimulationConfig, draw_correlated_errors, evacuation_config,
                       recovery_experiment, simulate_dataset)

__version__ = "0.1.0"
