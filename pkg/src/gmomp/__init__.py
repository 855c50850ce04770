"""Greedy sparse recovery whose supports follow connected, Lipschitz structures."""

from .analysis import (babel, babel_values, bernoulli_connectivity_bound, beta_threshold,
                       coloring_reduction, exact_recovery_condition, recovery_report,
                       uniform_noise_tau)
from .dictionary import (Dictionary, bspline_dictionary, bspline_eval, build_dictionary,
                         gabor_conv_dictionary, gaussian_conv_dictionary, identity_dictionary)
from .postprocess import (FittedStructure, denoise_amplitudes, denoise_pattern,
                          fit_pattern_polynomial, round_to_parameter, transfer_amplitudes)
from .solver import (Solution, StopCriteria, gm_omp, greedy_choice, omp, omp_per_column,
                     omp_vectorized, restricted_least_squares, somp, weakness)
from .spaces import (INF, FeasibleParams, MetricKind, Pattern, PointSpace, are_intersecting,
                     is_connected, is_feasible, satisfies_lipschitz)

__version__ = "0.1.0"
