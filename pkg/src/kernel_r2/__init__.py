"""Kernel integrated R^2: a kernel dependence measure, its estimators and tests."""
__version__ = "0.1.0"

from ._accel import NUMBA_ENABLED
from .errors import *  # noqa: F401,F403
from .estimators import (EstimatorResult, SampleSet, d_knn, d_knn_naive, d_rkhs, estimate,
                         eta_knn, eta_rkhs, make_statistic, xi_n)
from .kernels import (KernelSpec, brownian, eval_kernel, gaussian, gaussian_median,
                      gram_matrix, median_heuristic_bandwidth, so3, so3_geodesic_angle)
from .oracle import (DiscreteJoint, population_d_alt_discrete, population_d_discrete,
                     population_eta_discrete, sample_from_joint)
from .permtest import permutation_test, power_curve, power_estimate
