"""Generalized fiducial distributions from data-generating equations."""

__version__ = "0.1.0"

from .coverage import CoverageReport, run_coverage, run_coverage_levels
from .density import (
    FiducialDensity,
    density_cdf_quantile,
    fisher_fiducial,
    ks_distance,
    tabulate_gfd,
    tabulate_posterior,
)
from .discrete import (
    DiscreteFiducialBounds,
    FiducialInterval,
    SlpDemoReport,
    discrete_bounds,
    half_corrected_interval,
    model_bounds,
    slp_violation_demo,
)
from .errors import *  # noqa: F401,F403
from .grid import ParameterGrid
from .jacobian import (
    ConditionalReport,
    JacobianResult,
    check_ancillary,
    jacobian_full,
    jacobian_sufficient,
    jacobian_values,
    verify_conditional_representation,
)
from .model import (
    DataGeneratingEquation,
    make_binomial,
    make_geometric,
    make_location,
    make_normal_location_scale,
    make_two_instrument,
)
from .principles import (
    SeparabilityReport,
    SlpPairReport,
    WcpReport,
    check_separability,
    check_slp_pair,
    check_slp_pair_sequential,
    wcp_demo,
)
from .sampler import SampleMeta, SampleSet, sample_from_density, sample_gfd_discrete, sample_gfd_eps, sample_gfd_ladder
