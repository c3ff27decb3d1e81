"""Martingale-adjusted predictive sequences on discrete supports.

Fit a predictive distribution one observation at a time with a
Metropolis-adjusted kernel mixture, then quantify uncertainty either by
forward resampling or by a Gaussian large-horizon approximation.
"""
from .asymptotics import CovEstimate, gaussian_approx, one_step_cov, rate_r
from .errors import ConfigurationError, DataError, MadseqError, NumericalError
from .grids import (
    Binary,
    Count,
    EventSet,
    Functional,
    Pmf,
    SupportGrid,
    conditional,
    coordinate_functional,
    functional_mean,
    hellinger,
    make_grid,
    marginal,
    pmf_uniform,
)
from .kernels import (
    BaseKernelSpec,
    BinaryFlip,
    PointMass,
    RoundedGaussian,
    UniformWindow,
    base_kernel_row,
    kernel_event_row,
    kernel_spec,
    mh_kernel_row,
)
from .predictive import (
    Adaptive,
    CopulaConfig,
    CopulaMethod,
    CopulaState,
    DpmWeights,
    DpMethod,
    DpState,
    FitConfig,
    FitResult,
    MadMethod,
    MadState,
    PermutationFit,
    PowerLaw,
    SelectionResult,
    copula_update,
    dp_update,
    fit_sequence,
    initial_state,
    mad_update,
    permutation_averaged_fit,
    select_hyperparameters,
    update_state,
    weight_at,
)
from .resampling import (
    CredibleInterval,
    FunctionalPosterior,
    PairCorrelation,
    PosteriorDraws,
    ResampleConfig,
    posterior_functional,
    posterior_pair_correlation,
    predictive_resample,
)

__version__ = "0.1.0"

__all__ = [
    "Adaptive",
    "BaseKernelSpec",
    "Binary",
    "BinaryFlip",
    "ConfigurationError",
    "CopulaConfig",
    "CopulaMethod",
    "CopulaState",
    "Count",
    "CovEstimate",
    "CredibleInterval",
    "DataError",
    "DpMethod",
    "DpState",
    "DpmWeights",
    "EventSet",
    "FitConfig",
    "FitResult",
    "Functional",
    "FunctionalPosterior",
    "MadMethod",
    "MadState",
    "MadseqError",
    "NumericalError",
    "PairCorrelation",
    "PermutationFit",
    "Pmf",
    "PointMass",
    "PosteriorDraws",
    "PowerLaw",
    "ResampleConfig",
    "RoundedGaussian",
    "SelectionResult",
    "SupportGrid",
    "UniformWindow",
    "base_kernel_row",
    "conditional",
    "coordinate_functional",
    "copula_update",
    "dp_update",
    "fit_sequence",
    "functional_mean",
    "gaussian_approx",
    "hellinger",
    "initial_state",
    "kernel_event_row",
    "kernel_spec",
    "mad_update",
    "make_grid",
    "marginal",
    "mh_kernel_row",
    "one_step_cov",
    "permutation_averaged_fit",
    "pmf_uniform",
    "posterior_functional",
    "posterior_pair_correlation",
    "predictive_resample",
    "rate_r",
    "select_hyperparameters",
    "update_state",
    "weight_at",
]
