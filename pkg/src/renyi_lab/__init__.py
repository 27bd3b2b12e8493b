"""Renyi entropy rates of processes under cost and autocovariance constraints.

All entropies are in nats. Densities live on uniform grids and integrals use
the midpoint rule.
"""

from .burg import (
    ARModel,
    AutocovSpec,
    SandwichReport,
    fit_burg,
    gauss_markov_shannon_rate,
    jacobi_eigh,
    levinson_durbin,
    renyi_rate_sandwich,
    simulate_ar,
    spectral_init,
    verify_burg_constraints,
)
from .density_core import (
    CostSpec,
    EntropyValue,
    ExpFamilyDensity,
    Gaussian,
    GridDensity,
    Uniform,
    cost_expectation,
    kl_divergence,
    linear_cost,
    quadratic_cost,
    quantize,
    renyi_entropy,
    shannon_entropy,
    tabulated_cost,
)
from .errors import (
    ConstructionError,
    InfeasibleError,
    InstabilityError,
    NotPositiveDefiniteError,
    RenyiLabError,
    TailMassError,
    ValidationError,
)
from .estimators import BurgAR, MaxEntDensity
from .maxent import fine_line_gap, hstar_curve, maxent_entropy, optimality_probe, solve_maxent
from .mixtures import MixtureSpec, TwoSetBlock, build_alpha_small_block, mixture_entropy, renyi_mixture_bounds
from .stationarize import (
    BlockProcess,
    RateBoundReport,
    build_block_process,
    construct_second_moment_process,
    exact_window_entropy,
    window_rate_bounds,
)
from .truncation import bounded_approximation, restrict_domain, truncate_bound
from .typicality import TypicalBlockDensity, TypicalSpec, build_typical_block, typical_mass

__version__ = "0.1.0"
