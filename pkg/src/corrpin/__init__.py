"""Annealed pinning model with correlated Gaussian disorder.

Exact annealed partition functions, Gurevich pressure of the associated
transfer operator with rigorous truncation brackets, the annealed
critical curve and free energy, and Monte Carlo quenched-disorder
cross-checks.
"""

__version__ = "0.1.0"

from ._backend import BACKEND, have_compiled
from .correlations import (
    CorrelationModel,
    delta_correction,
    exponential_model,
    finite_model,
    model_from_config,
    power_model,
    rho,
    sample_gaussian,
    tail_abs_sum,
    truncate,
    validate_covariance,
    zero_model,
)
from .critical import (
    CriticalPoint,
    ExponentFit,
    FreeEnergyPoint,
    PressureSolver,
    annealed_free_energy,
    critical_curve,
    exponent_fit,
    small_beta_check,
    upper_bound_finite_mean,
)
from .logdomain import INFINITE, LogWeight, is_infinite
from .montecarlo import (
    MCEstimate,
    annealed_identity_check,
    jensen_gap,
    quenched_free_energy_mc,
)
from .partition import (
    annealed_log_z_bracket,
    annealed_log_z_bruteforce,
    annealed_log_z_dp,
    log_z_grid,
    past_log_z,
    quenched_log_z,
)
from .renewal import (
    RenewalLaw,
    RenewalMassTable,
    finite_law,
    geometric_law,
    homogeneous_free_energy,
    homogeneous_log_z,
    k_mass,
    law_from_config,
    log_zeta_law,
    mean_gap,
    renewal_mass,
    zeta_law,
)
from .transfer import (
    PotentialSpec,
    PressureEstimate,
    SpectralResult,
    TransferOperator,
    build_transfer,
    gibbs_gap_marginal,
    gurevich_pressure,
    mean_gap_gibbs,
    periodic_orbit_pressure,
    rpf_eigenfunction_limit,
    spectral,
)
