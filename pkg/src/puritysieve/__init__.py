"""Exact small-model decoherence toolkit.

Exact evolution of a system coupled to a small environment through
factorizable interactions, purity diagnostics and pointer-state selection
(canonical and modified purity sieves), and the Gaussian-level analysis of a
trapped particle in a particle bath.
"""

from .qcore import (
    IDENTITY_2,
    SIGMA_X,
    SIGMA_Y,
    SIGMA_Z,
    SpaceLayout,
    density_matrix,
    embed,
    ket,
    kron,
    maximally_mixed,
    mean_dispersion,
    normalized,
    partial_trace,
    propagator,
    pure_density,
    purity,
)
from .dynamics import (
    FactorizedModel,
    PointerEstimate,
    ProductEvolution,
    PuritySeries,
    SchmidtSpectrum,
    assemble_total,
    central_spin_model,
    evolve_product,
    master_equation_residual,
    pointer_power,
    purity_series,
    schmidt_spectrum,
    spin_star_model,
)
from .sieve import (
    EffectiveHamiltonian,
    OptimizerConfig,
    SieveResult,
    StateChart,
    UnsupportedModelError,
    canonical_sieve,
    default_horizon,
    dispersion_integral,
    effective_hamiltonian,
    modified_sieve,
    numeric_second_derivative,
    short_time_coefficient,
)
from .oscillator import (
    GaussianState,
    QbmParams,
    TransformedModel,
    effective_frequency,
    gaussian_evolve,
    period_integrals,
    qbm_objective,
    qbm_pointer_state,
    qbm_sieve,
    transform_model,
)

__version__ = "0.1.0"
