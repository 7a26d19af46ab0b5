"""Numerics for single-flip dynamics of the random ferromagnetic chain.

The package builds the one-flip sector of the heat-bath dynamics as a random
Jacobi matrix, counts spectrum near the edge (Monte Carlo integrated density
of states), computes disorder-averaged spin autocorrelations spectrally,
cross-checks them against a direct kinetic Monte Carlo simulation, and
evaluates the saddle-point decay envelopes implied by the coupling tail.
"""

from ._version import VERSION as __version__
from .asymptotics import (
    EnvelopeTable,
    LegendrePoint,
    RateFunction,
    envelope,
    legendre_min,
    rate_curvature,
    rate_derivative,
    rate_eval,
)
from .autocorr import (
    AutocorrResult,
    CorrelationSeries,
    center_mode_autocorr,
    center_spin_autocorr,
    disorder_average,
    disorder_spectra,
    free_chain_autocorr,
    ids_laplace,
)
from .disorder import (
    Cosh4Moment,
    CouplingField,
    DerivedField,
    Exponential,
    Stretched,
    TailModel,
    UniformBounded,
    derive,
    model_from_dict,
    model_to_dict,
    sample_couplings,
)
from .harness import (
    ConfigError,
    ExperimentConfig,
    run_autocorr,
    run_bounds,
    run_ids,
    run_kmc,
    run_report,
    run_validate,
)
from .kmc import SpinConfig, TrajectoryStats, gibbs_sample, glauber_rate, simulate_autocorr
from .onespin import JacobiMatrix, SpinWeights, build_generator, center_spin_weights
from .spectra import (
    IdsCurve,
    SiteClassification,
    SpectralDecomposition,
    calm_block_top,
    calm_spectral_bound,
    classify_sites,
    count_above,
    count_above_grid,
    coupling_threshold,
    eigensolve,
    estimate_ids,
    phase_count,
    regular_bond_count,
)
from .streams import stream

__all__ = [
    "__version__",
    "AutocorrResult",
    "ConfigError",
    "CorrelationSeries",
    "Cosh4Moment",
    "CouplingField",
    "DerivedField",
    "EnvelopeTable",
    "ExperimentConfig",
    "Exponential",
    "IdsCurve",
    "JacobiMatrix",
    "LegendrePoint",
    "RateFunction",
    "SiteClassification",
    "SpectralDecomposition",
    "SpinConfig",
    "SpinWeights",
    "Stretched",
    "TailModel",
    "TrajectoryStats",
    "UniformBounded",
    "build_generator",
    "calm_block_top",
    "calm_spectral_bound",
    "center_mode_autocorr",
    "center_spin_autocorr",
    "center_spin_weights",
    "classify_sites",
    "count_above",
    "count_above_grid",
    "coupling_threshold",
    "derive",
    "disorder_average",
    "disorder_spectra",
    "eigensolve",
    "envelope",
    "estimate_ids",
    "free_chain_autocorr",
    "gibbs_sample",
    "glauber_rate",
    "ids_laplace",
    "legendre_min",
    "model_from_dict",
    "model_to_dict",
    "phase_count",
    "rate_curvature",
    "rate_derivative",
    "rate_eval",
    "regular_bond_count",
    "run_autocorr",
    "run_bounds",
    "run_ids",
    "run_kmc",
    "run_report",
    "run_validate",
    "sample_couplings",
    "simulate_autocorr",
    "stream",
]
