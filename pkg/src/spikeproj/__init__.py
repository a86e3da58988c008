"""Asymptotics and tests for eigenprojections of spiked sample covariance.

Library layout:

- model:       population description (spikes + finite-atom bulk) and psi
- randgen:     seeded entry draws, fourth moments, localization coefficient
- stieltjes:   companion transform, derivatives, empirical spike estimator
- spectral:    sample covariance, eigendecomposition, projections
- asymptotics: centers and CLT variances of squared projections
- inference:   studentized eigenspace test
- experiments: seeded Monte Carlo drivers and reproduction targets
- cli:         `spikeproj` command line entry point
"""

from .errors import (
    BranchError,
    ConfigError,
    DegenerateSpikes,
    DimensionError,
    DivergentEstimate,
    InsideSupportError,
    InternalError,
    InvalidBasis,
    InvalidVector,
    IoError,
    NoBulkError,
    SingularityError,
    SpikeNotDetectable,
    SpikeProjError,
    SymmetryError,
    TailConditionError,
    VarianceError,
)
from .model import (
    BulkSpectrum,
    FactorDecomposition,
    PopulationModel,
    Rotation,
    SpikeSpec,
    build_model,
    empirical_population_law,
    factorize,
    psi,
    psi_prime,
    validate_spikes,
)
from .randgen import EntryDistribution, draw_entries, fourth_moment, kappa_x, replicate_rng
from .stieltjes import (
    EmpiricalTransform,
    TransformPoint,
    bulk_moments,
    companion_derivatives,
    companion_m,
    empirical_m,
    estimate_spike,
    multiroot_filter,
    transform_point,
)
from .spectral import (
    SampleSpectrum,
    eig_desc,
    match_spike_indices,
    projection_norm,
    sample_covariance,
)
from .asymptotics import ProjectionLaw, nu, nu_prime, projection_law
from .inference import (
    Hypothesis,
    TestOutcome,
    statistic_T,
    statistic_T1,
    statistic_T2,
    theta_omega,
    vartheta,
)
from .experiments import (
    ExperimentConfig,
    ExperimentReport,
    export_report,
    run_clt,
    run_experiment,
    run_power,
    run_size,
)

__version__ = "0.1.0"
