"""Numerics for random Schroedinger operators on the lattice.

Finite-volume Hamiltonians with Dirichlet, periodic, or quasimomentum
boundary conditions, the integrated density of states and its periodic
approximation, a resolvent-integral functional calculus for compactly
supported smooth functions, and the probabilistic probes (eigenvalue
counting bounds, multiscale schedule arithmetic, regularity tests) that
accompany localization estimates at weak disorder.
"""

from .bands import (
    BandEdgeReport,
    BandStructure,
    BrillouinZone,
    brillouin_zone,
    check_regularity,
    compute_bands,
    estimate_lipschitz,
    find_band_edges,
)
from .config import ConfigError, build_model, config_hash, load_config, resolve_config
from .disorder import DisorderModel, DisorderSample, sample_disorder
from .hamiltonian import (
    AssembledHamiltonian,
    BoundaryCondition,
    GridSpec,
    PeriodicPotential,
    SingleSitePotential,
    assemble_anderson,
    assemble_h0,
    assemble_periodic_approx,
    box_sites,
    validate_single_site,
)
from .hscalc import (
    AlmostAnalyticExtension,
    CutoffFunction,
    QuadratureSpec,
    SmoothCompactFunction,
    dbar_bound_check,
    extend,
    lemma_integral_check,
    leibniz_constant,
    matrix_function_eigh,
    matrix_function_hs,
    plateau_function,
    shifted_weight,
    smoothstep,
)
from .ids import (
    DisorderAverage,
    IdsCurve,
    LifshitzFit,
    average_ids,
    band_edge_mass,
    ids_difference_experiment,
    ids_dirichlet_box,
    ids_periodic_approx,
    lifshitz_fit,
    mass_window,
    smoothed_functional,
)
from .model import AndersonModel, align_band_edge
from .probes import (
    GapProbabilityEstimate,
    MsaSchedule,
    alpha_n_feasible,
    combes_thomas_profile,
    fixed_theta_check,
    gap_probability,
    m_regularity_test,
    msa_schedule,
    theta_average_check,
    wilson_interval,
)
from .runner import CheckFailure, ResultEnvelope, VERSION, parallel_map, run

__version__ = VERSION

__all__ = [
    "AndersonModel",
    "AssembledHamiltonian",
    "AlmostAnalyticExtension",
    "BandEdgeReport",
    "BandStructure",
    "BoundaryCondition",
    "BrillouinZone",
    "CheckFailure",
    "ConfigError",
    "CutoffFunction",
    "DisorderAverage",
    "DisorderModel",
    "DisorderSample",
    "GapProbabilityEstimate",
    "GridSpec",
    "IdsCurve",
    "LifshitzFit",
    "MsaSchedule",
    "PeriodicPotential",
    "QuadratureSpec",
    "ResultEnvelope",
    "SingleSitePotential",
    "SmoothCompactFunction",
    "VERSION",
    "align_band_edge",
    "alpha_n_feasible",
    "assemble_anderson",
    "assemble_h0",
    "assemble_periodic_approx",
    "average_ids",
    "band_edge_mass",
    "box_sites",
    "brillouin_zone",
    "build_model",
    "check_regularity",
    "combes_thomas_profile",
    "compute_bands",
    "config_hash",
    "dbar_bound_check",
    "estimate_lipschitz",
    "extend",
    "find_band_edges",
    "fixed_theta_check",
    "gap_probability",
    "ids_difference_experiment",
    "ids_dirichlet_box",
    "ids_periodic_approx",
    "leibniz_constant",
    "lemma_integral_check",
    "lifshitz_fit",
    "load_config",
    "m_regularity_test",
    "mass_window",
    "matrix_function_eigh",
    "matrix_function_hs",
    "msa_schedule",
    "parallel_map",
    "plateau_function",
    "resolve_config",
    "run",
    "sample_disorder",
    "shifted_weight",
    "smoothed_functional",
    "smoothstep",
    "theta_average_check",
    "validate_single_site",
    "wilson_interval",
]
