"""Toolkit for the power-of-two long-range Ising ring: coupling graphs,
classical spectra, Monte Carlo, sparse diagonalization, finite-size scaling,
and the circular two-species atom geometry that realizes the couplings.
"""

from .errors import (
    Pwr2LabError,
    ValidationError,
    NumericalError,
    InvalidSize,
    SizeMismatch,
    TooLarge,
    DisconnectedGraph,
    InvalidK,
    InvalidDistance,
    NotNormalized,
    InvalidMomentum,
    ManifoldNotExited,
    ConvergenceFailure,
    NoCrossing,
    AmbiguousCrossing,
    WindowTooNarrow,
    InsufficientPairs,
    FitFailure,
    InvalidGap,
    NoBoundaryFound,
    InvalidDisplacement,
    DegenerateGeometry,
)
from ._bits import derive_seed
from .graph import (
    SIGN_AFM,
    SIGN_FM,
    SpinConfiguration,
    CouplingGraph,
    DistanceMatrix,
    ring_distances,
    coupling_value,
    build_ring_couplings,
    build_pwr2_couplings,
    monna_map,
    monna_permutation,
    recursive_ground_state,
    euclidean_afm,
    monna_mapped_afm,
    two_adic_distance,
    graph_metric,
    direct_metric,
    save_graph,
    load_graph,
)
from .classical import (
    Spectrum,
    GapPrediction,
    PhaseBoundaries,
    classical_energy,
    enumerate_spectrum,
    analytic_gap,
    phase_boundaries,
)
from .mcmc import (
    McmcPlan,
    GapEstimate,
    ChainResult,
    run_single_chain,
    metropolis_sweep,
    estimate_low_spectrum,
)
from .lid import (
    knn_distances,
    lid_mle,
    lid_profile,
    mean_lid,
    ring_lid_constant,
    line_lid_constant,
)
from .quantum import (
    Hamiltonian,
    EigenSolution,
    build_hamiltonian,
    lowest_eigenpairs,
    ground_with_gap,
    spectral_gap,
    entanglement_entropy,
    entropy_profile,
    correlation_matrix,
    connected_structure_factor,
    second_moment_xi,
    z2_symmetric_ground,
)
from .fss import (
    PhiCurve,
    ScalingEstimate,
    ExtrapolationResult,
    phi_curve,
    save_curve,
    load_curve,
    find_crossing,
    estimate_nu,
    estimate_z,
    estimate_pair,
    extrapolate_exponent,
    leave_one_out_systematics,
    central_charge_fit,
)
from .rydgeo import (
    GeometryMapping,
    SpeciesAssignment,
    tambourine_positions,
    chord_distance,
    chord_distances,
    s_of_h,
    species_pattern,
    rydberg_couplings,
    mapping_residual,
)

__version__ = "0.1.0"
