"""stokoop: verified spectral analysis of stochastic Koopman operators.

Assembles the Galerkin estimator matrices (G, A, L, H) from snapshot
data, solves for eigenpairs with expectation and variance residuals,
computes pseudospectra and variance-pseudospectra on complex grids, and
evaluates forecast-error and concentration bounds. Ships benchmark
systems with analytically known spectra.
"""

__version__ = "0.1.0"

from .bounds import (
    ConcentrationBounds,
    ConcentrationInputs,
    concentration_bounds,
    dictionary_constants,
    estimate_upsilon,
)
from .dictionary import (
    Dictionary,
    evaluate_matrix,
    fourier_dictionary,
    laplacian_rbf_dictionary,
    pick_centers,
)
from .errors import (
    BinningError,
    CapabilityError,
    ConfigError,
    InstabilityError,
    RankError,
    SnapshotParseError,
    SnapshotSchemaError,
)
from .forecast import (
    ForecastBoundInputs,
    chernoff_bound,
    deltas_from_reference,
    forecast_error_bound,
    iterate,
    koopman_matrix,
    operator_norm_estimate,
    subspace_error,
)
from .matrices import (
    KoopmanMatrices,
    assemble_batched,
    assemble_unbatched,
    estimation_error,
    export_matrices_csv,
    load_matrices,
    save_matrices,
)
from .pseudospectra import (
    KIND_RESIDUAL,
    KIND_VARIANCE,
    ComplexGrid,
    PseudospectrumGrid,
    default_grid,
    explicit_grid,
    min_residual,
    pseudospectrum,
    rectangle_grid,
    save_pseudospectrum_csv,
)
from .snapshots import (
    BatchedSnapshotSet,
    BinningSpec,
    SnapshotSet,
    bin_to_batched,
    flatten_batched,
    load_snapshots,
    monte_carlo_weights,
    periodic_trapezoid_weights,
    save_snapshots,
)
from .spectral import (
    RegularizationPolicy,
    ResidualReport,
    SpectralResult,
    covariance_matrix,
    evaluate_residuals,
    integrated_variance,
    res,
    res_var,
    residual_report,
    solve_eigenpairs,
)
from .systems import (
    CircleMapConfig,
    LatticePoint,
    VdpConfig,
    circle_alpha,
    circle_lipschitz,
    circle_reference_matrices,
    circle_step,
    circle_variance,
    generate_circle_batched,
    generate_circle_iid,
    vdp_batched_from_trajectory,
    vdp_drift,
    vdp_em_trajectory,
    vdp_lattice,
    vdp_unbatched_from_trajectory,
)
