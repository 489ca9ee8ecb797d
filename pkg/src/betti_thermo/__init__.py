"""Cech complexes on sampled point processes and the thermodynamic-regime
limits of their expected Betti numbers."""

from betti_thermo.cech import (
    MINIBALL_TOL,
    CechError,
    NeighborGrid,
    SimplicialComplex,
    build_cech,
    build_rips,
    min_enclosing_ball_radius,
    simplex_count,
    simplices_touching,
    vertex_simplex_count,
)
from betti_thermo.homology import (
    BettiVector,
    BoundaryMatrix,
    HomologyError,
    betti_diff_bound_check,
    betti_numbers,
    boundary_matrix,
    connected_components,
    euler_check,
    rank_gf2,
)
from betti_thermo.limits import (
    ConvergenceTable,
    CurveCoverageError,
    EstimateRecord,
    GapRow,
    GapTable,
    IntegralEstimate,
    LimitCurve,
    LimitsError,
    PerturbReport,
    ScalingReport,
    StripReport,
    boundary_strip_check,
    build_limit_curve,
    convergence_table,
    estimate_betti_rate,
    estimate_binomial_expectation,
    estimate_poissonized_expectation,
    estimate_simplex_rate,
    intensity_perturbation_check,
    load_or_build_curve,
    poissonization_gap,
    scaling_check,
    thermodynamic_integral,
)
from betti_thermo.pointproc import (
    DensityGrid,
    IntensityGrid,
    PointCloud,
    RngStream,
    Window,
    poissonize,
    sample_binomial,
    sample_poisson_homogeneous,
    sample_poisson_intensity,
    scale_points,
    superpose,
)

__version__ = "0.1.0"

__all__ = [
    "MINIBALL_TOL",
    "CechError",
    "NeighborGrid",
    "SimplicialComplex",
    "build_cech",
    "build_rips",
    "min_enclosing_ball_radius",
    "simplex_count",
    "simplices_touching",
    "vertex_simplex_count",
    "BettiVector",
    "BoundaryMatrix",
    "HomologyError",
    "betti_diff_bound_check",
    "betti_numbers",
    "boundary_matrix",
    "connected_components",
    "euler_check",
    "rank_gf2",
    "ConvergenceTable",
    "CurveCoverageError",
    "EstimateRecord",
    "GapRow",
    "GapTable",
    "IntegralEstimate",
    "LimitCurve",
    "LimitsError",
    "PerturbReport",
    "ScalingReport",
    "StripReport",
    "boundary_strip_check",
    "build_limit_curve",
    "convergence_table",
    "estimate_betti_rate",
    "estimate_binomial_expectation",
    "estimate_poissonized_expectation",
    "estimate_simplex_rate",
    "intensity_perturbation_check",
    "load_or_build_curve",
    "poissonization_gap",
    "scaling_check",
    "thermodynamic_integral",
    "DensityGrid",
    "IntensityGrid",
    "PointCloud",
    "RngStream",
    "Window",
    "poissonize",
    "sample_binomial",
    "sample_poisson_homogeneous",
    "sample_poisson_intensity",
    "scale_points",
    "superpose",
    "__version__",
]
