"""Score matching for directional data truncated to a spherical region.

Estimates von Mises-Fisher and five-parameter (Kent-type) models from
samples observed only inside a bounded region of the unit 2-sphere,
without computing normalizing constants or modeling the truncation
mechanism: the objective weights the score mismatch by a scaling function
that vanishes on the region boundary. Includes exact and rejection
samplers, truncation-blind and flat-chart baseline estimators, and a
benchmark command-line harness (`tmsm`).
"""

from .baselines import (
    ChartSegments,
    MvnChartModel,
    hemisphere_chart_segments,
    mle_vmf,
    rmse,
    rmse_embedding,
    rmse_summary,
    solve_concentration,
    truncsm_mvn,
)
from .bench import (
    BenchmarkRow,
    ExperimentConfig,
    GeoEventRecord,
    ingest_events,
    run_benchmark,
    run_kappa_benchmark,
    run_storms,
)
from .boundary import (
    Boundary,
    ColatitudeBoundary,
    PolylineBoundary,
    ScalingValue,
    default_drop_axis,
    g_haversine,
    g_projected_euclidean,
    haversine_distance,
    latlon_to_spherical,
    load_boundary_csv,
    nearest_boundary_point,
    spherical_to_latlon,
)
from .estimator import (
    Dataset,
    EstimationResult,
    ObjectiveTerms,
    estimate,
    ibp_identity_check,
    tmsm_objective,
)
from .geometry import (
    SphericalCoord,
    geodesic_angle,
    laplace_beltrami,
    manifold_inner,
    projection,
    to_euclidean,
    to_spherical,
)
from .models import (
    KentParams,
    VmfParams,
    log_unnormalized_density,
    score,
    score_jacobian,
)
from .sampling import (
    SampleRequest,
    TruncatedSample,
    sample_kent,
    sample_truncated,
    sample_vmf,
    substream_rng,
)

__version__ = "0.1.0"

__all__ = [
    "Boundary",
    "BenchmarkRow",
    "ChartSegments",
    "ColatitudeBoundary",
    "Dataset",
    "EstimationResult",
    "ExperimentConfig",
    "GeoEventRecord",
    "KentParams",
    "MvnChartModel",
    "ObjectiveTerms",
    "PolylineBoundary",
    "SampleRequest",
    "ScalingValue",
    "SphericalCoord",
    "TruncatedSample",
    "VmfParams",
    "default_drop_axis",
    "estimate",
    "g_haversine",
    "g_projected_euclidean",
    "geodesic_angle",
    "haversine_distance",
    "hemisphere_chart_segments",
    "ibp_identity_check",
    "ingest_events",
    "laplace_beltrami",
    "latlon_to_spherical",
    "load_boundary_csv",
    "log_unnormalized_density",
    "manifold_inner",
    "mle_vmf",
    "nearest_boundary_point",
    "projection",
    "rmse",
    "rmse_embedding",
    "rmse_summary",
    "run_benchmark",
    "run_kappa_benchmark",
    "run_storms",
    "sample_kent",
    "sample_truncated",
    "sample_vmf",
    "score",
    "score_jacobian",
    "solve_concentration",
    "spherical_to_latlon",
    "substream_rng",
    "tmsm_objective",
    "to_euclidean",
    "to_spherical",
    "truncsm_mvn",
]
