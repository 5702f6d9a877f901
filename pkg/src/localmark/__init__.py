"""Local and global mark correlation analysis for spatial point patterns.

Supports real-valued and curve-valued marks, patterns in polygonal windows
or on linear networks, kernel estimation of mark correlation curves, and
permutation-based global rank envelope tests with extreme-rank-length
ordering, applied globally or point by point.
"""

__version__ = "1.0.0"

from .exceptions import DegenerateStatisticError, InputDataError, LocalmarkError
from .geometry import (
    LinearNetwork,
    NetworkLocation,
    Point2,
    Window,
    build_network,
    build_window,
    euclidean_distance,
    network_distance,
    network_distance_matrix,
)
from .pattern import (
    FunctionalMarks,
    MarkedPointPattern,
    MarkSummary,
    RealMarks,
    mark_summary,
    pairwise_distances,
)
from .testfuncs import (
    CLI_ALIASES,
    KINDS,
    MarkContext,
    TestFunctionSpec,
    global_normalizer,
    local_normalizer,
    pair_score,
)
from .estimate import (
    EstimationConfig,
    PointwiseSurface,
    SummaryCurve,
    global_kappa,
    global_kappa_functional,
    integrate_over_t,
    local_c,
    local_kappa,
    local_kappa_functional,
    local_kappa_network,
    make_config,
    pointwise_local_c_functional,
    stoyan_bandwidth,
)
from .envelope import (
    EnvelopeResult,
    LocalTestReport,
    PermutationSet,
    SignificantRange,
    envelope_test,
    erl_order,
    erl_pvalues,
    global_envelope_test,
    local_association_test,
    permute_marks,
    pointwise_ranks,
    significant_ranges,
)
from .simulate import (
    SCENARIOS,
    MarkLaw,
    ScenarioConfig,
    StudySummary,
    apply_scenario,
    place_discs,
    replicate_study,
    rpoisnet,
    rpoispp,
    run_replicate,
    unit_square,
)

__all__ = [
    "__version__",
    "LocalmarkError", "InputDataError", "DegenerateStatisticError",
    "Point2", "NetworkLocation", "Window", "LinearNetwork",
    "build_window", "build_network", "euclidean_distance",
    "network_distance", "network_distance_matrix",
    "RealMarks", "FunctionalMarks", "MarkSummary", "MarkedPointPattern",
    "mark_summary", "pairwise_distances",
    "KINDS", "CLI_ALIASES", "TestFunctionSpec", "MarkContext",
    "pair_score", "local_normalizer", "global_normalizer",
    "EstimationConfig", "SummaryCurve", "PointwiseSurface",
    "make_config", "stoyan_bandwidth", "local_c", "local_kappa",
    "local_kappa_network", "local_kappa_functional", "global_kappa",
    "global_kappa_functional", "pointwise_local_c_functional",
    "integrate_over_t",
    "PermutationSet", "EnvelopeResult", "SignificantRange", "LocalTestReport",
    "permute_marks", "pointwise_ranks", "erl_order", "erl_pvalues",
    "envelope_test", "significant_ranges", "local_association_test",
    "global_envelope_test",
    "SCENARIOS", "MarkLaw", "ScenarioConfig", "StudySummary",
    "unit_square", "rpoispp", "rpoisnet", "place_discs", "apply_scenario",
    "run_replicate", "replicate_study",
]
