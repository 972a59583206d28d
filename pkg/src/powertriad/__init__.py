"""Power-regime diagnostics, safe scaling and tracking for estimators.

The toolkit answers one recurring question about an estimate v of a signal
x: does v carry more mean power than x, and what does that cost?  The
moments module accumulates the six sufficient sums, diagnostics classifies
the regime and checks the coupling penalty, scaling fits and certifies the
optimal multiplier (and walks iterative controllers toward it), zoo supplies
reproducible synthetic problems, and safezone_map draws the whole picture.
"""

from .diagnostics import (
    BALANCE_TOL,
    DEGENERACY_TOL,
    CouplingDecomposition,
    PenaltyVerdict,
    RegimeLabel,
    TriadReport,
    check_penalty,
    classify_regime,
    decompose_coupling,
    report_to_json,
    triad_report,
)
from .errors import (
    DegenerateWindow,
    EmptyInput,
    EmptySummary,
    InvalidSpec,
    NoClosedForm,
    NonFiniteSample,
    PowerTriadError,
    ZeroCandidatePower,
    ZeroSignalPower,
)
from .moments import (
    MomentStats,
    MomentSummary,
    PairedSample,
    SampleBatch,
    accumulate,
    finalize,
    merge,
    read_csv,
    stats_of,
    write_csv,
)
from .safezone_map import (
    MapDataset,
    MapGeometry,
    MapPoint,
    StyleConfig,
    build_left_map,
    build_right_map,
    emit_dataset,
    map_point,
    map_point_from_certificate,
    parse_dataset_csv,
    render_svg,
)
from .scaling import (
    ControllerConfig,
    ScalingCertificate,
    ScalingProblem,
    ScalingTrace,
    TrackTrace,
    balance_scale,
    certify_optimum,
    mse_of_t,
    optimal_scale,
    run_path,
    track_moving_optimum,
)
from .zoo import (
    ESTIMATOR_KINDS,
    PROBLEM_KINDS,
    EstimatorSpec,
    ProblemSpec,
    apply_estimator,
    fit_scale,
    generate,
    parse_estimator_spec,
    parse_problem_spec,
    population_moments,
    true_optimum,
    true_optimum_path,
    verified_amplifier,
)

__version__ = "0.1.0"

__all__ = [
    "BALANCE_TOL",
    "ControllerConfig",
    "CouplingDecomposition",
    "DEGENERACY_TOL",
    "DegenerateWindow",
    "ESTIMATOR_KINDS",
    "EmptyInput",
    "EmptySummary",
    "EstimatorSpec",
    "InvalidSpec",
    "MapDataset",
    "MapGeometry",
    "MapPoint",
    "MomentStats",
    "MomentSummary",
    "NoClosedForm",
    "NonFiniteSample",
    "PROBLEM_KINDS",
    "PairedSample",
    "PenaltyVerdict",
    "PowerTriadError",
    "ProblemSpec",
    "RegimeLabel",
    "SampleBatch",
    "ScalingCertificate",
    "ScalingProblem",
    "ScalingTrace",
    "StyleConfig",
    "TrackTrace",
    "TriadReport",
    "ZeroCandidatePower",
    "ZeroSignalPower",
    "accumulate",
    "apply_estimator",
    "balance_scale",
    "build_left_map",
    "build_right_map",
    "certify_optimum",
    "check_penalty",
    "classify_regime",
    "decompose_coupling",
    "emit_dataset",
    "finalize",
    "fit_scale",
    "generate",
    "map_point",
    "map_point_from_certificate",
    "merge",
    "mse_of_t",
    "optimal_scale",
    "parse_dataset_csv",
    "parse_estimator_spec",
    "parse_problem_spec",
    "population_moments",
    "read_csv",
    "render_svg",
    "report_to_json",
    "run_path",
    "stats_of",
    "track_moving_optimum",
    "triad_report",
    "true_optimum",
    "true_optimum_path",
    "verified_amplifier",
    "write_csv",
]
