"""glancelab: secondary-task glance behavior from touchscreen telemetry.

The pipeline turns raw trip logs into labeled engagements, trains random
forests for long-glance risk and total glance duration, and explains the
predictions with exact tree SHAP attributions:

    ingest -> sessionize -> filter glances -> features -> models -> SHAP

Layer map: `telemetry` (log parsing + invariants), `segmentation`
(engagement windows), `glance_pipeline` (AOI aggregation + six-rule
filtering), `features` (the 25-column vector and dataset handling),
`models` (forests, linear baselines, cross-validation, random search),
`shap_engine` (exact and brute-force attributions, plot data),
`synthgen` (ground-truth synthetic fleets), `eval_reports` (end-to-end
experiments), `service`/`cli` (HTTP + command line).
"""

from .telemetry import (
    CANONICAL_AOIS,
    CENTER_STACK,
    DRIVING_PERIOD_MS,
    ELEMENT_TYPES,
    EYES_CLOSED,
    OFF_ROAD,
    ON_ROAD,
    TRACKING_LOSS,
    DrivingSample,
    MalformedRecord,
    RawGlanceSegment,
    StateEvent,
    TelemetryError,
    TouchEvent,
    TripLog,
    UnsortedTimestamps,
    ingest_trip,
    write_trip,
)
from .segmentation import (
    DEFAULT_BUFFER_MS,
    DEFAULT_MAX_GAP_MS,
    DropStats,
    EmptyWindow,
    SecondaryTaskEngagement,
    SegmentationError,
    assemble_engagements,
    attach_glances,
    segment_interactions,
    window_driving,
)
from .glance_pipeline import (
    BLINK_MS,
    LONG_GLANCE_MS,
    MIN_GLANCE_MS,
    TRACKING_LOSS_BRIDGE_MS,
    GlanceMetrics,
    aggregate_aoi,
    filter_glances,
    glance_metrics,
)
from .features import (
    FEATURE_NAMES,
    N_FEATURES,
    Dataset,
    EmptyDataset,
    FeatureError,
    FeatureVector,
    LabeledEngagement,
    OneClassOnly,
    balance_undersample,
    extract_features,
    filter_dataset,
    label_engagement,
    load_dataset,
    save_dataset,
    summary_stats,
)
from .models import (
    CLASSIFICATION_PRESET,
    REGRESSION_PRESET,
    TASK_CLASSIFICATION,
    TASK_REGRESSION,
    Forest,
    ForestConfig,
    MetricsReport,
    ModelError,
    SearchResult,
    baseline_predict,
    cross_validate,
    fit_forest,
    fit_linear,
    fit_logistic,
    forest_hash,
    load_forest,
    predict,
    predict_batch,
    random_search,
    save_forest,
)
from .shap_engine import (
    Explanation,
    GlobalSummary,
    ShapError,
    beeswarm_data,
    brute_force_shap,
    dependence_data,
    explain_dataset,
    export_explanation,
    force_data,
    tree_shap,
    tree_shap_batch,
)
from .synthgen import (
    ArtifactSpec,
    GeneratorSpec,
    InfeasibleSpec,
    SessionTruth,
    generate_trip,
    generate_trips,
    inject_artifacts,
)
from .eval_reports import (
    ExperimentConfig,
    ExperimentReport,
    StageError,
    compare_models,
    run_experiment,
    save_report,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
